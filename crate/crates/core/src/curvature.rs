//! Levi-Civita connection, curvature tensors and related contractions,
//! evaluated pointwise from metric jets.

use nalgebra::{DMatrix, DVector};

use crate::error::{GeomError, Result};
use crate::fields::VectorField;
use crate::jets::Point;
use crate::metric::{MetricEval, MetricField};
use crate::tensor::{Tensor2, Variance};

/// `gamma(k, i, j) = Γ^k_ij` and `dgamma(l, k, i, j) = d_l Γ^k_ij`.
#[derive(Debug, Clone)]
pub struct ChristoffelData {
    dim: usize,
    gamma: Vec<f64>,
    dgamma: Vec<f64>,
}

impl ChristoffelData {
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn gamma(&self, k: usize, i: usize, j: usize) -> f64 {
        let m = self.dim;
        self.gamma[(k * m + i) * m + j]
    }

    #[inline]
    pub fn dgamma(&self, l: usize, k: usize, i: usize, j: usize) -> f64 {
        let m = self.dim;
        self.dgamma[((l * m + k) * m + i) * m + j]
    }

    /// `Γ^k_ij X^i Y^j`
    pub fn contract(&self, x: &DVector<f64>, y: &DVector<f64>) -> DVector<f64> {
        let m = self.dim;
        DVector::from_fn(m, |k, _| {
            let mut s = 0.0;
            for i in 0..m {
                for j in 0..m {
                    s += self.gamma(k, i, j) * x[i] * y[j];
                }
            }
            s
        })
    }

    /// Largest `|Γ^k_ij - Γ^k_ji|` and `|d_l Γ^k_ij - d_l Γ^k_ji|`.
    pub fn asymmetry(&self) -> f64 {
        let m = self.dim;
        let mut worst = 0.0f64;
        for k in 0..m {
            for i in 0..m {
                for j in 0..m {
                    worst = worst.max((self.gamma(k, i, j) - self.gamma(k, j, i)).abs());
                    for l in 0..m {
                        worst =
                            worst.max((self.dgamma(l, k, i, j) - self.dgamma(l, k, j, i)).abs());
                    }
                }
            }
        }
        worst
    }
}

/// `get(d, c, a, b) = R^d_cab` with `R(d_a, d_b) d_c = R^d_cab d_d`.
#[derive(Debug, Clone)]
pub struct Riemann {
    dim: usize,
    comps: Vec<f64>,
}

impl Riemann {
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, d: usize, c: usize, a: usize, b: usize) -> f64 {
        let m = self.dim;
        self.comps[((d * m + c) * m + a) * m + b]
    }

    pub fn max_abs(&self) -> f64 {
        self.comps.iter().fold(0.0f64, |acc, v| acc.max(v.abs()))
    }

    /// `R(X, Y) Z`
    pub fn apply(&self, x: &DVector<f64>, y: &DVector<f64>, z: &DVector<f64>) -> DVector<f64> {
        let m = self.dim;
        DVector::from_fn(m, |d, _| {
            let mut s = 0.0;
            for c in 0..m {
                for a in 0..m {
                    for b in 0..m {
                        s += self.get(d, c, a, b) * x[a] * y[b] * z[c];
                    }
                }
            }
            s
        })
    }

    /// Largest `|R^d_cab + R^d_cba|`.
    pub fn antisymmetry_residual(&self) -> f64 {
        let m = self.dim;
        let mut worst = 0.0f64;
        for d in 0..m {
            for c in 0..m {
                for a in 0..m {
                    for b in 0..m {
                        worst = worst.max((self.get(d, c, a, b) + self.get(d, c, b, a)).abs());
                    }
                }
            }
        }
        worst
    }

    /// Largest `|R^d_cab + R^d_abc + R^d_bca|`.
    pub fn bianchi_residual(&self) -> f64 {
        let m = self.dim;
        let mut worst = 0.0f64;
        for d in 0..m {
            for c in 0..m {
                for a in 0..m {
                    for b in 0..m {
                        let s = self.get(d, c, a, b) + self.get(d, a, b, c) + self.get(d, b, c, a);
                        worst = worst.max(s.abs());
                    }
                }
            }
        }
        worst
    }
}

pub fn christoffel_from(ev: &MetricEval) -> ChristoffelData {
    let m = ev.dim();
    // first kind: first[l][i][j] = ½ (d_i g_jl + d_j g_il - d_l g_ij)
    let first =
        |l: usize, i: usize, j: usize| 0.5 * (ev.dg(i, j, l) + ev.dg(j, i, l) - ev.dg(l, i, j));
    let d_first = |p: usize, l: usize, i: usize, j: usize| {
        0.5 * (ev.ddg(p, i, j, l) + ev.ddg(p, j, i, l) - ev.ddg(p, l, i, j))
    };
    let mut gamma = vec![0.0; m * m * m];
    let mut dgamma = vec![0.0; m * m * m * m];
    let d_inv: Vec<DMatrix<f64>> = (0..m).map(|p| ev.d_inv(p)).collect();
    for k in 0..m {
        for i in 0..m {
            for j in i..m {
                let mut s = 0.0;
                for l in 0..m {
                    s += ev.inv[(k, l)] * first(l, i, j);
                }
                gamma[(k * m + i) * m + j] = s;
                gamma[(k * m + j) * m + i] = s;
                for p in 0..m {
                    let mut ds = 0.0;
                    for l in 0..m {
                        ds += d_inv[p][(k, l)] * first(l, i, j)
                            + ev.inv[(k, l)] * d_first(p, l, i, j);
                    }
                    dgamma[((p * m + k) * m + i) * m + j] = ds;
                    dgamma[((p * m + k) * m + j) * m + i] = ds;
                }
            }
        }
    }
    ChristoffelData {
        dim: m,
        gamma,
        dgamma,
    }
}

pub fn christoffel(g: &MetricField, x: &Point) -> Result<ChristoffelData> {
    Ok(christoffel_from(&g.eval(x)?))
}

/// `R^d_cab = d_a Γ^d_bc - d_b Γ^d_ac + Γ^d_ae Γ^e_bc - Γ^d_be Γ^e_ac`
pub fn riemann_from(chr: &ChristoffelData) -> Riemann {
    let m = chr.dim();
    let mut comps = vec![0.0; m * m * m * m];
    for d in 0..m {
        for c in 0..m {
            for a in 0..m {
                for b in (a + 1)..m {
                    let mut s = chr.dgamma(a, d, b, c) - chr.dgamma(b, d, a, c);
                    for e in 0..m {
                        s += chr.gamma(d, a, e) * chr.gamma(e, b, c)
                            - chr.gamma(d, b, e) * chr.gamma(e, a, c);
                    }
                    comps[((d * m + c) * m + a) * m + b] = s;
                    comps[((d * m + c) * m + b) * m + a] = -s;
                }
            }
        }
    }
    Riemann { dim: m, comps }
}

pub fn riemann(g: &MetricField, x: &Point) -> Result<Riemann> {
    Ok(riemann_from(&christoffel(g, x)?))
}

/// `Ric_ac = Σ_b R^b_cba`, the trace of `V -> R(V, X) Y`; positive on round
/// spheres.
pub fn ricci_from(r: &Riemann) -> Tensor2 {
    let m = r.dim();
    Tensor2::covariant(DMatrix::from_fn(m, m, |a, c| {
        (0..m).map(|b| r.get(b, c, b, a)).sum()
    }))
}

pub fn ricci(g: &MetricField, x: &Point) -> Result<Tensor2> {
    Ok(ricci_from(&riemann(g, x)?))
}

/// Everything curvature-related at one point, computed in a single pass.
#[derive(Debug, Clone)]
pub struct Curvature {
    pub metric: MetricEval,
    pub christoffel: ChristoffelData,
    pub riemann: Riemann,
    pub ricci: Tensor2,
    pub scalar: f64,
}

impl Curvature {
    pub fn at(g: &MetricField, x: &Point) -> Result<Curvature> {
        let metric = g.eval(x)?;
        let christoffel = christoffel_from(&metric);
        let riemann = riemann_from(&christoffel);
        let ricci = ricci_from(&riemann);
        let scalar = scalar_from(&ricci, &metric.inv);
        Ok(Curvature {
            metric,
            christoffel,
            riemann,
            ricci,
            scalar,
        })
    }

    /// `(Ric - ½ Sc g) / four_pi_g`
    pub fn energy_tensor(&self, four_pi_g: f64) -> Tensor2 {
        Tensor2::covariant((&self.ricci.comps - &self.metric.g * (0.5 * self.scalar)) / four_pi_g)
    }

    /// Largest `|d_k g_ij - Γ^l_ki g_lj - Γ^l_kj g_il|`.
    pub fn compatibility_residual(&self) -> f64 {
        let m = self.metric.dim();
        let (ev, chr) = (&self.metric, &self.christoffel);
        let mut worst = 0.0f64;
        for k in 0..m {
            for i in 0..m {
                for j in 0..m {
                    let mut s = ev.dg(k, i, j);
                    for l in 0..m {
                        s -= chr.gamma(l, k, i) * ev.g[(l, j)] + chr.gamma(l, k, j) * ev.g[(i, l)];
                    }
                    worst = worst.max(s.abs());
                }
            }
        }
        worst
    }
}

fn scalar_from(ric: &Tensor2, inv: &DMatrix<f64>) -> f64 {
    inv.component_mul(&ric.comps).sum()
}

pub fn scalar_curvature(g: &MetricField, x: &Point) -> Result<f64> {
    Ok(Curvature::at(g, x)?.scalar)
}

pub fn energy_tensor(g: &MetricField, x: &Point, four_pi_g: f64) -> Result<Tensor2> {
    Ok(Curvature::at(g, x)?.energy_tensor(four_pi_g))
}

/// `T~^i_j = g^ik T_kj`
pub fn tilde_with(t: &Tensor2, inv: &DMatrix<f64>) -> Result<Tensor2> {
    t.expect(Variance::Covariant)?;
    Ok(Tensor2::mixed(inv * &t.comps))
}

pub fn tilde(t: &Tensor2, g: &MetricField, x: &Point) -> Result<Tensor2> {
    let ev = g.eval(x)?;
    tilde_with(t, &ev.inv)
}

pub fn trace_mixed(t: &Tensor2) -> Result<f64> {
    t.expect(Variance::Mixed)?;
    Ok(t.comps.trace())
}

/// `(∇_X V)^k = X^i (d_i V^k + Γ^k_ij V^j)`
pub fn covariant_derivative_vector(
    g: &MetricField,
    v: &VectorField,
    xvec: &DVector<f64>,
    x: &Point,
) -> Result<DVector<f64>> {
    let ev = g.eval(x)?;
    let chr = christoffel_from(&ev);
    let fj = v.eval_with(&ev, x)?;
    if xvec.len() != ev.dim() {
        return Err(GeomError::DimensionMismatch {
            expected: ev.dim(),
            found: xvec.len(),
        });
    }
    let nabla = nabla_matrix(&chr, &fj.a, &fj.da);
    Ok(nabla.transpose() * xvec)
}

/// `N[(i, k)] = (∇_i V)^k`.
pub fn nabla_matrix(chr: &ChristoffelData, a: &DVector<f64>, da: &DMatrix<f64>) -> DMatrix<f64> {
    let m = chr.dim();
    DMatrix::from_fn(m, m, |i, k| {
        da[(i, k)] + (0..m).map(|j| chr.gamma(k, i, j) * a[j]).sum::<f64>()
    })
}

/// `div V = (1/sqrt|g|) d_i (sqrt|g| V^i) = d_i V^i + ½ V^j d_j log|det g|`
pub fn divergence(g: &MetricField, v: &VectorField, x: &Point) -> Result<f64> {
    let ev = g.eval(x)?;
    let fj = v.eval_with(&ev, x)?;
    let m = ev.dim();
    let mut div = fj.da.trace();
    for j in 0..m {
        let dg = DMatrix::from_fn(m, m, |a, b| ev.dg(j, a, b));
        // d_j log|det g| = tr(g^{-1} d_j g)
        let dlog = (&ev.inv * dg).trace();
        div += 0.5 * fj.a[j] * dlog;
    }
    Ok(div)
}
