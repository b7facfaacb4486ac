//! Conformal connections and the Ricci-comparison identities for
//! `g_bar = exp(2 sigma) g` with `A = grad sigma`.
//!
//! Notation: `alpha` is the one-form dual to `A`, `Q = nabla alpha - alpha (x) alpha`,
//! `q = tr Q~`, and `E = Ric_bar - Ric`.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::chart::ScalarField;
use crate::curvature::{christoffel_from, ChristoffelData, Curvature};
use crate::error::{GeomError, Result};
use crate::fields::{FieldJet, VectorField};
use crate::jets::Point;
use crate::metric::{MetricEval, MetricField};
use crate::tensor::{inner, max_abs, max_abs_vec, Tensor2};

/// Number of random directions added to the coordinate basis in connection checks.
pub const RANDOM_DIRECTIONS: usize = 10;

#[derive(Debug, Clone)]
pub struct ConformalPair {
    pub g: MetricField,
    pub a: VectorField,
    pub sigma: Option<ScalarField>,
}

/// Metric, connection and field jets at one point.
#[derive(Debug, Clone)]
pub struct PairAt {
    pub metric: MetricEval,
    pub christoffel: ChristoffelData,
    pub field: FieldJet,
}

impl ConformalPair {
    pub fn new(g: &MetricField, a: &VectorField) -> Result<ConformalPair> {
        if a.chart().id() != g.chart().id() {
            return Err(GeomError::ChartMismatch {
                expected: g.chart().id().to_string(),
                found: a.chart().id().to_string(),
            });
        }
        Ok(ConformalPair {
            g: g.clone(),
            a: a.clone(),
            sigma: None,
        })
    }

    /// `A = grad sigma`.
    pub fn from_sigma(g: &MetricField, sigma: &ScalarField) -> Result<ConformalPair> {
        let mut p = ConformalPair::new(g, &VectorField::gradient_of(sigma))?;
        p.sigma = Some(sigma.clone());
        Ok(p)
    }

    /// An explicit field together with the scalar it should be the gradient of.
    pub fn with_sigma(
        g: &MetricField,
        a: &VectorField,
        sigma: &ScalarField,
    ) -> Result<ConformalPair> {
        if sigma.chart.id() != g.chart().id() {
            return Err(GeomError::ChartMismatch {
                expected: g.chart().id().to_string(),
                found: sigma.chart.id().to_string(),
            });
        }
        let mut p = ConformalPair::new(g, a)?;
        p.sigma = Some(sigma.clone());
        Ok(p)
    }

    pub fn dim(&self) -> usize {
        self.g.dim()
    }

    pub fn sigma(&self) -> Result<&ScalarField> {
        self.sigma.as_ref().ok_or(GeomError::MissingSigma)
    }

    pub fn rescaled(&self) -> Result<MetricField> {
        self.g.conformal_rescale(self.sigma()?)
    }

    pub fn at(&self, x: &Point) -> Result<PairAt> {
        let metric = self.g.eval(x)?;
        let christoffel = christoffel_from(&metric);
        let field = self.a.eval_with(&metric, x)?;
        Ok(PairAt {
            metric,
            christoffel,
            field,
        })
    }

    /// `|A - grad sigma|_inf / max(1, |A|_inf)`.
    pub fn gradient_consistency(&self, x: &Point) -> Result<f64> {
        let sigma = self.sigma()?;
        let ev = self.g.eval(x)?;
        let a = self.a.eval_with(&ev, x)?.a;
        let grad = VectorField::gradient_of(sigma).eval_with(&ev, x)?.a;
        Ok(max_abs_vec(&(&a - grad)) / max_abs_vec(&a).max(1.0))
    }

    fn require_dim3(&self) -> Result<()> {
        if self.dim() < 3 {
            return Err(GeomError::DimensionTooLow {
                required: 3,
                found: self.dim(),
            });
        }
        Ok(())
    }
}

/// `D(X, Y) = <A,X> Y + <A,Y> X - <X,Y> A`
pub fn difference_at(p: &PairAt, x: &DVector<f64>, y: &DVector<f64>) -> DVector<f64> {
    let g = &p.metric.g;
    let a = &p.field.a;
    y * inner(g, a, x) + x * inner(g, a, y) - a * inner(g, x, y)
}

pub fn connection_difference(
    pair: &ConformalPair,
    xv: &DVector<f64>,
    yv: &DVector<f64>,
    x: &Point,
) -> Result<DVector<f64>> {
    let m = pair.dim();
    for v in [xv, yv] {
        if v.len() != m {
            return Err(GeomError::DimensionMismatch {
                expected: m,
                found: v.len(),
            });
        }
    }
    Ok(difference_at(&pair.at(x)?, xv, yv))
}

/// Coordinate basis followed by `n_random` seeded directions with entries in `[-1, 1]`.
pub fn test_directions(m: usize, n_random: usize, seed: u64) -> Vec<DVector<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out: Vec<DVector<f64>> = (0..m)
        .map(|i| DVector::from_fn(m, |k, _| if k == i { 1.0 } else { 0.0 }))
        .collect();
    out.extend((0..n_random).map(|_| DVector::from_fn(m, |_, _| rng.gen_range(-1.0..1.0))));
    out
}

/// Largest `|nabla_bar_X Y - nabla_X Y - D(X, Y)|` over pairs of test directions,
/// relative to `max(1, |D|)`. `Y` is extended as a constant-coefficient field so
/// the difference of covariant derivatives is the difference of the Christoffel
/// contractions.
pub fn conformal_connection_check(
    pair: &ConformalPair,
    x: &Point,
    n_random: usize,
    seed: u64,
) -> Result<f64> {
    let gbar = pair.rescaled()?;
    let p = pair.at(x)?;
    let cbar = christoffel_from(&gbar.eval(x)?);
    let dirs = test_directions(pair.dim(), n_random, seed);
    let mut worst = 0.0f64;
    for xv in &dirs {
        for yv in &dirs {
            let lhs = cbar.contract(xv, yv) - p.christoffel.contract(xv, yv);
            let d = difference_at(&p, xv, yv);
            worst = worst.max(max_abs_vec(&(lhs - &d)) / max_abs_vec(&d).max(1.0));
        }
    }
    Ok(worst)
}

/// `(nabla alpha)_ij = d_i alpha_j - Gamma^k_ij alpha_k`, not assumed symmetric.
pub fn nabla_alpha(p: &PairAt) -> DMatrix<f64> {
    let m = p.metric.dim();
    let f = &p.field;
    DMatrix::from_fn(m, m, |i, j| {
        f.dalpha[(i, j)]
            - (0..m)
                .map(|k| p.christoffel.gamma(k, i, j) * f.alpha[k])
                .sum::<f64>()
    })
}

pub fn q_matrix(p: &PairAt) -> DMatrix<f64> {
    let alpha = &p.field.alpha;
    nabla_alpha(p) - alpha * alpha.transpose()
}

pub fn q_tensor(pair: &ConformalPair, x: &Point) -> Result<Tensor2> {
    Ok(Tensor2::covariant(q_matrix(&pair.at(x)?)))
}

pub fn q_trace(pair: &ConformalPair, x: &Point) -> Result<f64> {
    let p = pair.at(x)?;
    Ok(mixed_trace(&q_matrix(&p), &p.metric.inv))
}

/// `tr T~ = g^ij T_ij`
pub fn mixed_trace(t: &DMatrix<f64>, inv: &DMatrix<f64>) -> f64 {
    inv.component_mul(t).sum()
}

/// Pointwise linear algebra of the comparison identities. Every function takes
/// the metric matrix `g`, its inverse, and `n = <A,A>`.
pub mod identities {
    use nalgebra::DMatrix;

    use super::mixed_trace;

    /// `E = (2 - m) Q - (q + (m - 1) n) g`
    pub fn e_from_q(
        q: &DMatrix<f64>,
        g: &DMatrix<f64>,
        inv: &DMatrix<f64>,
        n: f64,
    ) -> DMatrix<f64> {
        let m = g.nrows() as f64;
        let qt = mixed_trace(q, inv);
        q * (2.0 - m) - g * (qt + (m - 1.0) * n)
    }

    /// `-E/(m-2) + tr(E~) g / (2 (m-2)(m-1))`
    pub fn main_lhs(e: &DMatrix<f64>, g: &DMatrix<f64>, inv: &DMatrix<f64>) -> DMatrix<f64> {
        let m = g.nrows() as f64;
        let tr = mixed_trace(e, inv);
        e * (-1.0 / (m - 2.0)) + g * (tr / (2.0 * (m - 2.0) * (m - 1.0)))
    }

    /// `Q + n g / 2`
    pub fn main_rhs(q: &DMatrix<f64>, g: &DMatrix<f64>, n: f64) -> DMatrix<f64> {
        q + g * (0.5 * n)
    }

    /// `tr E~ = (2 - 2m) q - (m - 1) m n`
    pub fn tr_e_from_q(q_tr: f64, m: usize, n: f64) -> f64 {
        let m = m as f64;
        (2.0 - 2.0 * m) * q_tr - (m - 1.0) * m * n
    }

    /// `q = tr E~ / (2 - 2m) - m n / 2`
    pub fn q_from_tr_e(tr_e: f64, m: usize, n: f64) -> f64 {
        let m = m as f64;
        tr_e / (2.0 - 2.0 * m) - 0.5 * m * n
    }

    /// `Q = E/(2 - m) + (q + (m - 1) n) g / (2 - m)` with `q` recovered from `tr E~`.
    pub fn q_from_e(
        e: &DMatrix<f64>,
        g: &DMatrix<f64>,
        inv: &DMatrix<f64>,
        n: f64,
    ) -> DMatrix<f64> {
        let m = g.nrows();
        let mf = m as f64;
        let q_tr = q_from_tr_e(mixed_trace(e, inv), m, n);
        (e + g * (q_tr + (mf - 1.0) * n)) / (2.0 - mf)
    }
}

/// `|a - b|_inf / max(1, |a|_inf, |b|_inf)`
fn rel_residual(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    max_abs(&(a - b)) / max_abs(a).max(max_abs(b)).max(1.0)
}

fn rel_scalar(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}

/// Predicted `E = Ric_bar - Ric` from `A` alone.
pub fn ricci_difference_prediction(pair: &ConformalPair, x: &Point) -> Result<Tensor2> {
    pair.require_dim3()?;
    let p = pair.at(x)?;
    Ok(Tensor2::covariant(identities::e_from_q(
        &q_matrix(&p),
        &p.metric.g,
        &p.metric.inv,
        p.field.norm2(),
    )))
}

/// Relative residuals of the comparison identities with `E` computed directly
/// as `Ric(e^{2 sigma} g) - Ric(g)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MainIdentityResiduals {
    /// Direct `E` against the closed-form prediction from `Q`.
    pub prediction: f64,
    /// The main identity relating `E`, `tr E~`, `Q` and `<A,A>`.
    pub main: f64,
    pub trace: f64,
    pub q_trace: f64,
    pub q_tensor: f64,
}

impl MainIdentityResiduals {
    pub const NAMES: [&'static str; 5] = [
        "ricci_difference",
        "main_identity",
        "trace_identity",
        "q_from_trace",
        "Q_from_E",
    ];

    pub fn values(&self) -> [f64; 5] {
        [
            self.prediction,
            self.main,
            self.trace,
            self.q_trace,
            self.q_tensor,
        ]
    }

    pub fn max(&self) -> f64 {
        self.values().into_iter().fold(0.0, f64::max)
    }

    pub fn combine(self, other: MainIdentityResiduals) -> MainIdentityResiduals {
        MainIdentityResiduals {
            prediction: self.prediction.max(other.prediction),
            main: self.main.max(other.main),
            trace: self.trace.max(other.trace),
            q_trace: self.q_trace.max(other.q_trace),
            q_tensor: self.q_tensor.max(other.q_tensor),
        }
    }

    pub fn zero() -> MainIdentityResiduals {
        MainIdentityResiduals {
            prediction: 0.0,
            main: 0.0,
            trace: 0.0,
            q_trace: 0.0,
            q_tensor: 0.0,
        }
    }
}

/// Direct `E = Ric_bar - Ric` at `x`.
pub fn ricci_difference_direct(pair: &ConformalPair, x: &Point) -> Result<DMatrix<f64>> {
    let gbar = pair.rescaled()?;
    let ric_bar = Curvature::at(&gbar, x)?.ricci.comps;
    let ric = Curvature::at(&pair.g, x)?.ricci.comps;
    Ok(ric_bar - ric)
}

pub fn verify_main_identity(pair: &ConformalPair, x: &Point) -> Result<MainIdentityResiduals> {
    pair.require_dim3()?;
    let e = ricci_difference_direct(pair, x)?;
    let p = pair.at(x)?;
    let (g, inv) = (&p.metric.g, &p.metric.inv);
    let m = pair.dim();
    let n = p.field.norm2();
    let q = q_matrix(&p);
    let q_tr = mixed_trace(&q, inv);
    let tr_e = mixed_trace(&e, inv);
    Ok(MainIdentityResiduals {
        prediction: rel_residual(&e, &identities::e_from_q(&q, g, inv, n)),
        main: rel_residual(
            &identities::main_lhs(&e, g, inv),
            &identities::main_rhs(&q, g, n),
        ),
        trace: rel_scalar(tr_e, identities::tr_e_from_q(q_tr, m, n)),
        q_trace: rel_scalar(q_tr, identities::q_from_tr_e(tr_e, m, n)),
        q_tensor: rel_residual(&q, &identities::q_from_e(&e, g, inv, n)),
    })
}

/// Checks `E = tr(E~) g / (2(m-1))` and `E = 0` for the directly computed `E`.
/// Returns both residuals relative to `max(1, |Ric|)`.
pub fn eetilde_check(pair: &ConformalPair, x: &Point) -> Result<(f64, f64)> {
    pair.require_dim3()?;
    let e = ricci_difference_direct(pair, x)?;
    let ev = pair.g.eval(x)?;
    let scale = max_abs(&Curvature::at(&pair.g, x)?.ricci.comps).max(1.0);
    let m = pair.dim() as f64;
    let tr = mixed_trace(&e, &ev.inv);
    let proportional = max_abs(&(&e - &ev.g * (tr / (2.0 * (m - 1.0))))) / scale;
    Ok((proportional, max_abs(&e) / scale))
}

/// The comparison identities on random symmetric data with no geometry
/// involved: build `E` from a random `Q` and check every identity. Returns the
/// largest relative residual over `trials` draws for each `m` in `dims`.
pub fn algebraic_consistency(dims: &[usize], trials: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for &m in dims {
        for _ in 0..trials {
            let sym = |rng: &mut ChaCha8Rng, diag_floor: f64| {
                let mut a = DMatrix::from_fn(m, m, |_, _| rng.gen_range(-1.0..1.0));
                a = (&a + a.transpose()) * 0.5;
                for i in 0..m {
                    let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
                    a[(i, i)] = sign * (diag_floor + rng.gen_range(0.0..1.0));
                }
                a
            };
            let g = sym(&mut rng, 3.0);
            let Some(inv) = g.clone().try_inverse() else {
                continue;
            };
            let q = sym(&mut rng, 0.0);
            let n = rng.gen_range(-2.0..2.0);
            let e = identities::e_from_q(&q, &g, &inv, n);
            let q_tr = mixed_trace(&q, &inv);
            let tr_e = mixed_trace(&e, &inv);
            for r in [
                rel_residual(
                    &identities::main_lhs(&e, &g, &inv),
                    &identities::main_rhs(&q, &g, n),
                ),
                rel_scalar(tr_e, identities::tr_e_from_q(q_tr, m, n)),
                rel_scalar(q_tr, identities::q_from_tr_e(tr_e, m, n)),
                rel_residual(&q, &identities::q_from_e(&e, &g, &inv, n)),
            ] {
                worst = worst.max(r);
            }
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::builtin_metric;
    use nalgebra::dvector;

    fn mk3_pair() -> ConformalPair {
        let g = builtin_metric("minkowski3").unwrap();
        let s = ScalarField::parse(g.chart(), "0.3*x").unwrap();
        ConformalPair::from_sigma(&g, &s).unwrap()
    }

    #[test]
    fn zero_field_gives_zero_difference() {
        let g = builtin_metric("cone3").unwrap();
        let pair = ConformalPair::from_sigma(&g, &ScalarField::zero(g.chart())).unwrap();
        let x = g.chart().point(vec![1.0, 0.5, 0.2]);
        let d = connection_difference(
            &pair,
            &dvector![1.0, 2.0, 3.0],
            &dvector![0.5, -1.0, 0.0],
            &x,
        )
        .unwrap();
        assert_eq!(d.amax(), 0.0);
        assert_eq!(conformal_connection_check(&pair, &x, 10, 1).unwrap(), 0.0);
        assert_eq!(q_tensor(&pair, &x).unwrap().max_abs(), 0.0);
        assert_eq!(
            ricci_difference_prediction(&pair, &x).unwrap().max_abs(),
            0.0
        );
        assert_eq!(verify_main_identity(&pair, &x).unwrap().max(), 0.0);
    }

    #[test]
    fn difference_for_atypical_field() {
        let g = builtin_metric("hyperbolic_polar2").unwrap();
        let a = VectorField::parse(g.chart(), &["-2/rho", "0"]).unwrap();
        let pair = ConformalPair::new(&g, &a).unwrap();
        let x = g.chart().point(vec![1.0, 0.4]);
        let th = dvector![0.0, 1.0];
        let d = connection_difference(&pair, &th, &th, &x).unwrap();
        assert_eq!(d.as_slice(), &[-2.0, 0.0]);
        let u = dvector![0.3, -1.2];
        let v = dvector![2.0, 0.7];
        let duv = connection_difference(&pair, &u, &v, &x).unwrap();
        let dvu = connection_difference(&pair, &v, &u, &x).unwrap();
        assert!((duv - dvu).amax() < 1e-15);
    }

    #[test]
    fn connection_check_examples() {
        let pair = mk3_pair();
        for (i, x) in pair.g.chart().sample(20, 5).unwrap().iter().enumerate() {
            assert!(conformal_connection_check(&pair, x, 50, i as u64).unwrap() < 1e-8);
        }
        let g = builtin_metric("hyperbolic_polar2").unwrap();
        let s = ScalarField::parse(g.chart(), "-2*log(rho)").unwrap();
        let pair = ConformalPair::from_sigma(&g, &s).unwrap();
        for x in g.chart().sample(20, 5).unwrap() {
            assert!(conformal_connection_check(&pair, &x, 10, 3).unwrap() < 1e-8);
        }
        let no_sigma = ConformalPair::new(&g, &VectorField::zero(g.chart())).unwrap();
        assert!(matches!(
            conformal_connection_check(&no_sigma, &g.chart().point(vec![1.0, 0.0]), 1, 1),
            Err(GeomError::MissingSigma)
        ));
    }

    #[test]
    fn minkowski_linear_sigma_by_hand() {
        let pair = mk3_pair();
        let x = pair.g.chart().point(vec![0.0, 0.0, 0.0]);
        let q = q_tensor(&pair, &x).unwrap().comps;
        let mut want = DMatrix::zeros(3, 3);
        want[(1, 1)] = -0.09;
        assert!((&q - &want).amax() < 1e-15);
        assert!((q_trace(&pair, &x).unwrap() + 0.09).abs() < 1e-15);
        let e = ricci_difference_prediction(&pair, &x).unwrap().comps;
        let eta = DMatrix::from_diagonal(&dvector![-1.0, 1.0, 1.0]);
        let want_e = &want * -1.0 - &eta * 0.09;
        assert!((&e - &want_e).amax() < 1e-15);
        let direct = ricci_difference_direct(&pair, &x).unwrap();
        assert!((direct - want_e).amax() < 1e-8);
    }

    #[test]
    fn atypical_q_is_pure_trace() {
        let g = builtin_metric("cone3").unwrap();
        let a = VectorField::parse(g.chart(), &["-2/rho", "0", "0"]).unwrap();
        let pair = ConformalPair::new(&g, &a).unwrap();
        for x in g.chart().sample(10, 8).unwrap() {
            let p = pair.at(&x).unwrap();
            let want = &p.metric.g * (-2.0 / (x.coords[0] * x.coords[0]));
            assert!((q_matrix(&p) - want).amax() < 1e-12);
        }
    }

    #[test]
    fn main_identity_two_paths() {
        let pair = mk3_pair();
        for x in pair.g.chart().sample(50, 42).unwrap() {
            assert!(verify_main_identity(&pair, &x).unwrap().max() < 1e-7);
        }
        let g = builtin_metric("minkowski4").unwrap();
        let s = ScalarField::parse(g.chart(), "0.1*(x^2 - t)").unwrap();
        let pair = ConformalPair::from_sigma(&g, &s).unwrap();
        for x in g.chart().sample(50, 42).unwrap() {
            assert!(verify_main_identity(&pair, &x).unwrap().max() < 1e-6);
        }
    }

    #[test]
    fn dimension_two_refused() {
        let g = builtin_metric("hyperbolic_polar2").unwrap();
        let s = ScalarField::parse(g.chart(), "-2*log(rho)").unwrap();
        let pair = ConformalPair::from_sigma(&g, &s).unwrap();
        let x = g.chart().point(vec![1.0, 0.0]);
        assert!(matches!(
            verify_main_identity(&pair, &x),
            Err(GeomError::DimensionTooLow { .. })
        ));
        assert!(ricci_difference_prediction(&pair, &x).is_err());
    }

    #[test]
    fn pure_algebra() {
        assert!(algebraic_consistency(&[3, 4, 5], 200, 7) < 1e-12);
    }

    #[test]
    fn atypical_field_leaves_ricci_unchanged() {
        let g = builtin_metric("cone3").unwrap();
        let a = VectorField::parse(g.chart(), &["-2/rho", "0", "0"]).unwrap();
        let s = ScalarField::parse(g.chart(), "-2*log(rho)").unwrap();
        let pair = ConformalPair::with_sigma(&g, &a, &s).unwrap();
        for x in g.chart().sample(10, 4).unwrap() {
            assert!(pair.gradient_consistency(&x).unwrap() < 1e-9);
            let (prop, zero) = eetilde_check(&pair, &x).unwrap();
            assert!(prop < 1e-7 && zero < 1e-7, "{prop} {zero}");
        }
    }
}
