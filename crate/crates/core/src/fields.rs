//! Vector and one-form fields, evaluated together with their first
//! coordinate derivatives.

use nalgebra::{DMatrix, DVector};

use crate::chart::{parse_expression, Chart, ScalarField};
use crate::error::{GeomError, Result};
use crate::expr::Expr;
use crate::jets::{Jet2, Point};
use crate::metric::{MetricEval, MetricField};

#[derive(Debug, Clone)]
enum FieldKind {
    Components(Vec<Expr>),
    Gradient(ScalarField),
}

/// A vector field, either by explicit contravariant components or as the
/// metric gradient of a scalar.
#[derive(Debug, Clone)]
pub struct VectorField {
    chart: Chart,
    kind: FieldKind,
}

/// A one-form by explicit covariant components.
#[derive(Debug, Clone)]
pub struct OneFormField {
    pub chart: Chart,
    pub components: Vec<Expr>,
}

/// A vector field and its metric dual at one point, with derivatives.
///
/// `da[(i, k)] = d_i A^k` and `dalpha[(i, j)] = d_i alpha_j`.
#[derive(Debug, Clone)]
pub struct FieldJet {
    pub a: DVector<f64>,
    pub da: DMatrix<f64>,
    pub alpha: DVector<f64>,
    pub dalpha: DMatrix<f64>,
}

impl FieldJet {
    /// `<A, A>`
    pub fn norm2(&self) -> f64 {
        self.a.dot(&self.alpha)
    }

    /// `d_i <A, A> = 2 alpha_k d_i A^k + A^j A^k d_i g_jk`, written through
    /// `d_i <A,A> = A^k d_i alpha_k + alpha_k d_i A^k`.
    pub fn d_norm2(&self) -> DVector<f64> {
        &self.dalpha * &self.a + &self.da * &self.alpha
    }
}

impl VectorField {
    pub fn parse(chart: &Chart, srcs: &[&str]) -> Result<VectorField> {
        let comps = srcs
            .iter()
            .map(|s| parse_expression(s, chart))
            .collect::<Result<Vec<_>>>()?;
        VectorField::from_components(chart, comps)
    }

    pub fn from_components(chart: &Chart, comps: Vec<Expr>) -> Result<VectorField> {
        if comps.len() != chart.dim() {
            return Err(GeomError::DimensionMismatch {
                expected: chart.dim(),
                found: comps.len(),
            });
        }
        Ok(VectorField {
            chart: chart.clone(),
            kind: FieldKind::Components(comps),
        })
    }

    pub fn zero(chart: &Chart) -> VectorField {
        VectorField {
            chart: chart.clone(),
            kind: FieldKind::Components(vec![Expr::Const(0.0); chart.dim()]),
        }
    }

    /// `A = grad_g sigma`.
    pub fn gradient_of(sigma: &ScalarField) -> VectorField {
        VectorField {
            chart: sigma.chart.clone(),
            kind: FieldKind::Gradient(sigma.clone()),
        }
    }

    pub fn chart(&self) -> &Chart {
        &self.chart
    }

    pub fn components(&self) -> Option<&[Expr]> {
        match &self.kind {
            FieldKind::Components(c) => Some(c),
            FieldKind::Gradient(_) => None,
        }
    }

    pub fn describe(&self) -> String {
        match &self.kind {
            FieldKind::Components(c) => {
                let parts: Vec<String> = c
                    .iter()
                    .map(|e| e.render(self.chart.coord_names()))
                    .collect();
                format!("[{}]", parts.join(", "))
            }
            FieldKind::Gradient(s) => format!("grad({})", s.source()),
        }
    }

    fn check_chart(&self, g: &MetricField) -> Result<()> {
        if g.chart().id() != self.chart.id() {
            return Err(GeomError::ChartMismatch {
                expected: g.chart().id().to_string(),
                found: self.chart.id().to_string(),
            });
        }
        Ok(())
    }

    /// Components and derivatives at `x`, using an already evaluated metric.
    pub fn eval_with(&self, ev: &MetricEval, x: &Point) -> Result<FieldJet> {
        let m = ev.dim();
        match &self.kind {
            FieldKind::Components(comps) => {
                let jets = comps
                    .iter()
                    .map(|e| e.eval::<Jet2>(&x.coords))
                    .collect::<Result<Vec<_>, _>>()?;
                let a = DVector::from_fn(m, |k, _| jets[k].value());
                let da = DMatrix::from_fn(m, m, |i, k| jets[k].d(i));
                let alpha = &ev.g * &a;
                // d_i alpha_j = (d_i g_jl) A^l + g_jl d_i A^l
                let dalpha = DMatrix::from_fn(m, m, |i, j| {
                    (0..m)
                        .map(|l| ev.dg(i, j, l) * a[l] + ev.g[(j, l)] * da[(i, l)])
                        .sum()
                });
                Ok(FieldJet {
                    a,
                    da,
                    alpha,
                    dalpha,
                })
            }
            FieldKind::Gradient(sigma) => {
                let s: Jet2 = sigma.expr.eval(&x.coords)?;
                let alpha = DVector::from_fn(m, |j, _| s.d(j));
                let dalpha = DMatrix::from_fn(m, m, |i, j| s.dd(i, j));
                let a = &ev.inv * &alpha;
                // d_i A^k = (d_i g^kl) alpha_l + g^kl d_i alpha_l
                let mut da = DMatrix::zeros(m, m);
                for i in 0..m {
                    let dinv = ev.d_inv(i);
                    let row = dinv * &alpha + &ev.inv * dalpha.row(i).transpose();
                    for k in 0..m {
                        da[(i, k)] = row[k];
                    }
                }
                Ok(FieldJet {
                    a,
                    da,
                    alpha,
                    dalpha,
                })
            }
        }
    }

    pub fn eval(&self, g: &MetricField, x: &Point) -> Result<FieldJet> {
        self.check_chart(g)?;
        let ev = g.eval(x)?;
        self.eval_with(&ev, x)
    }

    /// Plain contravariant components at `x`.
    pub fn values(&self, g: &MetricField, x: &Point) -> Result<DVector<f64>> {
        match &self.kind {
            FieldKind::Components(comps) => {
                self.chart.check(x)?;
                let v = comps
                    .iter()
                    .map(|e| e.value(&x.coords))
                    .collect::<Result<Vec<_>, _>>()?;
                Ok(DVector::from_vec(v))
            }
            FieldKind::Gradient(_) => Ok(self.eval(g, x)?.a),
        }
    }

    /// The dual one-form `alpha_j = g_jl A^l`, symbolically.
    pub fn lower(&self, g: &MetricField) -> Result<OneFormField> {
        self.check_chart(g)?;
        let m = g.dim();
        let comps = match &self.kind {
            FieldKind::Components(c) => c,
            FieldKind::Gradient(_) => {
                return Err(GeomError::Unsupported(
                    "symbolic lowering of a gradient field".into(),
                ))
            }
        };
        let components = (0..m)
            .map(|j| {
                let terms: Vec<Expr> = (0..m)
                    .filter(|l| !g.components()[j][*l].is_zero() && !comps[*l].is_zero())
                    .map(|l| Expr::mul(g.components()[j][l].clone(), comps[l].clone()))
                    .collect();
                terms
                    .into_iter()
                    .reduce(Expr::add)
                    .unwrap_or(Expr::Const(0.0))
            })
            .collect();
        Ok(OneFormField {
            chart: self.chart.clone(),
            components,
        })
    }

    /// `<A, A>` as an expression (explicit components only).
    pub fn norm2_expr(&self, g: &MetricField) -> Result<Expr> {
        let alpha = self.lower(g)?;
        let comps = self.components().expect("lower succeeded");
        let terms: Vec<Expr> = (0..g.dim())
            .filter(|k| !alpha.components[*k].is_zero() && !comps[*k].is_zero())
            .map(|k| Expr::mul(comps[k].clone(), alpha.components[k].clone()))
            .collect();
        Ok(terms
            .into_iter()
            .reduce(Expr::add)
            .unwrap_or(Expr::Const(0.0)))
    }
}

impl OneFormField {
    /// Components and `d_i alpha_j` at `x`.
    pub fn eval(&self, x: &Point) -> Result<(DVector<f64>, DMatrix<f64>)> {
        self.chart.check(x)?;
        let m = self.chart.dim();
        let jets = self
            .components
            .iter()
            .map(|e| e.eval::<Jet2>(&x.coords))
            .collect::<Result<Vec<_>, _>>()?;
        Ok((
            DVector::from_fn(m, |j, _| jets[j].value()),
            DMatrix::from_fn(m, m, |i, j| jets[j].d(i)),
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::builtin_metric;

    #[test]
    fn atypical_field_jet() {
        let g = builtin_metric("hyperbolic_polar2").unwrap();
        let a = VectorField::parse(g.chart(), &["-2/rho", "0"]).unwrap();
        let x = g.chart().point(vec![2.0, 0.3]);
        let fj = a.eval(&g, &x).unwrap();
        assert_eq!(fj.a.as_slice(), &[-1.0, 0.0]);
        assert_eq!(fj.alpha.as_slice(), &[-1.0, 0.0]);
        assert_eq!(fj.norm2(), 1.0);
        // d_rho A^rho = 2/rho^2
        assert_eq!(fj.da[(0, 0)], 0.5);
        // d <A,A> = d(4/rho^2) = -8/rho^3
        assert_eq!(fj.d_norm2()[0], -1.0);
    }

    #[test]
    fn gradient_matches_explicit_field() {
        let g = builtin_metric("hyperbolic_polar2").unwrap();
        let sigma = ScalarField::parse(g.chart(), "-2*log(rho)").unwrap();
        let grad = VectorField::gradient_of(&sigma);
        let explicit = VectorField::parse(g.chart(), &["-2/rho", "0"]).unwrap();
        for x in g.chart().sample(20, 11).unwrap() {
            let a = grad.eval(&g, &x).unwrap();
            let b = explicit.eval(&g, &x).unwrap();
            assert!((a.a - b.a).amax() < 1e-13);
            assert!((a.da - b.da).amax() < 1e-12);
            assert!((a.dalpha - b.dalpha).amax() < 1e-12);
        }
    }

    #[test]
    fn symbolic_norm_matches_pointwise() {
        let g = builtin_metric("cone3").unwrap();
        let a = VectorField::parse(g.chart(), &["-2/rho", "0.1*u", "sin(v)"]).unwrap();
        let n2 = a.norm2_expr(&g).unwrap();
        for x in g.chart().sample(10, 2).unwrap() {
            let direct = a.eval(&g, &x).unwrap().norm2();
            let sym = n2.value(&x.coords).unwrap();
            assert!((direct - sym).abs() < 1e-12 * direct.abs().max(1.0));
        }
    }

    #[test]
    fn wrong_arity_rejected() {
        let g = builtin_metric("cone3").unwrap();
        assert!(matches!(
            VectorField::parse(g.chart(), &["1", "2"]),
            Err(GeomError::DimensionMismatch { .. })
        ));
    }
}
