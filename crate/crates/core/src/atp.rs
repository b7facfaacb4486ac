//! Atypical vector fields: `nabla_X A = <A,X> A - ½ <A,A> X` for every `X`.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::chart::ScalarField;
use crate::curvature::{nabla_matrix, Curvature};
use crate::error::{GeomError, Result};
use crate::expr::Expr;
use crate::fields::VectorField;
use crate::jets::Point;
use crate::metric::MetricField;
use crate::tensor::{max_abs, max_abs_vec};

/// Default relative threshold for calling `<A,A>` null: `|<A,A>| <= NULL_REL_TOL |A|^2`.
pub const NULL_REL_TOL: f64 = 1e-9;

/// Default threshold on the defining residual below which a field counts as atypical.
pub const ATP_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CausalClass {
    Spacelike,
    Timelike,
    Null,
    Zero,
}

impl CausalClass {
    pub fn name(self) -> &'static str {
        match self {
            CausalClass::Spacelike => "spacelike",
            CausalClass::Timelike => "timelike",
            CausalClass::Null => "null",
            CausalClass::Zero => "zero",
        }
    }
}

/// Classify a vector by its components and squared norm. `tol` is both the
/// absolute threshold for `|A|_inf` and the relative null threshold.
pub fn classify(a: &DVector<f64>, norm2: f64, tol: f64) -> CausalClass {
    let size = max_abs_vec(a);
    if size <= tol {
        CausalClass::Zero
    } else if norm2.abs() <= tol * a.norm_squared() {
        CausalClass::Null
    } else if norm2 > 0.0 {
        CausalClass::Spacelike
    } else {
        CausalClass::Timelike
    }
}

pub fn causal_character(
    g: &MetricField,
    a: &VectorField,
    x: &Point,
    tol: f64,
) -> Result<CausalClass> {
    let fj = a.eval(g, x)?;
    Ok(classify(&fj.a, fj.norm2(), tol))
}

/// `max_i |nabla_i A - alpha_i A + ½ <A,A> e_i|_inf`
pub fn atp_residual(g: &MetricField, a: &VectorField, x: &Point) -> Result<f64> {
    let cv = Curvature::at(g, x)?;
    let fj = a.eval_with(&cv.metric, x)?;
    Ok(residual_matrix(&cv, &fj.a, &fj.da, &fj.alpha).amax())
}

/// Row `i` is `nabla_i A - alpha_i A + ½ <A,A> e_i`.
fn residual_matrix(
    cv: &Curvature,
    a: &DVector<f64>,
    da: &DMatrix<f64>,
    alpha: &DVector<f64>,
) -> DMatrix<f64> {
    let n = a.dot(alpha);
    let m = a.len();
    nabla_matrix(&cv.christoffel, a, da) - alpha * a.transpose()
        + DMatrix::identity(m, m) * (0.5 * n)
}

/// `(max_ij |R(d_i, d_j) A|, max_i |Ric(d_i, A)|)`
pub fn obstruction_check(g: &MetricField, a: &VectorField, x: &Point) -> Result<(f64, f64)> {
    let cv = Curvature::at(g, x)?;
    let fj = a.eval_with(&cv.metric, x)?;
    Ok(obstructions(&cv, &fj.a))
}

fn obstructions(cv: &Curvature, a: &DVector<f64>) -> (f64, f64) {
    let m = a.len();
    let r = &cv.riemann;
    let mut curv = 0.0f64;
    for i in 0..m {
        for j in 0..m {
            for d in 0..m {
                let s: f64 = (0..m).map(|c| r.get(d, c, i, j) * a[c]).sum();
                curv = curv.max(s.abs());
            }
        }
    }
    let ric = max_abs_vec(&(&cv.ricci.comps * a));
    (curv, ric)
}

/// Smallest singular value of the Ricci matrix relative to `max(1, |Ric|_inf)`.
pub fn ricci_min_singular(cv: &Curvature) -> f64 {
    let ric = &cv.ricci.comps;
    let sv = ric.clone().svd(false, false).singular_values;
    sv.min() / max_abs(ric).max(1.0)
}

/// `log |<A,A>|` at `x`.
pub fn recover_sigma(g: &MetricField, a: &VectorField, x: &Point) -> Result<f64> {
    let fj = a.eval(g, x)?;
    let n = fj.norm2();
    match classify(&fj.a, n, NULL_REL_TOL) {
        CausalClass::Null | CausalClass::Zero => Err(GeomError::NullField {
            coords: x.coords.clone(),
            norm: n,
        }),
        _ => Ok(n.abs().ln()),
    }
}

/// The scalar `½ log(<A,A>^2) = log |<A,A>|` as an expression, for fields
/// given by explicit components.
pub fn recovered_sigma_field(g: &MetricField, a: &VectorField) -> Result<ScalarField> {
    let n = a.norm2_expr(g)?;
    let expr = Expr::mul(
        Expr::Const(0.5),
        Expr::call(crate::jets::Func::Log, Expr::pow(n, Expr::Const(2.0))),
    );
    Ok(ScalarField::from_expr(g.chart(), expr))
}

/// `|grad sigma - A|_inf / max(1, |A|_inf)` for the recovered `sigma`.
pub fn recovery_gradient_residual(
    g: &MetricField,
    a: &VectorField,
    sigma: &ScalarField,
    x: &Point,
) -> Result<f64> {
    let ev = g.eval(x)?;
    let want = a.eval_with(&ev, x)?.a;
    let got = VectorField::gradient_of(sigma).eval_with(&ev, x)?.a;
    Ok(max_abs_vec(&(got - &want)) / max_abs_vec(&want).max(1.0))
}

/// `|Ric(e^{2 sigma} g) - Ric(g)|_inf / max(1, |Ric(g)|_inf)`.
pub fn ricci_round_trip(g: &MetricField, sigma: &ScalarField, x: &Point) -> Result<f64> {
    let gbar = g.conformal_rescale(sigma)?;
    let r = Curvature::at(g, x)?.ricci.comps;
    let rbar = Curvature::at(&gbar, x)?.ricci.comps;
    Ok(max_abs(&(&rbar - &r)) / max_abs(&r).max(1.0))
}

/// Per-sample atypical-field data.
#[derive(Debug, Clone, Serialize)]
pub struct AtpSample {
    pub coords: Vec<f64>,
    pub residual: f64,
    pub norm2: f64,
    pub class: CausalClass,
    pub d_alpha: f64,
    pub curvature_obstruction: f64,
    pub ricci_obstruction: f64,
    pub ricci_min_singular: f64,
}

pub fn analyze_point(
    g: &MetricField,
    a: &VectorField,
    x: &Point,
    null_tol: f64,
) -> Result<AtpSample> {
    let cv = Curvature::at(g, x)?;
    let fj = a.eval_with(&cv.metric, x)?;
    let residual = residual_matrix(&cv, &fj.a, &fj.da, &fj.alpha).amax();
    let norm2 = fj.norm2();
    let d_alpha = (&fj.dalpha - fj.dalpha.transpose()).amax();
    let (curv, ric) = obstructions(&cv, &fj.a);
    Ok(AtpSample {
        coords: x.coords.clone(),
        residual,
        norm2,
        class: classify(&fj.a, norm2, null_tol),
        d_alpha,
        curvature_obstruction: curv,
        ricci_obstruction: ric,
        ricci_min_singular: ricci_min_singular(&cv),
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct CausalTally {
    pub spacelike: usize,
    pub timelike: usize,
    pub null: usize,
    pub zero: usize,
}

impl CausalTally {
    pub fn add(&mut self, c: CausalClass) {
        match c {
            CausalClass::Spacelike => self.spacelike += 1,
            CausalClass::Timelike => self.timelike += 1,
            CausalClass::Null => self.null += 1,
            CausalClass::Zero => self.zero += 1,
        }
    }

    pub fn total(&self) -> usize {
        self.spacelike + self.timelike + self.null + self.zero
    }

    /// The single class present, if only one is.
    pub fn uniform(&self) -> Option<CausalClass> {
        let present: Vec<CausalClass> = [
            (self.spacelike, CausalClass::Spacelike),
            (self.timelike, CausalClass::Timelike),
            (self.null, CausalClass::Null),
            (self.zero, CausalClass::Zero),
        ]
        .into_iter()
        .filter(|(n, _)| *n > 0)
        .map(|(_, c)| c)
        .collect();
        match present.as_slice() {
            [c] => Some(*c),
            _ => None,
        }
    }
}

/// Aggregate over a sample set.
#[derive(Debug, Clone, Serialize)]
pub struct AtpReport {
    pub samples: usize,
    pub max_residual: f64,
    pub causal_tally: CausalTally,
    pub d_alpha_max: f64,
    pub obstruction_max: (f64, f64),
    /// Largest relative smallest-singular-value of Ricci over samples with `A != 0`.
    pub ricci_min_singular_max: f64,
    #[serde(skip)]
    pub per_sample: Vec<AtpSample>,
}

pub fn analyze(
    g: &MetricField,
    a: &VectorField,
    points: &[Point],
    null_tol: f64,
) -> Result<AtpReport> {
    let per_sample = points
        .par_iter()
        .map(|x| analyze_point(g, a, x, null_tol))
        .collect::<Result<Vec<_>>>()?;
    let mut tally = CausalTally::default();
    let mut rep = AtpReport {
        samples: per_sample.len(),
        max_residual: 0.0,
        causal_tally: tally,
        d_alpha_max: 0.0,
        obstruction_max: (0.0, 0.0),
        ricci_min_singular_max: 0.0,
        per_sample: Vec::new(),
    };
    for s in &per_sample {
        tally.add(s.class);
        rep.max_residual = rep.max_residual.max(s.residual);
        rep.d_alpha_max = rep.d_alpha_max.max(s.d_alpha);
        rep.obstruction_max.0 = rep.obstruction_max.0.max(s.curvature_obstruction);
        rep.obstruction_max.1 = rep.obstruction_max.1.max(s.ricci_obstruction);
        if s.class != CausalClass::Zero {
            rep.ricci_min_singular_max = rep.ricci_min_singular_max.max(s.ricci_min_singular);
        }
    }
    rep.causal_tally = tally;
    rep.per_sample = per_sample;
    Ok(rep)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum ConstancyOutcome {
    /// The field is not atypical at some sample, so the scan is not meaningful.
    Refused {
        max_residual: f64,
    },
    Uniform {
        class: CausalClass,
    },
    Mixed {
        tally: CausalTally,
        violations: Vec<Vec<f64>>,
    },
}

/// Sample-uniformity of the causal class, only for fields passing the residual
/// test. A uniform outcome is consistent with a global statement, not a proof.
pub fn constancy_scan(report: &AtpReport, atp_tol: f64) -> ConstancyOutcome {
    if !(report.max_residual <= atp_tol) {
        return ConstancyOutcome::Refused {
            max_residual: report.max_residual,
        };
    }
    match report.causal_tally.uniform() {
        Some(class) => ConstancyOutcome::Uniform { class },
        None => {
            let t = report.causal_tally;
            let majority = [
                (t.spacelike, CausalClass::Spacelike),
                (t.timelike, CausalClass::Timelike),
                (t.null, CausalClass::Null),
                (t.zero, CausalClass::Zero),
            ]
            .into_iter()
            .max_by_key(|(n, _)| *n)
            .map(|(_, c)| c)
            .expect("four classes");
            let violations = report
                .per_sample
                .iter()
                .filter(|s| s.class != majority)
                .map(|s| s.coords.clone())
                .collect();
            ConstancyOutcome::Mixed {
                tally: t,
                violations,
            }
        }
    }
}

/// `max |d alpha|` over samples, or `None` when the field fails the residual test.
pub fn locally_metric_check(report: &AtpReport, atp_tol: f64) -> Option<f64> {
    (report.max_residual <= atp_tol).then_some(report.d_alpha_max)
}
