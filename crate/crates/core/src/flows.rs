//! Geodesics, parallel frames, atypical-field pregeodesics and the scalar
//! ODEs whose finite-time blow-up witnesses incompleteness.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::curvature::christoffel_from;
use crate::error::{GeomError, Result};
use crate::expr::Expr;
use crate::fields::VectorField;
use crate::jets::Point;
use crate::metric::MetricField;
use crate::ode::{derivative, estimate_blowup, integrate, OdeTrack, StepControl, Verdict};
use crate::tensor::inner;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeodesicState {
    pub t: f64,
    pub x: Vec<f64>,
    pub v: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Trajectory {
    pub chart_id: String,
    pub states: Vec<GeodesicState>,
    /// Vectors transported along the curve, one list per state.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub transported: Vec<Vec<Vec<f64>>>,
    pub verdict: Verdict,
    pub t_end: f64,
    pub blowup_estimate: Option<f64>,
}

impl Trajectory {
    pub fn point(&self, i: usize) -> Point {
        Point::new(self.chart_id.clone(), self.states[i].x.clone())
    }

    pub fn times(&self) -> Vec<f64> {
        self.states.iter().map(|s| s.t).collect()
    }

    /// Largest `|<v,v>(t) - <v,v>(0)| / max(1, |<v,v>(0)|)`.
    pub fn norm_drift(&self, g: &MetricField) -> Result<f64> {
        let mut n0 = None;
        let mut worst = 0.0f64;
        for (i, s) in self.states.iter().enumerate() {
            let gm = g.matrix(&self.point(i))?;
            let v = DVector::from_column_slice(&s.v);
            let n = inner(&gm, &v, &v);
            let base = *n0.get_or_insert(n);
            worst = worst.max((n - base).abs() / base.abs().max(1.0));
        }
        Ok(worst)
    }

    /// Whitespace-separated columns `t x.. v..` for plotting.
    pub fn table(&self) -> String {
        let mut out = String::new();
        for s in &self.states {
            let cols: Vec<String> = std::iter::once(s.t)
                .chain(s.x.iter().copied())
                .chain(s.v.iter().copied())
                .map(|v| format!("{v:.12e}"))
                .collect();
            out.push_str(&cols.join(" "));
            out.push('\n');
        }
        out
    }
}

/// `x' = v`, `v'^k = -Gamma^k_ij v^i v^j`, and `E'^k = -Gamma^k_ij v^i E^j` for
/// `n_transported` extra vectors. State layout: `x, v, E_1, ...`.
fn geodesic_rhs(
    g: &MetricField,
    n_transported: usize,
) -> impl Fn(f64, &[f64]) -> Option<Vec<f64>> + Sync + '_ {
    let m = g.dim();
    move |_t, y| {
        let x = g.chart().point(y[..m].to_vec());
        if !g.chart().contains(&x.coords) {
            return None;
        }
        let chr = christoffel_from(&g.eval(&x).ok()?);
        let v = DVector::from_column_slice(&y[m..2 * m]);
        let mut out = Vec::with_capacity(y.len());
        out.extend_from_slice(&y[m..2 * m]);
        out.extend(chr.contract(&v, &v).iter().map(|a| -a));
        for e in 0..n_transported {
            let w = DVector::from_column_slice(&y[(2 + e) * m..(3 + e) * m]);
            out.extend(chr.contract(&v, &w).iter().map(|a| -a));
        }
        Some(out)
    }
}

fn check_start(g: &MetricField, x0: &Point, v0: &DVector<f64>) -> Result<()> {
    g.eval(x0)?;
    if v0.len() != g.dim() {
        return Err(GeomError::DimensionMismatch {
            expected: g.dim(),
            found: v0.len(),
        });
    }
    if v0.amax() == 0.0 {
        return Err(GeomError::Precondition("initial velocity is zero".into()));
    }
    Ok(())
}

fn to_trajectory(chart_id: &str, m: usize, n_transported: usize, tr: &OdeTrack) -> Trajectory {
    let states =
        tr.t.iter()
            .zip(&tr.y)
            .map(|(t, y)| GeodesicState {
                t: *t,
                x: y[..m].to_vec(),
                v: y[m..2 * m].to_vec(),
            })
            .collect();
    let transported = if n_transported == 0 {
        Vec::new()
    } else {
        tr.y.iter()
            .map(|y| {
                (0..n_transported)
                    .map(|e| y[(2 + e) * m..(3 + e) * m].to_vec())
                    .collect()
            })
            .collect()
    };
    Trajectory {
        chart_id: chart_id.to_string(),
        states,
        transported,
        verdict: tr.verdict,
        t_end: tr.t_end,
        blowup_estimate: tr.blowup_estimate,
    }
}

pub fn integrate_geodesic(
    g: &MetricField,
    x0: &Point,
    v0: &DVector<f64>,
    t_max: f64,
    ctrl: &StepControl,
) -> Result<Trajectory> {
    integrate_transport(g, x0, v0, &[], t_max, ctrl)
}

/// Geodesic from `(x0, v0)` carrying `vectors` by parallel transport.
pub fn integrate_transport(
    g: &MetricField,
    x0: &Point,
    v0: &DVector<f64>,
    vectors: &[DVector<f64>],
    t_max: f64,
    ctrl: &StepControl,
) -> Result<Trajectory> {
    check_start(g, x0, v0)?;
    let m = g.dim();
    let k = vectors.len();
    let mut y0: Vec<f64> = x0.coords.clone();
    y0.extend(v0.iter());
    for w in vectors {
        if w.len() != m {
            return Err(GeomError::DimensionMismatch {
                expected: m,
                found: w.len(),
            });
        }
        y0.extend(w.iter());
    }
    let rhs = geodesic_rhs(g, k);
    let monitor = |y: &[f64]| y[m..].iter().fold(0.0f64, |a, b| a.max(b.abs()));
    let tr = integrate(&rhs, &monitor, &y0, 0.0, t_max, ctrl)?;
    Ok(to_trajectory(x0.chart_id.as_str(), m, k, &tr))
}

/// Signature-aware Gram-Schmidt starting from `v0`, then coordinate vectors,
/// then sums of pairs of coordinate vectors. Candidates that are (nearly)
/// null after projection are skipped. Returns the frame and `eps_i = <E_i,E_i>`.
pub fn orthonormal_frame(
    gm: &DMatrix<f64>,
    v0: &DVector<f64>,
) -> Result<(Vec<DVector<f64>>, Vec<f64>)> {
    let m = gm.nrows();
    let basis = |i: usize| DVector::from_fn(m, |k, _| if k == i { 1.0 } else { 0.0 });
    let mut candidates = vec![v0.clone()];
    candidates.extend((0..m).map(basis));
    for i in 0..m {
        for j in (i + 1)..m {
            candidates.push(basis(i) + basis(j));
            candidates.push(basis(i) - basis(j));
        }
    }
    let mut frame: Vec<DVector<f64>> = Vec::with_capacity(m);
    let mut eps: Vec<f64> = Vec::with_capacity(m);
    for (idx, w) in candidates.into_iter().enumerate() {
        if frame.len() == m {
            break;
        }
        let mut u = w.clone();
        for (e, s) in frame.iter().zip(&eps) {
            let c = s * inner(gm, &u, e);
            u -= e * c;
        }
        let scale = inner(&DMatrix::identity(m, m), &u, &u).max(1e-300) * gm.amax().max(1.0);
        let n = inner(gm, &u, &u);
        if n.abs() <= 1e-8 * scale {
            if idx == 0 {
                return Err(GeomError::DegenerateFrame(
                    "initial velocity is null".into(),
                ));
            }
            continue;
        }
        frame.push(u / n.abs().sqrt());
        eps.push(n.signum());
    }
    if frame.len() < m {
        return Err(GeomError::DegenerateFrame(format!(
            "only {} of {m} frame vectors found",
            frame.len()
        )));
    }
    Ok((frame, eps))
}

/// A unit-speed geodesic with a parallel orthonormal frame `E_0 = gamma'`.
#[derive(Debug, Clone, Serialize)]
pub struct FrameRun {
    pub trajectory: Trajectory,
    pub eps: Vec<f64>,
}

impl FrameRun {
    /// Frame vectors at state `i`; the first is the velocity.
    pub fn frame(&self, i: usize) -> Vec<DVector<f64>> {
        std::iter::once(DVector::from_column_slice(&self.trajectory.states[i].v))
            .chain(
                self.trajectory.transported[i]
                    .iter()
                    .map(|w| DVector::from_column_slice(w)),
            )
            .collect()
    }

    /// Largest `|<E_i, E_j> - eps_i delta_ij|` along the run.
    pub fn orthonormality_drift(&self, g: &MetricField) -> Result<f64> {
        let mut worst = 0.0f64;
        for i in 0..self.trajectory.states.len() {
            let gm = g.matrix(&self.trajectory.point(i))?;
            let fr = self.frame(i);
            for a in 0..fr.len() {
                for b in 0..fr.len() {
                    let want = if a == b { self.eps[a] } else { 0.0 };
                    worst = worst.max((inner(&gm, &fr[a], &fr[b]) - want).abs());
                }
            }
        }
        Ok(worst)
    }
}

/// Normalizes `v0` to unit speed, builds the initial frame and transports it.
pub fn frame_run(
    g: &MetricField,
    x0: &Point,
    v0: &DVector<f64>,
    t_max: f64,
    ctrl: &StepControl,
) -> Result<FrameRun> {
    check_start(g, x0, v0)?;
    let gm = g.matrix(x0)?;
    let (frame, eps) = orthonormal_frame(&gm, v0)?;
    let trajectory = integrate_transport(g, x0, &frame[0], &frame[1..], t_max, ctrl)?;
    Ok(FrameRun { trajectory, eps })
}

/// `a_i(t) = <A, E_i>` along a frame run, so that `A = sum a_i eps_i E_i`.
#[derive(Debug, Clone, Serialize)]
pub struct CoefficientTracks {
    pub t: Vec<f64>,
    pub eps: Vec<f64>,
    /// `a[i][k]` is `a_i` at the `k`-th recorded time.
    pub a: Vec<Vec<f64>>,
    /// Largest `|A - sum a_i eps_i E_i|_inf` along the run.
    pub reconstruction: f64,
}

pub fn transport_coefficients(
    g: &MetricField,
    a: &VectorField,
    run: &FrameRun,
) -> Result<CoefficientTracks> {
    let tr = &run.trajectory;
    if tr.transported.is_empty() {
        return Err(GeomError::DegenerateFrame(
            "trajectory carries no frame".into(),
        ));
    }
    let m = g.dim();
    let mut coeffs = vec![Vec::with_capacity(tr.states.len()); m];
    let mut reconstruction = 0.0f64;
    for i in 0..tr.states.len() {
        let x = tr.point(i);
        let ev = g.eval(&x)?;
        let av = a.eval_with(&ev, &x)?.a;
        let fr = run.frame(i);
        let mut rebuilt = DVector::zeros(m);
        for (k, e) in fr.iter().enumerate() {
            let c = inner(&ev.g, &av, e);
            coeffs[k].push(c);
            rebuilt += e * (c * run.eps[k]);
        }
        reconstruction = reconstruction.max((rebuilt - &av).amax());
    }
    Ok(CoefficientTracks {
        t: tr.times(),
        eps: run.eps.clone(),
        a: coeffs,
        reconstruction,
    })
}

/// `f = -(eps_0 / 2) sum_{i >= 1} eps_i a_i^2` at each recorded time, the
/// forcing in `da_0/dt = ½ a_0^2 + f`. With `eps_0` the minority sign of a
/// Lorentz signature and all other `eps_i` opposite, this is `½ sum a_i^2`.
pub fn forcing_track(c: &CoefficientTracks) -> Vec<f64> {
    (0..c.t.len())
        .map(|k| {
            let s: f64 = (1..c.a.len())
                .map(|i| c.eps[i] * c.a[i][k] * c.a[i][k])
                .sum();
            -0.5 * c.eps[0] * s
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct CoefficientOdeReport {
    /// Largest `|da_0/dt - ½ a_0^2 - f| / max(1, |½ a_0^2 + f|)` at interior samples.
    pub residual: f64,
    pub eps0: f64,
    pub f_min: f64,
    pub f_max: f64,
    pub samples: usize,
}

/// Both sides of `da_0/dt = ½ a_0^2 + f(t)` along a unit-speed frame run,
/// the left by numerical differentiation of the `a_0` track.
pub fn coefficient_ode_timelike(
    g: &MetricField,
    a: &VectorField,
    run: &FrameRun,
) -> Result<CoefficientOdeReport> {
    let c = transport_coefficients(g, a, run)?;
    if (run.eps[0].abs() - 1.0).abs() > 1e-12 {
        return Err(GeomError::Precondition(
            "trajectory is not unit speed".into(),
        ));
    }
    if c.t.len() < 5 {
        return Err(GeomError::Precondition(format!(
            "trajectory has only {} samples",
            c.t.len()
        )));
    }
    let f = forcing_track(&c);
    let da0 = derivative(&c.t, &c.a[0]);
    let mut residual = 0.0f64;
    for k in 1..c.t.len() - 1 {
        let rhs = 0.5 * c.a[0][k] * c.a[0][k] + f[k];
        residual = residual.max((da0[k] - rhs).abs() / rhs.abs().max(1.0));
    }
    Ok(CoefficientOdeReport {
        residual,
        eps0: run.eps[0],
        f_min: f.iter().copied().fold(f64::INFINITY, f64::min),
        f_max: f.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        samples: c.t.len(),
    })
}

/// Integral curve of `A` traced as a unit-speed geodesic.
#[derive(Debug, Clone, Serialize)]
pub struct PregeodesicRun {
    pub trajectory: Trajectory,
    /// Sign of `<A,A>`; `A = f U` with `<U,U> = eps`.
    pub eps: f64,
    pub f0: f64,
    /// `2 / (eps f0)` in the parameter of `U`.
    pub predicted_t_star: f64,
    /// The curve is followed along `eps U`, where the blow-up lies at `2 / f0`.
    pub forward_t_star: f64,
    /// `f = |<A,A>|^{1/2}` at each recorded state.
    pub f: Vec<f64>,
    /// `U(f) / f^2` at each recorded state.
    pub uf_over_f2: Vec<f64>,
    /// Largest `|velocity - eps U|_inf` along the run.
    pub tangency: f64,
    pub blowup_estimate: Option<f64>,
}

impl PregeodesicRun {
    /// `2 f0 / (2 - f0 s)` in the forward parameter.
    pub fn closed_form(&self, s: f64) -> f64 {
        2.0 * self.f0 / (2.0 - self.f0 * s)
    }

    /// Largest relative deviation of `f` from the closed form for `s <= s_max`.
    pub fn closed_form_error(&self, s_max: f64) -> f64 {
        self.trajectory
            .states
            .iter()
            .zip(&self.f)
            .filter(|(s, _)| s.t <= s_max)
            .map(|(s, f)| {
                let want = self.closed_form(s.t);
                (f - want).abs() / want.abs()
            })
            .fold(0.0, f64::max)
    }

    /// Largest `|U(f)/f^2 - eps/2|`.
    pub fn uf_residual(&self) -> f64 {
        self.uf_over_f2
            .iter()
            .map(|r| (r - 0.5 * self.eps).abs())
            .fold(0.0, f64::max)
    }
}

pub fn integrate_pregeodesic_a(
    g: &MetricField,
    a: &VectorField,
    x0: &Point,
    t_max: f64,
    ctrl: &StepControl,
) -> Result<PregeodesicRun> {
    let fj = a.eval(g, x0)?;
    let n0 = fj.norm2();
    match crate::atp::classify(&fj.a, n0, crate::atp::NULL_REL_TOL) {
        crate::atp::CausalClass::Null | crate::atp::CausalClass::Zero => {
            return Err(GeomError::NullField {
                coords: x0.coords.clone(),
                norm: n0,
            })
        }
        _ => {}
    }
    let eps = n0.signum();
    let f0 = n0.abs().sqrt();
    let v0 = &fj.a * (eps / f0);
    let m = g.dim();
    let f_at = |coords: &[f64]| -> Option<f64> {
        let p = g.chart().point(coords.to_vec());
        Some(a.eval(g, &p).ok()?.norm2().abs().sqrt())
    };
    check_start(g, x0, &v0)?;
    let mut y0 = x0.coords.clone();
    y0.extend(v0.iter());
    let rhs = geodesic_rhs(g, 0);
    let monitor = |y: &[f64]| f_at(&y[..m]).unwrap_or(0.0);
    let tr = integrate(&rhs, &monitor, &y0, 0.0, t_max, ctrl)?;
    let trajectory = to_trajectory(&x0.chart_id, m, 0, &tr);

    let mut f = Vec::with_capacity(tr.len());
    let mut uf = Vec::with_capacity(tr.len());
    let mut tangency = 0.0f64;
    for (i, s) in trajectory.states.iter().enumerate() {
        let p = trajectory.point(i);
        let fj = a.eval(g, &p)?;
        let n = fj.norm2();
        let fi = n.abs().sqrt();
        f.push(fi);
        // U(f)/f^2 = sign(n) A(n) / (2 n^2)
        uf.push(n.signum() * fj.a.dot(&fj.d_norm2()) / (2.0 * n * n));
        let u = &fj.a * (eps / fi);
        tangency = tangency.max((DVector::from_column_slice(&s.v) - u).amax());
    }
    let blowup_estimate = tr.blowup_estimate.or_else(|| {
        (f.last().copied().unwrap_or(0.0) > 10.0 * f0)
            .then(|| estimate_blowup(&tr.t, &f))
            .flatten()
    });
    Ok(PregeodesicRun {
        trajectory,
        eps,
        f0,
        predicted_t_star: 2.0 / (eps * f0),
        forward_t_star: 2.0 / f0,
        f,
        uf_over_f2: uf,
        tangency,
        blowup_estimate,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ScalarRun {
    pub t: Vec<f64>,
    pub y: Vec<f64>,
    pub verdict: Verdict,
    pub t_end: f64,
    pub blowup_estimate: Option<f64>,
}

impl ScalarRun {
    fn from_track(tr: OdeTrack) -> ScalarRun {
        ScalarRun {
            y: tr.component(0),
            t: tr.t,
            verdict: tr.verdict,
            t_end: tr.t_end,
            blowup_estimate: tr.blowup_estimate,
        }
    }

    /// Blow-up estimate when one was fitted, the last time otherwise.
    pub fn t_esc(&self) -> Option<f64> {
        match self.verdict {
            Verdict::BlowUp => Some(self.blowup_estimate.unwrap_or(self.t_end)),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct NullOdeRun {
    pub run: ScalarRun,
    /// `1 / (eps alpha)` when positive.
    pub predicted: Option<f64>,
    /// Largest relative deviation from `eps alpha / (1 - eps alpha t)` before
    /// 90% of the predicted blow-up time (or over the whole run).
    pub closed_form_error: f64,
}

/// `da_0/dt = a_0^2` from `a_0(0) = eps alpha`.
pub fn null_coefficient_ode(
    alpha: f64,
    eps: f64,
    t_max: f64,
    ctrl: &StepControl,
) -> Result<NullOdeRun> {
    let y0 = eps * alpha;
    let rhs = |_t: f64, y: &[f64]| Some(vec![y[0] * y[0]]);
    let tr = integrate(&rhs, &|y: &[f64]| y[0].abs(), &[y0], 0.0, t_max, ctrl)?;
    let predicted = (y0 > 0.0).then(|| 1.0 / y0);
    let limit = predicted.map_or(f64::INFINITY, |p| 0.9 * p);
    let closed_form_error =
        tr.t.iter()
            .zip(&tr.y)
            .filter(|(t, _)| **t <= limit)
            .map(|(t, y)| {
                let want = y0 / (1.0 - y0 * t);
                (y[0] - want).abs()
                    / want
                        .abs()
                        .max(1e-300)
                        .max(if y0 == 0.0 { 1.0 } else { 0.0 })
            })
            .fold(0.0, f64::max);
    Ok(NullOdeRun {
        run: ScalarRun::from_track(tr),
        predicted,
        closed_form_error,
    })
}

/// A forcing term `f(t)` given as an expression in `t`.
#[derive(Debug, Clone)]
pub struct Forcing {
    pub source: String,
    expr: Expr,
}

impl Forcing {
    pub fn parse(src: &str) -> Result<Forcing> {
        let expr = Expr::parse(src, &["t".to_string()]).map_err(|source| GeomError::Parse {
            context: format!("forcing {src:?}"),
            source,
        })?;
        Ok(Forcing {
            source: src.to_string(),
            expr,
        })
    }

    pub fn eval(&self, t: f64) -> Option<f64> {
        self.expr.value(&[t]).ok()
    }

    /// Minimum over `n + 1` equally spaced points of `[0, t_max]`.
    pub fn sampled_min(&self, t_max: f64, n: usize) -> Option<f64> {
        (0..=n)
            .map(|i| self.eval(t_max * i as f64 / n as f64))
            .try_fold(f64::INFINITY, |acc, v| v.map(|v| acc.min(v)))
    }
}

/// `count` seeded positive forcings, alternating polynomial, exponential and
/// bounded oscillating forms.
pub fn seeded_forcings(count: usize, seed: u64) -> Vec<Forcing> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|i| {
            let c0: f64 = rng.gen_range(0.1..2.0);
            let c1: f64 = rng.gen_range(0.0..1.0);
            let c2: f64 = rng.gen_range(0.0..1.0);
            let src = match i % 3 {
                0 => format!("{c0:.6} + {c1:.6}*t + {c2:.6}*t^2"),
                1 => format!("{c0:.6}*exp({:.6}*t)", 2.0 * c1 - 1.0),
                _ => format!("{c0:.6}*(1.5 + sin({:.6}*t))", 1.0 + 3.0 * c2),
            };
            Forcing::parse(&src).expect("generated forcing parses")
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct RiccatiRun {
    pub run: ScalarRun,
    /// `2 / y0`, the blow-up time of the comparison solution.
    pub bound: f64,
    /// Largest `y0 (1/y - 1/phi)` over recorded times below the bound, floored
    /// at 0. Measured on reciprocals, where `1/phi` is linear, so rounding near
    /// the pole does not masquerade as a violation.
    pub dominance_violation: f64,
    pub f_min: f64,
}

impl RiccatiRun {
    pub fn t_esc(&self) -> Option<f64> {
        self.run.t_esc()
    }
}

/// `phi(t) = 2 y0 / (2 - y0 t)`
pub fn comparison_solution(y0: f64, t: f64) -> f64 {
    2.0 * y0 / (2.0 - y0 * t)
}

/// `dy/dt = ½ y^2 + f(t)` from `y(0) = y0 > 0`. The forcing must be positive on
/// `[0, t_max]`; `oracle` admits `f >= 0`, including the unforced case whose
/// solution is the comparison function itself.
pub fn riccati_blowup(
    forcing: &Forcing,
    y0: f64,
    t_max: f64,
    ctrl: &StepControl,
    oracle: bool,
) -> Result<RiccatiRun> {
    if !(y0 > 0.0) {
        return Err(GeomError::Precondition(format!(
            "initial value {y0} is not positive"
        )));
    }
    let f_min = forcing.sampled_min(t_max, 2000).ok_or_else(|| {
        GeomError::Precondition(format!(
            "forcing {} is undefined on [0, {t_max}]",
            forcing.source
        ))
    })?;
    if f_min < 0.0 || (f_min == 0.0 && !oracle) {
        return Err(GeomError::Precondition(format!(
            "forcing {} is not positive on [0, {t_max}] (min {f_min})",
            forcing.source
        )));
    }
    let rhs = |t: f64, y: &[f64]| Some(vec![0.5 * y[0] * y[0] + forcing.eval(t)?]);
    let tr = integrate(&rhs, &|y: &[f64]| y[0].abs(), &[y0], 0.0, t_max, ctrl)?;
    let bound = 2.0 / y0;
    let dominance_violation =
        tr.t.iter()
            .zip(&tr.y)
            .filter(|(t, _)| **t < bound)
            .map(|(t, y)| {
                let inv_phi = 1.0 / comparison_solution(y0, *t);
                y0 * (1.0 / y[0] - inv_phi)
            })
            .fold(0.0, f64::max);
    Ok(RiccatiRun {
        run: ScalarRun::from_track(tr),
        bound,
        dominance_violation,
        f_min,
    })
}

/// `sqrt(2) (pi/2 - atan(1/sqrt(2)))`, the escape time of `y' = ½ y^2 + 1`, `y(0) = 1`.
pub fn riccati_unit_blowup() -> f64 {
    let r = std::f64::consts::SQRT_2;
    r * (std::f64::consts::FRAC_PI_2 - (1.0 / r).atan())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::builtin_metric;
    use nalgebra::dvector;

    #[test]
    fn minkowski_lines() {
        let g = builtin_metric("minkowski4").unwrap();
        let x0 = g.chart().point(vec![0.1, -0.2, 0.3, 0.4]);
        let v0 = dvector![1.0, 0.3, -0.5, 0.2];
        let tr = integrate_geodesic(&g, &x0, &v0, 3.0, &StepControl::default()).unwrap();
        assert_eq!(tr.verdict, Verdict::Completed);
        for s in &tr.states {
            for k in 0..4 {
                assert!((s.x[k] - (x0.coords[k] + s.t * v0[k])).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn radial_geodesic_leaves_domain() {
        let g = builtin_metric("hyperbolic_polar2").unwrap();
        let x0 = g.chart().point(vec![1.0, 0.0]);
        let tr = integrate_geodesic(&g, &x0, &dvector![-1.0, 0.0], 3.0, &StepControl::default())
            .unwrap();
        assert_eq!(tr.verdict, Verdict::LeftDomain);
        assert!((tr.t_end - 1.0).abs() < 1e-5, "{}", tr.t_end);
        for s in &tr.states {
            assert!((s.x[0] - (1.0 - s.t)).abs() < 1e-9);
        }
    }

    #[test]
    fn schwarzschild_circular_orbit() {
        let g = builtin_metric("schwarzschild").unwrap();
        let pi = std::f64::consts::PI;
        let x0 = g.chart().point(vec![0.0, 6.0, pi / 2.0, 0.0]);
        let omega = 12f64.sqrt() / 36.0;
        let v0 = dvector![2f64.sqrt(), 0.0, 0.0, omega];
        let period = 2.0 * pi / omega;
        let tr = integrate_geodesic(&g, &x0, &v0, period, &StepControl::default()).unwrap();
        assert_eq!(tr.verdict, Verdict::Completed);
        let dr = tr
            .states
            .iter()
            .map(|s| (s.x[1] - 6.0).abs())
            .fold(0.0, f64::max);
        assert!(dr < 1e-4, "{dr}");
        assert!((tr.states.last().unwrap().x[3] - 2.0 * pi).abs() < 1e-6);
        assert!(tr.norm_drift(&g).unwrap() < 1e-6);
    }

    #[test]
    fn frame_is_orthonormal_and_flat_frames_constant() {
        let g = builtin_metric("minkowski3").unwrap();
        let x0 = g.chart().point(vec![0.0, 0.0, 0.0]);
        let run = frame_run(
            &g,
            &x0,
            &dvector![2.0, 0.5, 0.1],
            2.0,
            &StepControl::default(),
        )
        .unwrap();
        let first = run.frame(0);
        let last = run.frame(run.trajectory.states.len() - 1);
        for (a, b) in first.iter().zip(&last) {
            assert!((a - b).amax() < 1e-12);
        }
        assert!(run.orthonormality_drift(&g).unwrap() < 1e-12);
        assert_eq!(run.eps[0], -1.0);

        let c = builtin_metric("cone3").unwrap();
        let x0 = c.chart().point(vec![1.0, 0.5, 0.0]);
        let run = frame_run(
            &c,
            &x0,
            &dvector![0.4, 0.8, 0.3],
            0.5,
            &StepControl::default(),
        )
        .unwrap();
        assert!(run.orthonormality_drift(&c).unwrap() < 1e-7);
    }

    #[test]
    fn null_initial_velocity_rejected() {
        let g = builtin_metric("minkowski2").unwrap();
        let gm = g.matrix(&g.chart().point(vec![0.0, 0.0])).unwrap();
        assert!(matches!(
            orthonormal_frame(&gm, &dvector![1.0, 1.0]),
            Err(GeomError::DegenerateFrame(_))
        ));
    }

    #[test]
    fn coefficients_along_radial_geodesic() {
        let g = builtin_metric("hyperbolic_polar2").unwrap();
        let a = VectorField::parse(g.chart(), &["-2/rho", "0"]).unwrap();
        let x0 = g.chart().point(vec![1.0, 0.3]);
        let run = frame_run(&g, &x0, &dvector![-1.0, 0.0], 0.8, &StepControl::default()).unwrap();
        let c = transport_coefficients(&g, &a, &run).unwrap();
        for (k, s) in run.trajectory.states.iter().enumerate() {
            // E_0 = -d_rho, so <A, E_0> = 2/rho
            assert!((c.a[0][k] - 2.0 / s.x[0]).abs() < 1e-9);
            assert!(c.a[1][k].abs() < 1e-12);
        }
        assert!(c.reconstruction < 1e-9);
    }

    #[test]
    fn pregeodesic_blowup() {
        let g = builtin_metric("hyperbolic_polar2").unwrap();
        let a = VectorField::parse(g.chart(), &["-2/rho", "0"]).unwrap();
        for rho0 in [1.0, 2.0] {
            let x0 = g.chart().point(vec![rho0, 0.0]);
            let run = integrate_pregeodesic_a(&g, &a, &x0, 5.0, &StepControl::default()).unwrap();
            assert_eq!(run.eps, 1.0);
            assert!((run.predicted_t_star - rho0).abs() < 1e-12);
            assert!(run.closed_form_error(0.9 * rho0) < 1e-6);
            assert!((run.trajectory.t_end - rho0).abs() < 0.01);
            assert!((run.blowup_estimate.unwrap() - rho0).abs() < 0.01);
            assert!(run.uf_residual() < 1e-6);
            assert!(run.tangency < 1e-9);
        }
        let zero = VectorField::zero(g.chart());
        assert!(integrate_pregeodesic_a(
            &g,
            &zero,
            &g.chart().point(vec![1.0, 0.0]),
            1.0,
            &StepControl::default()
        )
        .is_err());
    }

    #[test]
    fn null_ode() {
        for (alpha, want) in [(0.5, 2.0), (1.0, 1.0), (2.0, 0.5)] {
            let r = null_coefficient_ode(alpha, 1.0, 5.0, &StepControl::default()).unwrap();
            assert_eq!(r.run.verdict, Verdict::BlowUp);
            assert!((r.run.t_esc().unwrap() - want).abs() < 0.003);
            assert!(r.closed_form_error < 1e-6);
        }
        let r = null_coefficient_ode(0.0, 1.0, 5.0, &StepControl::default()).unwrap();
        assert_eq!(r.run.verdict, Verdict::Completed);
        assert!(r.run.y.iter().all(|y| *y == 0.0));
        let r = null_coefficient_ode(1.0, -1.0, 5.0, &StepControl::default()).unwrap();
        assert_eq!(r.run.verdict, Verdict::Completed);
        assert!(r.closed_form_error < 1e-6);
    }

    #[test]
    fn riccati_cases() {
        let ctrl = StepControl::default();
        let unforced =
            riccati_blowup(&Forcing::parse("0").unwrap(), 1.0, 3.0, &ctrl, true).unwrap();
        assert!((unforced.t_esc().unwrap() - 2.0).abs() < 0.005);
        assert!(unforced.dominance_violation < 1e-8);
        assert!(riccati_blowup(&Forcing::parse("0").unwrap(), 1.0, 3.0, &ctrl, false).is_err());

        let unit = riccati_blowup(&Forcing::parse("1").unwrap(), 1.0, 3.0, &ctrl, false).unwrap();
        let t = unit.t_esc().unwrap();
        assert!((t - riccati_unit_blowup()).abs() < 0.005 && t < 2.0, "{t}");
        assert!((riccati_unit_blowup() - 1.3510).abs() < 1e-4);

        let quad =
            riccati_blowup(&Forcing::parse("1 + t^2").unwrap(), 1.0, 3.0, &ctrl, false).unwrap();
        assert!(quad.t_esc().unwrap() < 2.0);
        assert_eq!(quad.dominance_violation, 0.0);

        assert!(riccati_blowup(&Forcing::parse("1").unwrap(), -1.0, 3.0, &ctrl, false).is_err());
        assert!(riccati_blowup(&Forcing::parse("t - 1").unwrap(), 1.0, 3.0, &ctrl, false).is_err());
    }

    #[test]
    fn seeded_forcings_are_positive() {
        for f in seeded_forcings(20, 42) {
            assert!(f.sampled_min(4.0, 400).unwrap() > 0.0, "{}", f.source);
        }
    }

    #[test]
    fn coefficient_ode_on_cone() {
        let g = builtin_metric("cone3").unwrap();
        let a = VectorField::parse(g.chart(), &["-2/rho", "0", "0"]).unwrap();
        let x0 = g.chart().point(vec![1.0, 0.5, 0.0]);
        let ctrl = StepControl::default().with_h_max(1e-3);
        // negative norm direction, in the -rho^2 block
        let run = frame_run(&g, &x0, &dvector![0.4, 0.8, 0.3], 0.5, &ctrl).unwrap();
        assert_eq!(run.eps[0], -1.0);
        let rep = coefficient_ode_timelike(&g, &a, &run).unwrap();
        assert!(rep.residual < 1e-4, "{}", rep.residual);
        assert!(rep.f_min > 0.0);
        // radial direction: A is tangent and the forcing vanishes
        let run = frame_run(&g, &x0, &dvector![-1.0, 0.0, 0.0], 0.5, &ctrl).unwrap();
        assert_eq!(run.eps[0], 1.0);
        let rep = coefficient_ode_timelike(&g, &a, &run).unwrap();
        assert!(rep.residual < 1e-4);
        assert!(rep.f_max.abs() < 1e-12);
        // zero field
        let zero = VectorField::zero(g.chart());
        let rep = coefficient_ode_timelike(&g, &zero, &run).unwrap();
        assert_eq!(rep.residual, 0.0);
    }
}
