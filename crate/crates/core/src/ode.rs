//! Classical fourth-order Runge-Kutta with step-doubling error control,
//! domain-exit localization and finite-time blow-up detection.

use serde::{Deserialize, Serialize};

use crate::error::{GeomError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StepControl {
    /// Initial step, and the step of fixed-step runs.
    pub h0: f64,
    pub h_max: f64,
    /// Local error allowed per unit of the independent variable.
    pub tol: f64,
    /// Exit-time localization: a step that leaves the domain is halved until
    /// it is shorter than this.
    pub h_min: f64,
    /// The run stops with a blow-up verdict once the monitor exceeds this.
    pub escape: f64,
    pub max_steps: usize,
    pub fixed: bool,
}

impl Default for StepControl {
    fn default() -> Self {
        StepControl {
            h0: 1e-3,
            h_max: 0.1,
            tol: 1e-9,
            h_min: 1e-6,
            escape: 1e6,
            max_steps: 2_000_000,
            fixed: false,
        }
    }
}

impl StepControl {
    pub fn fixed(h: f64) -> StepControl {
        StepControl {
            h0: h,
            h_max: h,
            fixed: true,
            ..StepControl::default()
        }
    }

    /// Same control with base and maximal steps halved.
    pub fn halved(&self) -> StepControl {
        StepControl {
            h0: self.h0 / 2.0,
            h_max: self.h_max / 2.0,
            ..*self
        }
    }

    pub fn with_h_max(self, h_max: f64) -> StepControl {
        StepControl {
            h_max,
            h0: self.h0.min(h_max),
            ..self
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Completed,
    LeftDomain,
    BlowUp,
}

impl Verdict {
    pub fn name(self) -> &'static str {
        match self {
            Verdict::Completed => "completed",
            Verdict::LeftDomain => "left_domain",
            Verdict::BlowUp => "blow_up",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OdeTrack {
    pub t: Vec<f64>,
    pub y: Vec<Vec<f64>>,
    pub monitor: Vec<f64>,
    pub verdict: Verdict,
    pub t_end: f64,
    pub blowup_estimate: Option<f64>,
    pub rejected: usize,
}

impl OdeTrack {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    /// Component `k` of every recorded state.
    pub fn component(&self, k: usize) -> Vec<f64> {
        self.y.iter().map(|y| y[k]).collect()
    }
}

/// Right-hand side; `None` marks a state outside the domain.
pub type Rhs<'a> = dyn Fn(f64, &[f64]) -> Option<Vec<f64>> + Sync + 'a;

fn finite(v: &[f64]) -> bool {
    v.iter().all(|x| x.is_finite())
}

fn axpy(y: &[f64], h: f64, k: &[f64]) -> Vec<f64> {
    y.iter().zip(k).map(|(a, b)| a + h * b).collect()
}

fn eval(f: &Rhs, t: f64, y: &[f64]) -> Option<Vec<f64>> {
    if !finite(y) {
        return None;
    }
    f(t, y).filter(|d| finite(d))
}

/// One classical RK4 step given the slope at the start.
fn rk4(f: &Rhs, t: f64, y: &[f64], k1: &[f64], h: f64) -> Option<Vec<f64>> {
    let k2 = eval(f, t + h / 2.0, &axpy(y, h / 2.0, k1))?;
    let k3 = eval(f, t + h / 2.0, &axpy(y, h / 2.0, &k2))?;
    let k4 = eval(f, t + h, &axpy(y, h, &k3))?;
    let out: Vec<f64> = (0..y.len())
        .map(|i| y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect();
    finite(&out).then_some(out)
}

/// Integrate `y' = f(t, y)` from `t0` to `t_max`.
///
/// The run ends when `t_max` is reached, when the state cannot be advanced
/// inside the domain by a step longer than `h_min`, or when `monitor(y)`
/// exceeds the escape threshold.
pub fn integrate(
    f: &Rhs,
    monitor: &(dyn Fn(&[f64]) -> f64 + Sync),
    y0: &[f64],
    t0: f64,
    t_max: f64,
    ctrl: &StepControl,
) -> Result<OdeTrack> {
    if !(ctrl.h0 > 0.0 && ctrl.h_max > 0.0 && ctrl.tol > 0.0 && ctrl.h_min > 0.0) {
        return Err(GeomError::Integration(
            "step control values must be positive".into(),
        ));
    }
    let mut k1 = eval(f, t0, y0).ok_or_else(|| {
        GeomError::Integration(format!("initial state {y0:?} is outside the domain"))
    })?;
    let mut t = t0;
    let mut y = y0.to_vec();
    let mut track = OdeTrack {
        t: vec![t0],
        y: vec![y.clone()],
        monitor: vec![monitor(&y)],
        verdict: Verdict::Completed,
        t_end: t0,
        blowup_estimate: None,
        rejected: 0,
    };
    let mut h = ctrl.h0.min(ctrl.h_max);
    let mut steps = 0usize;
    let end_slack = 1e-12 * t_max.abs().max(1.0);
    loop {
        if t >= t_max - end_slack {
            track.verdict = Verdict::Completed;
            break;
        }
        steps += 1;
        if steps > ctrl.max_steps {
            return Err(GeomError::Integration(format!(
                "step limit {} reached at t = {t}",
                ctrl.max_steps
            )));
        }
        let h_try = h.min(t_max - t);
        let attempt = if ctrl.fixed {
            rk4(f, t, &y, &k1, h_try).map(|y1| (y1, 0.0))
        } else {
            rk4(f, t, &y, &k1, h_try).and_then(|full| {
                let mid = rk4(f, t, &y, &k1, h_try / 2.0)?;
                let kmid = eval(f, t + h_try / 2.0, &mid)?;
                let half = rk4(f, t + h_try / 2.0, &mid, &kmid, h_try / 2.0)?;
                let err = half
                    .iter()
                    .zip(&full)
                    .map(|(a, b)| (a - b).abs() / 15.0 / a.abs().max(1.0))
                    .fold(0.0f64, f64::max);
                let extrapolated: Vec<f64> = half
                    .iter()
                    .zip(&full)
                    .map(|(a, b)| a + (a - b) / 15.0)
                    .collect();
                Some((extrapolated, err))
            })
        };
        let accepted = attempt.and_then(|(y1, err)| {
            let k = eval(f, t + h_try, &y1)?;
            Some((y1, k, err))
        });
        match accepted {
            None => {
                // left the domain or produced non-finite values somewhere in the step
                if h_try < ctrl.h_min || ctrl.fixed {
                    track.verdict = Verdict::LeftDomain;
                    break;
                }
                h = h_try / 2.0;
                track.rejected += 1;
            }
            Some((_, _, err)) if err > ctrl.tol * h_try => {
                track.rejected += 1;
                h = h_try / 2.0;
                if h < 1e-15 * t.abs().max(1.0) {
                    let last = *track.monitor.last().expect("nonempty");
                    if last > ctrl.escape.sqrt() {
                        track.verdict = Verdict::BlowUp;
                        break;
                    }
                    return Err(GeomError::Integration(format!(
                        "step size underflow at t = {t}"
                    )));
                }
            }
            Some((y1, k, err)) => {
                t += h_try;
                y = y1;
                k1 = k;
                let mon = monitor(&y);
                track.t.push(t);
                track.y.push(y.clone());
                track.monitor.push(mon);
                if !(mon <= ctrl.escape) {
                    track.verdict = Verdict::BlowUp;
                    break;
                }
                if !ctrl.fixed && err < ctrl.tol * h_try / 32.0 {
                    h = (h * 2.0).min(ctrl.h_max);
                }
            }
        }
    }
    track.t_end = t;
    if track.verdict == Verdict::BlowUp {
        track.blowup_estimate = estimate_blowup(&track.t, &track.monitor);
    }
    Ok(track)
}

/// Fit `1/m(t) = a + b t` over the last decade of growth of `m` and return the
/// root `-a/b`, the time where a `c/(t* - t)` singularity would sit. The
/// window widens by further decades while it holds fewer than four points.
pub fn estimate_blowup(t: &[f64], monitor: &[f64]) -> Option<f64> {
    let last = *monitor.last()?;
    if !(last.is_finite() && last > 0.0) {
        return None;
    }
    let mut factor = 10.0;
    let pts: Vec<(f64, f64)> = loop {
        let start = monitor
            .iter()
            .rposition(|m| !(*m >= last / factor))
            .map_or(0, |i| i + 1);
        if t.len() - start >= 4 || start == 0 || factor >= 1e4 {
            break (start..t.len()).map(|i| (t[i], 1.0 / monitor[i])).collect();
        }
        factor *= 10.0;
    };
    if pts.len() < 3 {
        return None;
    }
    let n = pts.len() as f64;
    let (sx, sy) = pts.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x, b + y));
    let (mx, my) = (sx / n, sy / n);
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (x, y) in &pts {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
    }
    if sxx == 0.0 {
        return None;
    }
    let b = sxy / sxx;
    let a = my - b * mx;
    (b < 0.0).then(|| -a / b)
}

/// Three-point derivative on a nonuniform grid; one-sided at the ends.
pub fn derivative(t: &[f64], y: &[f64]) -> Vec<f64> {
    let n = t.len();
    assert_eq!(n, y.len());
    if n < 3 {
        return vec![
            if n == 2 {
                (y[1] - y[0]) / (t[1] - t[0])
            } else {
                0.0
            };
            n
        ];
    }
    let three = |i0: usize, at: usize| {
        let (t0, t1, t2) = (t[i0], t[i0 + 1], t[i0 + 2]);
        let x = t[at];
        // derivative of the interpolating parabola
        let l0 = ((x - t1) + (x - t2)) / ((t0 - t1) * (t0 - t2));
        let l1 = ((x - t0) + (x - t2)) / ((t1 - t0) * (t1 - t2));
        let l2 = ((x - t0) + (x - t1)) / ((t2 - t0) * (t2 - t1));
        l0 * y[i0] + l1 * y[i0 + 1] + l2 * y[i0 + 2]
    };
    (0..n)
        .map(|i| match i {
            0 => three(0, 0),
            i if i == n - 1 => three(n - 3, n - 1),
            i => three(i - 1, i),
        })
        .collect()
}
