//! Subcommand drivers and the combined verification suite.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::atp::{self, CausalClass, ConstancyOutcome};
use crate::chart::ScalarField;
use crate::config::{Resolved, RunConfig, Tolerances};
use crate::conformal::{self, ConformalPair, MainIdentityResiduals, RANDOM_DIRECTIONS};
use crate::curvature::{divergence, Curvature};
use crate::error::{GeomError, Result};
use crate::fields::VectorField;
use crate::flows::{self, Forcing};
use crate::jets::Point;
use crate::metric::{self, builtin_expectation, builtin_metric, MetricField};
use crate::ode::{StepControl, Verdict};
use crate::report::{Check, Report};
use crate::tensor::max_abs;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Curvature,
    Conformal,
    Atp,
    Flow,
    ReportAll,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Curvature => "curvature",
            Command::Conformal => "conformal",
            Command::Atp => "atp",
            Command::Flow => "flow",
            Command::ReportAll => "report-all",
        }
    }
}

/// Runs `command` on a configuration. Errors are configuration problems;
/// failed checks are reported in the returned report.
pub fn run(command: Command, cfg: &RunConfig) -> Result<Report> {
    if command == Command::ReportAll {
        let mut rep = report_all(cfg.seed)?;
        rep.config = Some(cfg.to_value());
        return Ok(rep);
    }
    let r = cfg.resolve()?;
    let mut rep = match command {
        Command::Curvature => cmd_curvature(&r)?,
        Command::Conformal => cmd_conformal(&r)?,
        Command::Atp => cmd_atp(&r)?,
        Command::Flow => cmd_flow(&r)?,
        Command::ReportAll => unreachable!(),
    };
    rep.config = Some(cfg.to_value());
    Ok(rep)
}

/// Largest value, with NaN winning.
fn worst(values: impl IntoIterator<Item = f64>) -> f64 {
    values.into_iter().fold(0.0, |a: f64, b: f64| {
        if a.is_nan() || b.is_nan() {
            f64::NAN
        } else {
            a.max(b)
        }
    })
}

fn per_point<T: Send>(
    points: &[Point],
    f: impl Fn(usize, &Point) -> Result<T> + Sync,
) -> Result<Vec<T>> {
    points
        .par_iter()
        .enumerate()
        .map(|(i, p)| f(i, p))
        .collect()
}

fn new_report(command: &str, r: &Resolved) -> Report {
    let mut rep = Report::new(command, r.seed, r.samples);
    for w in r.metric.chart().warnings() {
        rep.note(w);
    }
    rep
}

struct CurvatureRow {
    ricci_symmetry: f64,
    bianchi: f64,
    antisymmetry: f64,
    compatibility: f64,
    trace_identity: f64,
    riemann: f64,
    ricci: f64,
    energy: f64,
    scalar: f64,
}

fn curvature_row(g: &MetricField, x: &Point, four_pi_g: f64) -> Result<CurvatureRow> {
    g.validate_at(x)?;
    let cv = Curvature::at(g, x)?;
    let m = g.dim();
    let gscale = max_abs(&cv.metric.g).max(1.0);
    let rscale = cv.riemann.max_abs().max(1.0);
    let mut dscale = 1.0f64;
    for k in 0..m {
        for i in 0..m {
            for j in 0..m {
                dscale = dscale.max(cv.metric.dg(k, i, j).abs());
            }
        }
    }
    let id = crate::curvature::tilde_with(
        &crate::tensor::Tensor2::covariant(cv.metric.g.clone()),
        &cv.metric.inv,
    )?;
    Ok(CurvatureRow {
        ricci_symmetry: cv.ricci.asymmetry() / cv.ricci.max_abs().max(1.0),
        bianchi: cv.riemann.bianchi_residual() / rscale,
        antisymmetry: cv.riemann.antisymmetry_residual() / rscale,
        compatibility: cv.compatibility_residual() / dscale,
        trace_identity: (crate::curvature::trace_mixed(&id)? - m as f64).abs(),
        riemann: cv.riemann.max_abs() / gscale,
        ricci: cv.ricci.max_abs() / gscale,
        energy: cv.energy_tensor(four_pi_g).max_abs() / gscale,
        scalar: cv.scalar,
    })
}

/// Curvature identities at every sample, plus the known values of built-in metrics.
pub fn cmd_curvature(r: &Resolved) -> Result<Report> {
    let mut rep = new_report("curvature", r);
    let g = &r.metric;
    let pts = r.points()?;
    let rows = match per_point(&pts, |_, x| curvature_row(g, x, r.four_pi_g)) {
        Ok(rows) => rows,
        Err(e) => {
            rep.push(Check::error("evaluation", e));
            return Ok(rep);
        }
    };
    let col = |f: fn(&CurvatureRow) -> f64| worst(rows.iter().map(f));
    rep.push(Check::below(
        "ricci_symmetry",
        col(|r| r.ricci_symmetry),
        1e-10,
    ));
    rep.push(Check::below("first_bianchi", col(|r| r.bianchi), 1e-9));
    rep.push(Check::below(
        "riemann_antisymmetry",
        col(|r| r.antisymmetry),
        1e-10,
    ));
    rep.push(Check::below(
        "metric_compatibility",
        col(|r| r.compatibility),
        1e-10,
    ));
    rep.push(Check::below(
        "trace_tilde_g",
        col(|r| r.trace_identity),
        1e-12,
    ));
    let sc_min = rows.iter().map(|r| r.scalar).fold(f64::INFINITY, f64::min);
    let sc_max = rows
        .iter()
        .map(|r| r.scalar)
        .fold(f64::NEG_INFINITY, f64::max);
    rep.note(format!(
        "max |Riemann| {:.3e}, max |Ric| {:.3e}, max |T| {:.3e} (relative to max(1, |g|)); Sc in [{sc_min:.9}, {sc_max:.9}]",
        col(|r| r.riemann),
        col(|r| r.ricci),
        col(|r| r.energy)
    ));
    if let Some(exp) = builtin_expectation(g.name()) {
        let t = r.tolerances;
        if exp.flat {
            rep.push(Check::below(
                "riemann_vanishes",
                col(|r| r.riemann),
                t.algebraic,
            ));
        }
        if exp.ricci_flat {
            rep.push(Check::below("ricci_vanishes", col(|r| r.ricci), t.two_path));
            rep.push(Check::below(
                "energy_tensor_vanishes",
                col(|r| r.energy),
                t.two_path,
            ));
        }
        if let Some(sc) = exp.scalar_curvature {
            let dev = worst(rows.iter().map(|r| (r.scalar - sc).abs()));
            rep.push(
                Check::below("scalar_curvature", dev, t.two_path)
                    .with_detail(format!("expected {sc}")),
            );
        }
    }
    Ok(rep)
}

fn main_identity_checks(
    rep: &mut Report,
    prefix: &str,
    pair: &ConformalPair,
    pts: &[Point],
    tol: f64,
) {
    match per_point(pts, |_, x| conformal::verify_main_identity(pair, x)) {
        Ok(rows) => {
            let all = rows.into_iter().fold(
                MainIdentityResiduals::zero(),
                MainIdentityResiduals::combine,
            );
            for (name, v) in MainIdentityResiduals::NAMES.iter().zip(all.values()) {
                rep.push(Check::below(format!("{prefix}{name}"), v, tol));
            }
        }
        Err(e) => rep.push(Check::error(format!("{prefix}main_identity"), e)),
    }
}

/// Connection difference and Ricci-comparison chain for `e^{2 sigma} g`.
pub fn cmd_conformal(r: &Resolved) -> Result<Report> {
    let mut rep = new_report("conformal", r);
    let pair = r.pair()?;
    pair.sigma()?;
    let pts = r.points()?;
    let t = r.tolerances;
    if pair.a.components().is_some() {
        match per_point(&pts, |_, x| pair.gradient_consistency(x)) {
            Ok(v) => rep.push(Check::below("A_is_grad_sigma", worst(v), 1e-9)),
            Err(e) => rep.push(Check::error("A_is_grad_sigma", e)),
        }
    }
    match per_point(&pts, |i, x| {
        conformal::conformal_connection_check(
            &pair,
            x,
            RANDOM_DIRECTIONS,
            r.seed.wrapping_add(i as u64),
        )
    }) {
        Ok(v) => rep.push(Check::below("connection_difference", worst(v), t.algebraic)),
        Err(e) => rep.push(Check::error("connection_difference", e)),
    }
    if pair.dim() >= 3 {
        main_identity_checks(&mut rep, "", &pair, &pts, t.two_path);
    } else {
        rep.note("Ricci-comparison identities need dimension at least 3 and were not evaluated");
    }
    rep.push(Check::below(
        "pure_algebra",
        conformal::algebraic_consistency(&[3, 4, 5], 100, r.seed),
        1e-12,
    ));
    Ok(rep)
}

/// Atypical-field residual, causal uniformity, closedness, recovery and obstructions.
pub fn cmd_atp(r: &Resolved) -> Result<Report> {
    let mut rep = new_report("atp", r);
    let g = &r.metric;
    let a = r.field();
    if r.a.is_none() {
        rep.note("no field given; checking A = 0");
    } else if r.a.as_ref().is_some_and(|a| a.components().is_none()) {
        rep.note("A is the gradient of sigma");
    }
    let pts = r.points()?;
    let t = r.tolerances;
    let an = match atp::analyze(g, &a, &pts, atp::NULL_REL_TOL) {
        Ok(an) => an,
        Err(e) => {
            rep.push(Check::error("atp_residual", e));
            return Ok(rep);
        }
    };
    rep.push(Check::below("atp_residual", an.max_residual, t.algebraic));
    let tally = an.causal_tally;
    rep.note(format!(
        "causal tally: spacelike {}, timelike {}, null {}, zero {}",
        tally.spacelike, tally.timelike, tally.null, tally.zero
    ));
    match atp::constancy_scan(&an, t.algebraic) {
        ConstancyOutcome::Refused { max_residual } => {
            rep.note(format!(
                "field is not atypical (residual {max_residual:.3e}); constancy, closedness and recovery checks not run"
            ));
            return Ok(rep);
        }
        ConstancyOutcome::Uniform { class } => {
            rep.push(
                Check::flag("causal_class_uniform", true).with_detail(format!(
                    "{} at every sample; consistent with global constancy",
                    class.name()
                )),
            );
        }
        ConstancyOutcome::Mixed { violations, .. } => {
            rep.push(
                Check::flag("causal_class_uniform", false).with_detail(format!(
                    "{} samples differ from the majority class, first at {:?}",
                    violations.len(),
                    violations.first()
                )),
            );
        }
    }
    if let Some(d) = atp::locally_metric_check(&an, t.algebraic) {
        rep.push(Check::below("d_alpha", d, t.algebraic));
    }
    rep.push(Check::below(
        "obstruction_R(X,Y)A",
        an.obstruction_max.0,
        1e-7,
    ));
    rep.push(Check::below(
        "obstruction_Ric(X,A)",
        an.obstruction_max.1,
        1e-7,
    ));
    if tally.zero < tally.total() {
        rep.push(Check::below(
            "ricci_degenerate",
            an.ricci_min_singular_max,
            1e-7,
        ));
    }
    match tally.uniform() {
        Some(CausalClass::Spacelike | CausalClass::Timelike) if a.components().is_some() => {
            match atp::recovered_sigma_field(g, &a).and_then(|sigma| {
                per_point(&pts, |_, x| {
                    Ok((
                        atp::recovery_gradient_residual(g, &a, &sigma, x)?,
                        atp::ricci_round_trip(g, &sigma, x)?,
                    ))
                })
            }) {
                Ok(rows) => {
                    rep.push(Check::below(
                        "sigma_recovery_gradient",
                        worst(rows.iter().map(|r| r.0)),
                        1e-7,
                    ));
                    rep.push(Check::below(
                        "sigma_recovery_ricci",
                        worst(rows.iter().map(|r| r.1)),
                        t.two_path,
                    ));
                }
                Err(e) => rep.push(Check::error("sigma_recovery", e)),
            }
        }
        Some(CausalClass::Spacelike | CausalClass::Timelike) => {
            rep.note("sigma recovery needs explicit components of A");
        }
        _ => {}
    }
    Ok(rep)
}

fn pregeodesic_checks(
    rep: &mut Report,
    prefix: &str,
    g: &MetricField,
    a: &VectorField,
    x0: &Point,
    t_max: f64,
    ctrl: &StepControl,
    t: &Tolerances,
) {
    let run = match flows::integrate_pregeodesic_a(g, a, x0, t_max, ctrl) {
        Ok(run) => run,
        Err(e) => {
            rep.push(Check::error(format!("{prefix}integration"), e));
            return;
        }
    };
    let ts = run.forward_t_star;
    rep.push(
        Check::below(
            format!("{prefix}f_closed_form"),
            run.closed_form_error(0.9 * ts),
            t.two_path,
        )
        .with_detail(format!(
            "eps {}, f0 {}, predicted t* {}",
            run.eps, run.f0, run.predicted_t_star
        )),
    );
    rep.push(Check::near(
        format!("{prefix}termination"),
        run.trajectory.t_end,
        ts,
        0.01,
    ));
    match run.blowup_estimate {
        Some(est) => rep.push(Check::near(
            format!("{prefix}blowup_estimate"),
            est,
            ts,
            t.blowup,
        )),
        None => rep.push(
            Check::flag(format!("{prefix}blowup_estimate"), false)
                .with_detail("no blow-up detected"),
        ),
    }
    rep.push(Check::below(
        format!("{prefix}U(f)/f^2"),
        run.uf_residual(),
        t.two_path,
    ));
    rep.push(Check::below(
        format!("{prefix}tangent_to_A"),
        run.tangency,
        t.two_path,
    ));
}

fn null_checks(rep: &mut Report, alphas: &[f64], eps: f64, ctrl: &StepControl, t: &Tolerances) {
    let runs: Vec<_> = alphas
        .par_iter()
        .map(|&al| (al, flows::null_coefficient_ode(al, eps, 10.0, ctrl)))
        .collect();
    for (al, run) in runs {
        let name = format!("null_ode[alpha={al}]");
        match run {
            Err(e) => rep.push(Check::error(name, e)),
            Ok(run) => match run.predicted {
                Some(p) => {
                    rep.push(match run.run.t_esc() {
                        Some(te) => Check::near(format!("{name}/blowup"), te, p, t.blowup),
                        None => Check::flag(format!("{name}/blowup"), false)
                            .with_detail("no blow-up detected"),
                    });
                    rep.push(Check::below(
                        format!("{name}/closed_form"),
                        run.closed_form_error,
                        t.two_path,
                    ));
                }
                None => {
                    if eps * al == 0.0 {
                        let ok = run.run.verdict == Verdict::Completed
                            && run.run.y.iter().all(|y| *y == 0.0);
                        rep.push(Check::flag(format!("{name}/parallel"), ok));
                    } else {
                        rep.push(Check::below(
                            format!("{name}/closed_form"),
                            run.closed_form_error,
                            t.two_path,
                        ));
                    }
                }
            },
        }
    }
}

fn riccati_t_max(y0: f64) -> f64 {
    2.0 / y0 + 1.0
}

fn riccati_random_checks(
    rep: &mut Report,
    count: usize,
    y0s: &[f64],
    seed: u64,
    ctrl: &StepControl,
    t: &Tolerances,
) {
    let forcings = flows::seeded_forcings(count, seed);
    let cases: Vec<(&Forcing, f64)> = forcings
        .iter()
        .flat_map(|f| y0s.iter().map(move |y| (f, *y)))
        .collect();
    let results: Vec<_> = cases
        .par_iter()
        .map(|(f, y0)| {
            (
                f.source.clone(),
                *y0,
                flows::riccati_blowup(f, *y0, riccati_t_max(*y0), ctrl, false),
            )
        })
        .collect();
    let mut late = Vec::new();
    let mut dominance = 0.0f64;
    let mut errors = Vec::new();
    for (src, y0, res) in results {
        match res {
            Ok(run) => {
                match run.t_esc() {
                    Some(te) if te < run.bound => {}
                    other => late.push(format!("f = {src}, y0 = {y0}: t_esc {other:?}")),
                }
                dominance = worst([dominance, run.dominance_violation]);
            }
            Err(e) => errors.push(format!("f = {src}, y0 = {y0}: {e}")),
        }
    }
    let n = cases.len();
    rep.push(
        Check::flag(
            "riccati_random/escape_before_bound",
            late.is_empty() && errors.is_empty(),
        )
        .with_detail(
            std::iter::once(format!(
                "{} of {n} cases escape before 2/y0",
                n - late.len() - errors.len()
            ))
            .chain(late.iter().cloned())
            .collect::<Vec<_>>()
            .join("; "),
        ),
    );
    let mut check = Check::below(
        "riccati_random/dominates_comparison",
        if errors.is_empty() {
            dominance
        } else {
            f64::INFINITY
        },
        t.algebraic,
    );
    if !errors.is_empty() {
        check = check.with_detail(errors.join("; "));
    }
    rep.push(check);
}

/// Geodesic, pregeodesic, coefficient and scalar blow-up checks.
pub fn cmd_flow(r: &Resolved) -> Result<Report> {
    let mut rep = new_report("flow", r);
    let g = &r.metric;
    let fl = &r.flow;
    let t = r.tolerances;
    let ctrl = fl.step;
    let chart = g.chart();

    let geodesics: Vec<(Point, DVector<f64>, f64)> = if fl.geodesics.is_empty() {
        let x0 = r.points()?.remove(0);
        let mut rng = ChaCha8Rng::seed_from_u64(r.seed);
        let v0 = DVector::from_fn(g.dim(), |_, _| rng.gen_range(-0.5..0.5));
        vec![(x0, v0, 1.0)]
    } else {
        fl.geodesics
            .iter()
            .map(|s| {
                (
                    chart.point(s.x0.clone()),
                    DVector::from_vec(s.v0.clone()),
                    s.t_max,
                )
            })
            .collect()
    };
    for (i, (x0, v0, t_max)) in geodesics.iter().enumerate() {
        let name = format!("geodesic[{i}]/norm_conserved");
        match flows::integrate_geodesic(g, x0, v0, *t_max, &ctrl)
            .and_then(|tr| Ok((tr.norm_drift(g)?, tr)))
        {
            Ok((drift, tr)) => {
                rep.push(Check::below(name, drift, t.two_path).with_detail(format!(
                    "verdict {}, t_end {}",
                    tr.verdict.name(),
                    tr.t_end
                )))
            }
            Err(e) => rep.push(Check::error(name, e)),
        }
    }

    if !fl.pregeodesic_from.is_empty() {
        let a =
            r.a.clone()
                .ok_or_else(|| GeomError::Precondition("pregeodesic runs need a field A".into()))?;
        for (i, x0) in fl.pregeodesic_from.iter().enumerate() {
            pregeodesic_checks(
                &mut rep,
                &format!("pregeodesic[{i}]/"),
                g,
                &a,
                &chart.point(x0.clone()),
                fl.pregeodesic_t_max,
                &ctrl,
                &t,
            );
        }
    }

    if !fl.coefficient.is_empty() {
        let a = r.field();
        let fine = ctrl.with_h_max(1e-3);
        for (i, s) in fl.coefficient.iter().enumerate() {
            let prefix = format!("coefficient[{i}]/");
            let x0 = chart.point(s.x0.clone());
            match flows::frame_run(g, &x0, &DVector::from_vec(s.v0.clone()), s.t_max, &fine)
                .and_then(|run| {
                    Ok((
                        run.orthonormality_drift(g)?,
                        flows::coefficient_ode_timelike(g, &a, &run)?,
                    ))
                }) {
                Ok((drift, c)) => {
                    rep.push(Check::below(
                        format!("{prefix}frame_orthonormal"),
                        drift,
                        1e-7,
                    ));
                    rep.push(
                        Check::below(format!("{prefix}ode_residual"), c.residual, t.trajectory)
                            .with_detail(format!(
                                "eps0 {}, f in [{:.6e}, {:.6e}]",
                                c.eps0, c.f_min, c.f_max
                            )),
                    );
                    if g.signature().lorentz_time_sign() == Some(c.eps0) {
                        if c.f_min.abs().max(c.f_max.abs()) < 1e-12 {
                            rep.note(format!(
                                "coefficient[{i}]: A is tangent to the geodesic, forcing vanishes"
                            ));
                        } else {
                            rep.push(
                                Check::flag(format!("{prefix}forcing_positive"), c.f_min > 0.0)
                                    .with_detail(format!("min f {:.6e}", c.f_min)),
                            );
                        }
                    }
                }
                Err(e) => rep.push(Check::error(format!("{prefix}ode_residual"), e)),
            }
        }
    }

    null_checks(&mut rep, &fl.null_alphas, fl.null_eps, &ctrl, &t);

    for (i, spec) in fl.riccati.iter().enumerate() {
        let name = format!("riccati[{i}]");
        let run = Forcing::parse(&spec.f).and_then(|f| {
            flows::riccati_blowup(&f, spec.y0, riccati_t_max(spec.y0), &ctrl, spec.oracle)
        });
        match run {
            Err(e) => rep.push(Check::error(name, e)),
            Ok(run) => {
                let te = run.t_esc();
                if let Some(want) = spec.expect {
                    rep.push(match te {
                        Some(te) => Check::near(format!("{name}/t_esc"), te, want, t.blowup),
                        None => Check::flag(format!("{name}/t_esc"), false)
                            .with_detail("no blow-up detected"),
                    });
                }
                if !spec.oracle {
                    rep.push(
                        Check::flag(
                            format!("{name}/before_bound"),
                            te.is_some_and(|te| te < run.bound),
                        )
                        .with_detail(format!(
                            "f = {}, y0 = {}, t_esc {te:?}, bound {}",
                            spec.f, spec.y0, run.bound
                        )),
                    );
                }
                rep.push(Check::below(
                    format!("{name}/dominates_comparison"),
                    run.dominance_violation,
                    t.algebraic,
                ));
            }
        }
    }
    if fl.riccati_random > 0 {
        riccati_random_checks(
            &mut rep,
            fl.riccati_random,
            &fl.riccati_y0,
            r.seed,
            &ctrl,
            &t,
        );
    }

    // halving the base step moves the estimate by less than a tenth of the tolerance
    let unit = Forcing::parse("1")?;
    let a = flows::riccati_blowup(&unit, 1.0, 3.0, &ctrl, false)?.t_esc();
    let b = flows::riccati_blowup(&unit, 1.0, 3.0, &ctrl.halved(), false)?.t_esc();
    match (a, b) {
        (Some(a), Some(b)) => rep.push(Check::below(
            "step_halving_convergence",
            (a - b).abs(),
            0.1 * t.blowup,
        )),
        _ => rep.push(
            Check::flag("step_halving_convergence", false).with_detail("no blow-up detected"),
        ),
    }
    Ok(rep)
}

fn resolved_builtin(name: &str, samples: usize, seed: u64) -> Result<Resolved> {
    RunConfig {
        metric: crate::config::MetricSpec::Builtin(format!("builtin:{name}")),
        samples,
        seed,
        ..RunConfig::default()
    }
    .resolve()
}

fn radial_field(g: &MetricField) -> Result<VectorField> {
    let comps: Vec<&str> = std::iter::once("-2/rho")
        .chain(std::iter::repeat("0").take(g.dim() - 1))
        .collect();
    VectorField::parse(g.chart(), &comps)
}

/// Flat and Ricci-flat built-ins.
pub fn group_flatness(seed: u64) -> Result<Report> {
    let mut rep = Report::new("flatness", seed, 200);
    for name in [
        "minkowski2",
        "minkowski3",
        "minkowski4",
        "hyperbolic_polar2",
    ] {
        let r = resolved_builtin(name, 200, seed)?;
        let rows = per_point(&r.points()?, |_, x| curvature_row(&r.metric, x, 1.0))?;
        rep.push(Check::below(
            format!("{name}/riemann"),
            worst(rows.iter().map(|r| r.riemann)),
            1e-9,
        ));
        rep.push(Check::below(
            format!("{name}/ricci"),
            worst(rows.iter().map(|r| r.ricci)),
            1e-9,
        ));
        rep.push(Check::below(
            format!("{name}/energy"),
            worst(rows.iter().map(|r| r.energy)),
            1e-9,
        ));
    }
    let r = resolved_builtin("schwarzschild", 100, seed)?;
    let rows = per_point(&r.points()?, |_, x| curvature_row(&r.metric, x, 1.0))?;
    rep.push(Check::below(
        "schwarzschild/ricci",
        worst(rows.iter().map(|r| r.ricci)),
        1e-6,
    ));
    rep.push(Check::below(
        "schwarzschild/energy",
        worst(rows.iter().map(|r| r.energy)),
        1e-6,
    ));
    Ok(rep)
}

/// Two-path Ricci comparison on Minkowski space.
pub fn group_conformal(seed: u64) -> Result<Report> {
    let mut rep = Report::new("conformal", seed, 50);
    for (name, sigma) in [("minkowski3", "0.3*x"), ("minkowski4", "0.1*(x^2 - t)")] {
        let g = builtin_metric(name)?;
        let pair = ConformalPair::from_sigma(&g, &ScalarField::parse(g.chart(), sigma)?)?;
        let pts = g.chart().sample(50, seed)?;
        main_identity_checks(
            &mut rep,
            &format!("{name}[sigma={sigma}]/"),
            &pair,
            &pts,
            1e-6,
        );
    }
    rep.push(Check::below(
        "pure_algebra",
        conformal::algebraic_consistency(&[3, 4, 5], 200, seed),
        1e-12,
    ));
    Ok(rep)
}

/// The two-dimensional atypical field and the inversion.
pub fn group_radial_plane(seed: u64) -> Result<Report> {
    let mut rep = Report::new("radial_plane", seed, 100);
    let g = builtin_metric("hyperbolic_polar2")?;
    let a = radial_field(&g)?;
    let iota = metric::inversion_map()?;
    let pts = g.chart().sample(100, seed)?;
    let rows = per_point(&pts, |_, x| {
        let rho = x.coords[0];
        let fj = a.eval(&g, x)?;
        let n_want = 4.0 / (rho * rho);
        let pulled = metric::pullback_metric(&iota, &g, x)?.comps;
        let want = g.matrix(x)? * rho.powi(-4);
        Ok([
            atp::atp_residual(&g, &a, x)?,
            divergence(&g, &a, x)?.abs(),
            (fj.norm2() - n_want).abs() / n_want.max(1.0),
            (&fj.dalpha - fj.dalpha.transpose()).amax(),
            max_abs(&(&pulled - &want)) / max_abs(&want).max(1.0),
        ])
    })?;
    let col = |k: usize| worst(rows.iter().map(|r| r[k]));
    rep.push(Check::below("atp_residual", col(0), 1e-10));
    rep.push(Check::below("div_A", col(1), 1e-10));
    rep.push(Check::below("norm_4/rho^2", col(2), 1e-10));
    rep.push(Check::below("d_alpha", col(3), 1e-12));
    rep.push(Check::below("inversion_pullback", col(4), 1e-9));
    Ok(rep)
}

/// `Phi^* h` against `c eta` on the Minkowski wedge. Returns the largest
/// relative residual for `c = -1` (the homothety class) and for `c = 1`.
pub fn cone_pullback_residuals(seed: u64, samples: usize) -> Result<(f64, f64)> {
    let phi = metric::hyperboloid_polar_map()?;
    let h = builtin_metric("cone3")?;
    let eta = DMatrix::from_diagonal(&nalgebra::dvector![-1.0, 1.0, 1.0]);
    let pts = phi.source.sample(samples, seed)?;
    let rows = per_point(&pts, |_, x| {
        let p = metric::pullback_metric(&phi, &h, x)?.comps;
        Ok((max_abs(&(&p + &eta)), max_abs(&(&p - &eta))))
    })?;
    Ok((
        worst(rows.iter().map(|r| r.0)),
        worst(rows.iter().map(|r| r.1)),
    ))
}

/// The cone: Ricci-flatness, the atypical field, obstructions and the isometry.
pub fn group_radial_cone(seed: u64) -> Result<Report> {
    let mut rep = Report::new("radial_cone", seed, 100);
    let g = builtin_metric("cone3")?;
    let a = radial_field(&g)?;
    let pts = g.chart().sample(100, seed)?;
    let rows = per_point(&pts, |_, x| {
        let cv = Curvature::at(&g, x)?;
        let (o1, o2) = atp::obstruction_check(&g, &a, x)?;
        Ok([cv.ricci.max_abs(), atp::atp_residual(&g, &a, x)?, o1, o2])
    })?;
    let col = |k: usize| worst(rows.iter().map(|r| r[k]));
    rep.push(Check::below("ricci_flat", col(0), 1e-8));
    rep.push(Check::below("atp_residual", col(1), 1e-8));
    rep.push(Check::below("obstruction_R(X,Y)A", col(2), 1e-7));
    rep.push(Check::below("obstruction_Ric(X,A)", col(3), 1e-7));
    let (homothetic, literal) = cone_pullback_residuals(seed, 100)?;
    rep.push(
        Check::below("hyperboloid_pullback", homothetic, 1e-9).with_detail(format!(
            "equal to -eta, a homothety of eta; literal |Phi*h - eta| = {literal:.6}"
        )),
    );
    Ok(rep)
}

/// `sigma = log|<A,A>|` reproduces `A` and leaves Ricci unchanged.
pub fn group_sigma_recovery(seed: u64) -> Result<Report> {
    let mut rep = Report::new("sigma_recovery", seed, 100);
    let g = builtin_metric("hyperbolic_polar2")?;
    let a = radial_field(&g)?;
    let sigma = atp::recovered_sigma_field(&g, &a)?;
    let pts = g.chart().sample(100, seed)?;
    let rows = per_point(&pts, |_, x| {
        Ok((
            atp::recovery_gradient_residual(&g, &a, &sigma, x)?,
            atp::ricci_round_trip(&g, &sigma, x)?,
        ))
    })?;
    rep.push(Check::below(
        "grad_sigma_equals_A",
        worst(rows.iter().map(|r| r.0)),
        1e-7,
    ));
    rep.push(Check::below(
        "ricci_unchanged",
        worst(rows.iter().map(|r| r.1)),
        1e-6,
    ));
    let x1 = g.chart().point(vec![1.0, 0.0]);
    rep.push(Check::near(
        "sigma_at_rho_1",
        atp::recover_sigma(&g, &a, &x1)?,
        4f64.ln(),
        1e-12,
    ));
    Ok(rep)
}

/// Integral curves of the atypical field run into `f = infinity` in finite time.
pub fn group_pregeodesic(seed: u64) -> Result<Report> {
    let mut rep = Report::new("pregeodesic", seed, 2);
    let g = builtin_metric("hyperbolic_polar2")?;
    let a = radial_field(&g)?;
    let t = Tolerances::default();
    for rho0 in [1.0, 2.0] {
        pregeodesic_checks(
            &mut rep,
            &format!("rho0={rho0}/"),
            &g,
            &a,
            &g.chart().point(vec![rho0, 0.0]),
            10.0,
            &StepControl::default(),
            &t,
        );
    }
    Ok(rep)
}

pub fn group_null_ode(seed: u64) -> Result<Report> {
    let mut rep = Report::new("null_ode", seed, 4);
    null_checks(
        &mut rep,
        &[0.0, 0.5, 1.0, 2.0],
        1.0,
        &StepControl::default(),
        &Tolerances::default(),
    );
    Ok(rep)
}

pub fn group_riccati(seed: u64) -> Result<Report> {
    let mut rep = Report::new("riccati", seed, 61);
    let ctrl = StepControl::default();
    let unit = flows::riccati_blowup(&Forcing::parse("1")?, 1.0, 3.0, &ctrl, false)?;
    match unit.t_esc() {
        Some(te) => rep.push(Check::near(
            "unit_forcing/t_esc",
            te,
            flows::riccati_unit_blowup(),
            0.005,
        )),
        None => rep.push(Check::flag("unit_forcing/t_esc", false)),
    }
    rep.push(Check::flag(
        "unit_forcing/before_bound",
        unit.t_esc().is_some_and(|te| te < 2.0),
    ));
    riccati_random_checks(
        &mut rep,
        20,
        &[0.5, 1.0, 2.0],
        seed,
        &ctrl,
        &Tolerances::default(),
    );
    Ok(rep)
}

pub const GROUPS: [(&str, fn(u64) -> Result<Report>); 8] = [
    ("1-flatness", group_flatness),
    ("2-conformal", group_conformal),
    ("3-radial-plane", group_radial_plane),
    ("4-radial-cone", group_radial_cone),
    ("5-sigma-recovery", group_sigma_recovery),
    ("6-pregeodesic", group_pregeodesic),
    ("7-null-ode", group_null_ode),
    ("8-riccati", group_riccati),
];

/// Every group in one report; the last entry reruns two groups and compares
/// their JSON.
pub fn report_all(seed: u64) -> Result<Report> {
    let reports = GROUPS
        .par_iter()
        .map(|(name, f)| f(seed).map(|r| (*name, r)))
        .collect::<Result<Vec<_>>>()?;
    let mut rep = Report::new("report-all", seed, 0);
    for (name, r) in reports {
        rep.samples += r.samples;
        rep.absorb(name, r);
    }
    let again = group_radial_plane(seed)?.to_json() == group_radial_plane(seed)?.to_json()
        && group_null_ode(seed)?.to_json() == group_null_ode(seed)?.to_json();
    rep.push(Check::flag("9-determinism/rerun_identical", again));
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(src: &str) -> RunConfig {
        RunConfig::from_json(src).unwrap()
    }

    #[test]
    fn curvature_command() {
        for m in ["minkowski4", "schwarzschild", "sphere3"] {
            let rep = run(
                Command::Curvature,
                &cfg(&format!(r#"{{"metric": "builtin:{m}", "samples": 10}}"#)),
            )
            .unwrap();
            assert!(rep.pass, "{}", rep.table());
        }
    }

    #[test]
    fn conformal_command() {
        let rep = run(
            Command::Conformal,
            &cfg(
                r#"{"metric": "builtin:minkowski3", "fields": {"sigma": "0.3*x"}, "samples": 10}"#,
            ),
        )
        .unwrap();
        assert!(rep.pass, "{}", rep.table());
        let rep = run(
            Command::Conformal,
            &cfg(r#"{"metric": "builtin:hyperbolic_polar2", "fields": {"A": ["-2/rho", "0"], "sigma": "-2*log(rho)"}, "samples": 10}"#),
        )
        .unwrap();
        assert!(rep.pass, "{}", rep.table());
        assert!(rep.notes.iter().any(|n| n.contains("dimension")));
        let rep = run(
            Command::Conformal,
            &cfg(r#"{"metric": "builtin:cone3", "samples": 5}"#),
        )
        .unwrap();
        assert!(rep.pass);
        assert!(rep
            .checks
            .iter()
            .all(|c| c.residual == 0.0 || c.name == "pure_algebra"));
    }

    #[test]
    fn atp_command() {
        let rep = run(Command::Atp, &cfg(r#"{"metric": "builtin:hyperbolic_polar2", "fields": {"A": ["-2/rho", "0"]}, "samples": 20}"#)).unwrap();
        assert!(rep.pass, "{}", rep.table());
        assert!(rep.checks.iter().any(|c| c
            .detail
            .as_deref()
            .is_some_and(|d| d.starts_with("spacelike"))));
        let rep = run(Command::Atp, &cfg(r#"{"metric": "builtin:hyperbolic_polar2", "fields": {"A": ["rho", "0"]}, "samples": 20}"#)).unwrap();
        assert!(!rep.pass);
        assert!(rep.checks[0].residual > 0.1);
        let rep = run(
            Command::Atp,
            &cfg(r#"{"metric": "builtin:cone3", "samples": 20}"#),
        )
        .unwrap();
        assert!(rep.pass, "{}", rep.table());
    }

    #[test]
    fn flow_command() {
        let rep = run(
            Command::Flow,
            &cfg(r#"{"metric": "builtin:hyperbolic_polar2", "fields": {"A": ["-2/rho", "0"]}, "samples": 5,
                     "flow": {"pregeodesic_from": [[1.0, 0.0]], "riccati_random": 3}}"#),
        )
        .unwrap();
        assert!(rep.pass, "{}", rep.table());
    }

    #[test]
    fn missing_sigma_is_a_config_error() {
        let c = cfg(r#"{"metric": "builtin:hyperbolic_polar2", "fields": {"A": ["-2/rho", "0"]}}"#);
        assert!(matches!(
            run(Command::Conformal, &c),
            Err(GeomError::MissingSigma)
        ));
    }
}
