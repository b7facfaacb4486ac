//! Run configuration: JSON file plus command-line overrides.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::chart::{Chart, ScalarField, DEFAULT_SEED};
use crate::conformal::ConformalPair;
use crate::error::{GeomError, Result};
use crate::fields::VectorField;
use crate::jets::Point;
use crate::metric::{builtin_metric, MetricField};
use crate::ode::StepControl;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Pointwise identities of the curvature algebra.
    pub algebraic: f64,
    /// Comparisons between two independent computation paths.
    pub two_path: f64,
    /// Trajectory-level quantities.
    pub trajectory: f64,
    /// Blow-up times.
    pub blowup: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            algebraic: 1e-8,
            two_path: 1e-6,
            trajectory: 1e-4,
            blowup: 0.005,
        }
    }
}

impl Tolerances {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("algebraic", self.algebraic),
            ("two_path", self.two_path),
            ("trajectory", self.trajectory),
            ("blowup", self.blowup),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(GeomError::Precondition(format!(
                    "tolerance {name} must be positive, got {v}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChartSpec {
    #[serde(default)]
    pub id: Option<String>,
    pub coords: Vec<String>,
    /// Expressions that must be positive on the domain.
    #[serde(default)]
    pub domain: Vec<String>,
    #[serde(default, rename = "box")]
    pub sample_box: Option<Vec<(f64, f64)>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MetricSpec {
    /// `"builtin:NAME"`, or a bare name.
    Builtin(String),
    Components {
        components: Vec<Vec<String>>,
        signature: String,
        #[serde(default)]
        name: Option<String>,
    },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldsSpec {
    #[serde(default, rename = "A")]
    pub a: Option<Vec<String>>,
    #[serde(default)]
    pub sigma: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeodesicSpec {
    pub x0: Vec<f64>,
    pub v0: Vec<f64>,
    pub t_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RiccatiSpec {
    pub f: String,
    pub y0: f64,
    /// Known escape time, checked to the blow-up tolerance.
    #[serde(default)]
    pub expect: Option<f64>,
    /// Admit `f >= 0`.
    #[serde(default)]
    pub oracle: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FlowSpec {
    pub geodesics: Vec<GeodesicSpec>,
    /// Starting points of integral curves of `A`.
    pub pregeodesic_from: Vec<Vec<f64>>,
    pub pregeodesic_t_max: f64,
    /// Unit-speed geodesics along which the coefficient ODE is checked.
    pub coefficient: Vec<GeodesicSpec>,
    pub null_alphas: Vec<f64>,
    pub null_eps: f64,
    pub riccati: Vec<RiccatiSpec>,
    pub riccati_random: usize,
    pub riccati_y0: Vec<f64>,
    pub step: StepControl,
}

impl Default for FlowSpec {
    fn default() -> Self {
        FlowSpec {
            geodesics: Vec::new(),
            pregeodesic_from: Vec::new(),
            pregeodesic_t_max: 10.0,
            coefficient: Vec::new(),
            null_alphas: vec![0.0, 0.5, 1.0, 2.0],
            null_eps: 1.0,
            riccati: vec![
                RiccatiSpec {
                    f: "0".into(),
                    y0: 1.0,
                    expect: Some(2.0),
                    oracle: true,
                },
                RiccatiSpec {
                    f: "1".into(),
                    y0: 1.0,
                    expect: Some(crate::flows::riccati_unit_blowup()),
                    oracle: false,
                },
                RiccatiSpec {
                    f: "1 + t^2".into(),
                    y0: 1.0,
                    expect: None,
                    oracle: false,
                },
            ],
            riccati_random: 20,
            riccati_y0: vec![0.5, 1.0, 2.0],
            step: StepControl::default(),
        }
    }
}

/// The configuration file as written.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub chart: Option<ChartSpec>,
    #[serde(default = "default_metric")]
    pub metric: MetricSpec,
    #[serde(default)]
    pub fields: FieldsSpec,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default, rename = "box")]
    pub sample_box: Option<Vec<(f64, f64)>>,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default, rename = "fourpiG")]
    pub four_pi_g: Option<f64>,
    #[serde(default)]
    pub flow: Option<FlowSpec>,
}

fn default_metric() -> MetricSpec {
    MetricSpec::Builtin("builtin:minkowski4".into())
}

fn default_samples() -> usize {
    50
}

fn default_seed() -> u64 {
    DEFAULT_SEED
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            chart: None,
            metric: default_metric(),
            fields: FieldsSpec::default(),
            samples: default_samples(),
            seed: default_seed(),
            sample_box: None,
            tolerances: Tolerances::default(),
            four_pi_g: None,
            flow: None,
        }
    }
}

/// Command-line values that replace config entries.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub samples: Option<usize>,
    pub metric: Option<String>,
    pub four_pi_g: Option<f64>,
}

impl RunConfig {
    pub fn from_json(src: &str) -> Result<RunConfig> {
        serde_json::from_str(src)
            .map_err(|e| GeomError::Precondition(format!("invalid config: {e}")))
    }

    pub fn load(path: &Path) -> Result<RunConfig> {
        let src = std::fs::read_to_string(path)
            .map_err(|e| GeomError::Precondition(format!("cannot read {}: {e}", path.display())))?;
        RunConfig::from_json(&src)
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(s) = o.seed {
            self.seed = s;
        }
        if let Some(n) = o.samples {
            self.samples = n;
        }
        if let Some(m) = &o.metric {
            self.metric = MetricSpec::Builtin(m.clone());
            // a chart written for another metric no longer applies
            self.chart = None;
            self.sample_box = None;
        }
        if let Some(c) = o.four_pi_g {
            self.four_pi_g = Some(c);
        }
    }

    pub fn to_value(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("config serializes")
    }

    pub fn resolve(&self) -> Result<Resolved> {
        self.tolerances.validate()?;
        if self.samples == 0 {
            return Err(GeomError::Precondition("samples must be at least 1".into()));
        }
        let four_pi_g = self.four_pi_g.unwrap_or(1.0);
        if !(four_pi_g.is_finite() && four_pi_g != 0.0) {
            return Err(GeomError::Precondition(format!(
                "fourpiG must be finite and nonzero, got {four_pi_g}"
            )));
        }
        let chart_from_spec = |spec: &ChartSpec, default_id: &str| -> Result<Chart> {
            let sample_box = spec
                .sample_box
                .clone()
                .unwrap_or_else(|| vec![(-1.0, 1.0); spec.coords.len()]);
            Chart::from_parts(
                spec.id.clone().unwrap_or_else(|| default_id.to_string()),
                spec.coords.clone(),
                spec.domain.clone(),
                sample_box,
            )
        };
        let mut metric = match &self.metric {
            MetricSpec::Builtin(name) => {
                let name = name.strip_prefix("builtin:").unwrap_or(name);
                let g = builtin_metric(name)?;
                match &self.chart {
                    Some(spec) => {
                        let mut spec = spec.clone();
                        if spec.sample_box.is_none() {
                            spec.sample_box = Some(g.chart().sample_box().to_vec());
                        }
                        g.on_chart(chart_from_spec(&spec, g.chart().id())?)?
                    }
                    None => g,
                }
            }
            MetricSpec::Components {
                components,
                signature,
                name,
            } => {
                let spec = self.chart.as_ref().ok_or_else(|| {
                    GeomError::Precondition("a metric given by components needs a chart".into())
                })?;
                let name = name.clone().unwrap_or_else(|| "custom".to_string());
                let chart = chart_from_spec(spec, &name)?;
                MetricField::parse(name, chart, components, signature)?
            }
        };
        if let Some(b) = &self.sample_box {
            metric = metric.on_chart(metric.chart().with_box(b.clone())?)?;
        }
        let chart = metric.chart().clone();
        let sigma = self
            .fields
            .sigma
            .as_deref()
            .map(|s| ScalarField::parse(&chart, s))
            .transpose()?;
        let a = match (&self.fields.a, &sigma) {
            (Some(comps), _) => {
                let refs: Vec<&str> = comps.iter().map(String::as_str).collect();
                Some(VectorField::parse(&chart, &refs)?)
            }
            (None, Some(s)) => Some(VectorField::gradient_of(s)),
            (None, None) => None,
        };
        Ok(Resolved {
            metric,
            a,
            sigma,
            samples: self.samples,
            seed: self.seed,
            tolerances: self.tolerances,
            four_pi_g,
            flow: self.flow.clone().unwrap_or_default(),
        })
    }
}

/// A configuration with every name resolved.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub metric: MetricField,
    pub a: Option<VectorField>,
    pub sigma: Option<ScalarField>,
    pub samples: usize,
    pub seed: u64,
    pub tolerances: Tolerances,
    pub four_pi_g: f64,
    pub flow: FlowSpec,
}

impl Resolved {
    pub fn points(&self) -> Result<Vec<Point>> {
        self.metric.chart().sample(self.samples, self.seed)
    }

    /// The pair `(g, A)`, with `sigma` attached when given. Without any field,
    /// `A = 0` and `sigma = 0`.
    pub fn pair(&self) -> Result<ConformalPair> {
        let g = &self.metric;
        match (&self.a, &self.sigma) {
            (Some(a), Some(s)) => ConformalPair::with_sigma(g, a, s),
            (Some(a), None) => ConformalPair::new(g, a),
            (None, Some(s)) => ConformalPair::from_sigma(g, s),
            (None, None) => ConformalPair::from_sigma(g, &ScalarField::zero(g.chart())),
        }
    }

    pub fn field(&self) -> VectorField {
        self.a
            .clone()
            .unwrap_or_else(|| VectorField::zero(self.metric.chart()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_with_fields() {
        let cfg = RunConfig::from_json(
            r#"{"metric": "builtin:hyperbolic_polar2",
                "fields": {"A": ["-2/rho", "0"], "sigma": "-2*log(rho)"},
                "samples": 7, "seed": 3}"#,
        )
        .unwrap();
        let r = cfg.resolve().unwrap();
        assert_eq!(r.points().unwrap().len(), 7);
        assert!(r.pair().unwrap().sigma.is_some());
        assert_eq!(r.tolerances, Tolerances::default());
    }

    #[test]
    fn components_need_chart() {
        let cfg = RunConfig::from_json(
            r#"{"metric": {"components": [["1","0"],["0","1"]], "signature": "++"}}"#,
        )
        .unwrap();
        assert!(cfg.resolve().is_err());
        let cfg = RunConfig::from_json(
            r#"{"chart": {"coords": ["a","b"], "domain": ["a"], "box": [[0.5, 2], [0, 1]]},
                "metric": {"components": [["1","0"],["0","a^2"]], "signature": "++", "name": "polar"}}"#,
        )
        .unwrap();
        let r = cfg.resolve().unwrap();
        assert_eq!(r.metric.chart().id(), "polar");
        for p in r.points().unwrap() {
            assert!(p.coords[0] > 0.5);
        }
    }

    #[test]
    fn overrides_and_validation() {
        let mut cfg = RunConfig::default();
        cfg.apply(&Overrides {
            seed: Some(9),
            samples: Some(3),
            metric: Some("sphere3".into()),
            four_pi_g: Some(2.0),
        });
        let r = cfg.resolve().unwrap();
        assert_eq!((r.seed, r.samples, r.four_pi_g), (9, 3, 2.0));
        assert_eq!(r.metric.name(), "sphere3");
        cfg.tolerances.algebraic = -1.0;
        assert!(cfg.resolve().is_err());
        assert!(RunConfig::from_json(r#"{"bogus": 1}"#).is_err());
        assert!(RunConfig::from_json(r#"{"metric": "builtin:nope"}"#)
            .unwrap()
            .resolve()
            .is_err());
    }

    #[test]
    fn default_round_trips() {
        let cfg = RunConfig {
            flow: Some(FlowSpec::default()),
            ..RunConfig::default()
        };
        let back = RunConfig::from_json(&serde_json::to_string(&cfg.to_value()).unwrap()).unwrap();
        assert_eq!(back, cfg);
    }
}
