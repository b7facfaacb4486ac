//! Machine-readable check reports.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub residual: f64,
    pub tol: f64,
    pub pass: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

impl Check {
    /// Passes when `residual <= tol`; a NaN residual fails.
    pub fn below(name: impl Into<String>, residual: f64, tol: f64) -> Check {
        Check {
            name: name.into(),
            residual,
            tol,
            pass: residual <= tol,
            detail: None,
        }
    }

    /// Passes when `|value - target| <= tol`; the residual is the distance.
    pub fn near(name: impl Into<String>, value: f64, target: f64, tol: f64) -> Check {
        Check::below(name, (value - target).abs(), tol)
            .with_detail(format!("value {value}, expected {target}"))
    }

    /// A boolean outcome, residual 0 on success and 1 on failure.
    pub fn flag(name: impl Into<String>, ok: bool) -> Check {
        Check {
            name: name.into(),
            residual: if ok { 0.0 } else { 1.0 },
            tol: 0.0,
            pass: ok,
            detail: None,
        }
    }

    /// A check that could not be computed.
    pub fn error(name: impl Into<String>, err: impl std::fmt::Display) -> Check {
        Check {
            name: name.into(),
            residual: f64::INFINITY,
            tol: 0.0,
            pass: false,
            detail: Some(err.to_string()),
        }
    }

    pub fn with_detail(mut self, detail: impl Into<String>) -> Check {
        self.detail = Some(detail.into());
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub command: String,
    pub pass: bool,
    pub checks: Vec<Check>,
    pub seed: u64,
    pub samples: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<serde_json::Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timing_ms: Option<f64>,
}

impl Report {
    pub fn new(command: impl Into<String>, seed: u64, samples: usize) -> Report {
        Report {
            command: command.into(),
            pass: true,
            checks: Vec::new(),
            seed,
            samples,
            notes: Vec::new(),
            config: None,
            timing_ms: None,
        }
    }

    pub fn push(&mut self, check: Check) {
        self.pass &= check.pass;
        self.checks.push(check);
    }

    pub fn extend(&mut self, checks: impl IntoIterator<Item = Check>) {
        for c in checks {
            self.push(c);
        }
    }

    pub fn note(&mut self, note: impl Into<String>) {
        self.notes.push(note.into());
    }

    /// Appends every check of `other`, prefixing names with `prefix/`.
    pub fn absorb(&mut self, prefix: &str, other: Report) {
        for mut c in other.checks {
            c.name = format!("{prefix}/{}", c.name);
            self.push(c);
        }
        for n in other.notes {
            self.note(format!("{prefix}: {n}"));
        }
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.pass)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// JSON with the timing field removed, for reproducibility comparisons.
    pub fn to_json_untimed(&self) -> String {
        let mut r = self.clone();
        r.timing_ms = None;
        r.to_json()
    }

    /// Aligned plain-text table.
    pub fn table(&self) -> String {
        let width = self
            .checks
            .iter()
            .map(|c| c.name.len())
            .max()
            .unwrap_or(4)
            .max(4);
        let mut out = format!(
            "{}: {} ({} checks, seed {}, samples {})\n",
            self.command,
            if self.pass { "PASS" } else { "FAIL" },
            self.checks.len(),
            self.seed,
            self.samples
        );
        for c in &self.checks {
            out.push_str(&format!(
                "  {:<width$}  {:>4}  residual {:<12.4e} tol {:.1e}",
                c.name,
                if c.pass { "ok" } else { "FAIL" },
                c.residual,
                c.tol,
            ));
            if let Some(d) = &c.detail {
                out.push_str("  ");
                out.push_str(d);
            }
            out.push('\n');
        }
        for n in &self.notes {
            out.push_str(&format!("  note: {n}\n"));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pass_is_conjunction() {
        let mut r = Report::new("x", 42, 10);
        r.push(Check::below("a", 1e-12, 1e-8));
        assert!(r.pass);
        r.push(Check::below("b", f64::NAN, 1e-8));
        assert!(!r.pass);
        assert_eq!(r.failures().count(), 1);
    }

    #[test]
    fn json_schema_fields() {
        let mut r = Report::new("curvature", 42, 3);
        r.push(Check::near("sc", 6.0, 6.0, 1e-6));
        r.timing_ms = Some(1.5);
        let v: serde_json::Value = serde_json::from_str(&r.to_json()).unwrap();
        for key in ["command", "pass", "checks", "seed", "samples", "timing_ms"] {
            assert!(v.get(key).is_some(), "{key}");
        }
        let c = &v["checks"][0];
        for key in ["name", "residual", "tol", "pass"] {
            assert!(c.get(key).is_some(), "{key}");
        }
        assert!(!r.to_json_untimed().contains("timing_ms"));
    }
}
