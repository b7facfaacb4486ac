//! Coordinate charts, validity domains and seeded sampling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{GeomError, Result};
use crate::expr::Expr;
use crate::jets::{Jet2, Point, MAX_DIM};

/// Default sampling seed.
pub const DEFAULT_SEED: u64 = 42;

/// Samples keep this fraction of the box scale away from every domain boundary.
pub const BOUNDARY_MARGIN: f64 = 1e-3;

/// A single coordinate chart.
///
/// The validity domain is the set where every constraint expression is
/// strictly positive; an empty constraint list means the whole of `R^m`.
#[derive(Debug, Clone)]
pub struct Chart {
    id: String,
    coord_names: Vec<String>,
    constraints: Vec<(String, Expr)>,
    sample_box: Vec<(f64, f64)>,
}

impl Chart {
    pub fn new(
        id: impl Into<String>,
        coord_names: &[&str],
        constraints: &[&str],
        sample_box: &[(f64, f64)],
    ) -> Result<Chart> {
        let names: Vec<String> = coord_names.iter().map(|s| s.to_string()).collect();
        let constraints: Vec<String> = constraints.iter().map(|s| s.to_string()).collect();
        Chart::from_parts(id.into(), names, constraints, sample_box.to_vec())
    }

    pub fn from_parts(
        id: String,
        coord_names: Vec<String>,
        constraints: Vec<String>,
        sample_box: Vec<(f64, f64)>,
    ) -> Result<Chart> {
        let dim = coord_names.len();
        if !(2..=MAX_DIM).contains(&dim) {
            return Err(GeomError::InvalidDimension(dim));
        }
        if sample_box.len() != dim {
            return Err(GeomError::DimensionMismatch {
                expected: dim,
                found: sample_box.len(),
            });
        }
        if let Some((lo, hi)) = sample_box.iter().find(|(lo, hi)| !(lo < hi)) {
            return Err(GeomError::Sampling(format!(
                "empty box interval [{lo}, {hi}]"
            )));
        }
        let parsed = constraints
            .into_iter()
            .map(|src| {
                let e = Expr::parse(&src, &coord_names).map_err(|source| GeomError::Parse {
                    context: format!("domain constraint {src:?}"),
                    source,
                })?;
                Ok((src, e))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Chart {
            id,
            coord_names,
            constraints: parsed,
            sample_box,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn dim(&self) -> usize {
        self.coord_names.len()
    }

    pub fn coord_names(&self) -> &[String] {
        &self.coord_names
    }

    pub fn constraint_sources(&self) -> impl Iterator<Item = &str> {
        self.constraints.iter().map(|(s, _)| s.as_str())
    }

    pub fn sample_box(&self) -> &[(f64, f64)] {
        &self.sample_box
    }

    /// Same coordinates and domain, different id and box.
    pub fn with_box(&self, sample_box: Vec<(f64, f64)>) -> Result<Chart> {
        Chart::from_parts(
            self.id.clone(),
            self.coord_names.clone(),
            self.constraint_sources().map(String::from).collect(),
            sample_box,
        )
    }

    /// Notes attached to every report computed on this chart.
    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.dim() == 2 {
            out.push(format!(
                "chart {} has dimension 2; Ricci-comparison identities need m >= 3",
                self.id
            ));
        }
        out
    }

    pub fn parse(&self, src: &str) -> Result<Expr> {
        parse_expression(src, self)
    }

    pub fn point(&self, coords: Vec<f64>) -> Point {
        Point::new(self.id.clone(), coords)
    }

    fn constraint_min(&self, coords: &[f64]) -> Option<f64> {
        let mut worst = f64::INFINITY;
        for (_, c) in &self.constraints {
            match c.value(coords) {
                Ok(v) if v.is_finite() => worst = worst.min(v),
                _ => return None,
            }
        }
        Some(worst)
    }

    pub fn contains(&self, coords: &[f64]) -> bool {
        coords.len() == self.dim()
            && coords.iter().all(|c| c.is_finite())
            && self.constraint_min(coords).is_some_and(|v| v > 0.0)
    }

    fn contains_with_margin(&self, coords: &[f64], margin: f64) -> bool {
        self.constraint_min(coords).is_some_and(|v| v > margin)
    }

    /// Checks the point belongs to this chart and lies in its domain.
    pub fn check(&self, x: &Point) -> Result<()> {
        if x.chart_id != self.id {
            return Err(GeomError::ChartMismatch {
                expected: self.id.clone(),
                found: x.chart_id.clone(),
            });
        }
        if x.dim() != self.dim() {
            return Err(GeomError::DimensionMismatch {
                expected: self.dim(),
                found: x.dim(),
            });
        }
        if !self.contains(&x.coords) {
            return Err(GeomError::OutsideDomain {
                chart: self.id.clone(),
                coords: x.coords.clone(),
            });
        }
        Ok(())
    }

    /// `n` seeded points, uniform over the box intersected with the domain.
    pub fn sample(&self, n: usize, seed: u64) -> Result<Vec<Point>> {
        self.sample_in(n, seed, &self.sample_box)
    }

    pub fn sample_in(&self, n: usize, seed: u64, sample_box: &[(f64, f64)]) -> Result<Vec<Point>> {
        if sample_box.len() != self.dim() {
            return Err(GeomError::DimensionMismatch {
                expected: self.dim(),
                found: sample_box.len(),
            });
        }
        let scale = sample_box
            .iter()
            .map(|(lo, hi)| hi - lo)
            .fold(1.0f64, f64::max);
        let margin = BOUNDARY_MARGIN * scale;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = Vec::with_capacity(n);
        let max_attempts = 1000 * n.max(1);
        let mut attempts = 0;
        while out.len() < n {
            attempts += 1;
            if attempts > max_attempts {
                return Err(GeomError::Sampling(format!(
                    "only {} of {n} points of chart {} found inside the domain",
                    out.len(),
                    self.id
                )));
            }
            let coords: Vec<f64> = sample_box
                .iter()
                .map(|(lo, hi)| rng.gen_range(*lo..*hi))
                .collect();
            if self.contains_with_margin(&coords, margin) {
                out.push(self.point(coords));
            }
        }
        Ok(out)
    }
}

/// Parse an expression whose free variables are coordinates of `chart`.
pub fn parse_expression(src: &str, chart: &Chart) -> Result<Expr> {
    Expr::parse(src, chart.coord_names()).map_err(|source| GeomError::Parse {
        context: format!("expression {src:?} on chart {}", chart.id()),
        source,
    })
}

/// A scalar field given by one expression.
#[derive(Debug, Clone)]
pub struct ScalarField {
    pub chart: Chart,
    pub expr: Expr,
}

impl ScalarField {
    pub fn parse(chart: &Chart, src: &str) -> Result<ScalarField> {
        Ok(ScalarField {
            chart: chart.clone(),
            expr: parse_expression(src, chart)?,
        })
    }

    pub fn from_expr(chart: &Chart, expr: Expr) -> ScalarField {
        ScalarField {
            chart: chart.clone(),
            expr,
        }
    }

    pub fn zero(chart: &Chart) -> ScalarField {
        ScalarField::from_expr(chart, Expr::Const(0.0))
    }

    pub fn source(&self) -> String {
        self.expr.render(self.chart.coord_names())
    }

    pub fn jet(&self, x: &Point) -> Result<Jet2> {
        self.chart.check(x)?;
        let j: Jet2 = self.expr.eval(&x.coords)?;
        Ok(j)
    }

    pub fn value(&self, x: &Point) -> Result<f64> {
        self.chart.check(x)?;
        Ok(self.expr.value(&x.coords)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn polar() -> Chart {
        Chart::new(
            "polar",
            &["rho", "theta"],
            &["rho"],
            &[(0.1, 5.0), (-2.0, 2.0)],
        )
        .unwrap()
    }

    #[test]
    fn domain_membership() {
        let c = polar();
        assert!(c.contains(&[1.0, 0.0]));
        assert!(!c.contains(&[0.0, 0.0]));
        assert!(!c.contains(&[-1.0, 0.0]));
        assert!(!c.contains(&[1.0]));
        assert!(c.check(&c.point(vec![2.0, 1.0])).is_ok());
        assert!(matches!(
            c.check(&Point::new("other", vec![2.0, 1.0])),
            Err(GeomError::ChartMismatch { .. })
        ));
        assert!(matches!(
            c.check(&c.point(vec![-2.0, 1.0])),
            Err(GeomError::OutsideDomain { .. })
        ));
    }

    #[test]
    fn sampling_is_seeded_and_inside() {
        let c = polar();
        let a = c.sample(50, 42).unwrap();
        let b = c.sample(50, 42).unwrap();
        assert_eq!(a, b);
        let other = c.sample(50, 7).unwrap();
        assert_ne!(a, other);
        for p in &a {
            assert!(p.coords[0] > 0.1 - 1e-12 && p.coords[0] < 5.0);
            assert!(c.contains(&p.coords));
        }
    }

    #[test]
    fn sampling_fails_on_empty_intersection() {
        let c = Chart::new("neg", &["a", "b"], &["a"], &[(-2.0, -1.0), (0.0, 1.0)]).unwrap();
        assert!(matches!(c.sample(3, 1), Err(GeomError::Sampling(_))));
    }

    #[test]
    fn dimension_limits() {
        assert!(matches!(
            Chart::new("line", &["t"], &[], &[(0.0, 1.0)]),
            Err(GeomError::InvalidDimension(1))
        ));
        assert_eq!(polar().warnings().len(), 1);
    }

    #[test]
    fn bad_constraint_is_a_parse_error() {
        let err = Chart::new("bad", &["a", "b"], &["c > 0"], &[(0.0, 1.0), (0.0, 1.0)]);
        assert!(matches!(err, Err(GeomError::Parse { .. })));
    }
}
