//! Metric fields, the built-in registry, conformal rescaling and pullbacks.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::chart::{parse_expression, Chart, ScalarField};
use crate::error::{GeomError, Result};
use crate::expr::Expr;
use crate::jets::{Func, Jet2, Point};
use crate::tensor::Tensor2;

/// Relative determinant threshold below which a metric is degenerate.
pub const DEGENERACY_TOL: f64 = 1e-12;

/// Declared sign pattern of a metric, e.g. `-+++`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Signature(String);

impl Signature {
    pub fn parse(s: &str) -> Result<Signature> {
        if s.is_empty() || !s.chars().all(|c| c == '+' || c == '-') {
            return Err(GeomError::InvalidSignature(s.to_string()));
        }
        Ok(Signature(s.to_string()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// `(negative, positive)` counts.
    pub fn counts(&self) -> (usize, usize) {
        let neg = self.0.chars().filter(|c| *c == '-').count();
        (neg, self.0.len() - neg)
    }

    /// Sign of the odd-one-out direction of a Lorentzian signature
    /// (`-1` for `-+++`, `+1` for `+--`).
    pub fn lorentz_time_sign(&self) -> Option<f64> {
        match self.counts() {
            (1, p) if p >= 1 => Some(-1.0),
            (n, 1) if n >= 2 => Some(1.0),
            _ => None,
        }
    }
}

/// A metric on a single chart, as an `m x m` symmetric array of expressions.
#[derive(Debug, Clone)]
pub struct MetricField {
    name: String,
    chart: Chart,
    components: Vec<Vec<Expr>>,
    signature: Signature,
}

/// Value, inverse, determinant and component jets of a metric at one point.
#[derive(Debug, Clone)]
pub struct MetricEval {
    pub coords: Vec<f64>,
    pub g: DMatrix<f64>,
    pub inv: DMatrix<f64>,
    pub det: f64,
    pub jets: Vec<Vec<Jet2>>,
}

impl MetricEval {
    pub fn dim(&self) -> usize {
        self.g.nrows()
    }

    /// `d_k g_ij`
    pub fn dg(&self, k: usize, i: usize, j: usize) -> f64 {
        self.jets[i][j].d(k)
    }

    /// `d_k d_l g_ij`
    pub fn ddg(&self, k: usize, l: usize, i: usize, j: usize) -> f64 {
        self.jets[i][j].dd(k, l)
    }

    /// `d_k g^ij = -g^ia (d_k g_ab) g^bj`
    pub fn d_inv(&self, k: usize) -> DMatrix<f64> {
        let m = self.dim();
        let dgk = DMatrix::from_fn(m, m, |a, b| self.dg(k, a, b));
        -(&self.inv * dgk * &self.inv)
    }
}

impl MetricField {
    pub fn new(
        name: impl Into<String>,
        chart: Chart,
        components: Vec<Vec<Expr>>,
        signature: &str,
    ) -> Result<MetricField> {
        let m = chart.dim();
        if components.len() != m || components.iter().any(|row| row.len() != m) {
            return Err(GeomError::DimensionMismatch {
                expected: m,
                found: components.len(),
            });
        }
        for i in 0..m {
            for j in 0..i {
                if components[i][j] != components[j][i] {
                    return Err(GeomError::NotSymmetric { i, j });
                }
            }
        }
        if let Some(v) = components.iter().flatten().filter_map(Expr::max_var).max() {
            if v >= m {
                return Err(GeomError::DimensionMismatch {
                    expected: m,
                    found: v + 1,
                });
            }
        }
        let signature = Signature::parse(signature)?;
        if signature.len() != m {
            return Err(GeomError::InvalidSignature(signature.0));
        }
        Ok(MetricField {
            name: name.into(),
            chart,
            components,
            signature,
        })
    }

    /// Parse component sources on `chart`.
    pub fn parse(
        name: impl Into<String>,
        chart: Chart,
        components: &[Vec<String>],
        signature: &str,
    ) -> Result<MetricField> {
        let parsed = components
            .iter()
            .map(|row| {
                row.iter()
                    .map(|src| parse_expression(src, &chart))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        MetricField::new(name, chart, parsed, signature)
    }

    /// Diagonal metric from component sources.
    pub fn diagonal(
        name: &str,
        chart: Chart,
        diag: &[&str],
        signature: &str,
    ) -> Result<MetricField> {
        let m = diag.len();
        let mut comps = vec![vec![Expr::Const(0.0); m]; m];
        for (i, src) in diag.iter().enumerate() {
            comps[i][i] = parse_expression(src, &chart)?;
        }
        MetricField::new(name, chart, comps, signature)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn chart(&self) -> &Chart {
        &self.chart
    }

    pub fn dim(&self) -> usize {
        self.chart.dim()
    }

    pub fn signature(&self) -> &Signature {
        &self.signature
    }

    pub fn components(&self) -> &[Vec<Expr>] {
        &self.components
    }

    pub fn component_sources(&self) -> Vec<Vec<String>> {
        self.components
            .iter()
            .map(|row| {
                row.iter()
                    .map(|e| e.render(self.chart.coord_names()))
                    .collect()
            })
            .collect()
    }

    /// The same components on another chart with identical coordinate names.
    pub fn on_chart(&self, chart: Chart) -> Result<MetricField> {
        if chart.coord_names() != self.chart.coord_names() {
            return Err(GeomError::ChartMismatch {
                expected: self.chart.id().to_string(),
                found: chart.id().to_string(),
            });
        }
        Ok(MetricField {
            chart,
            ..self.clone()
        })
    }

    /// Component jets without domain or degeneracy checks.
    pub fn component_jets(&self, coords: &[f64]) -> Result<Vec<Vec<Jet2>>> {
        let m = self.dim();
        let zero = Jet2::constant_in(m, 0.0)?;
        let mut jets = vec![vec![zero; m]; m];
        for i in 0..m {
            for j in i..m {
                let e = &self.components[i][j];
                let jet = if e.is_zero() {
                    zero
                } else {
                    let mut v: Jet2 = e.eval(coords)?;
                    if v.dim() == 0 {
                        v = Jet2::constant_in(m, v.value())?;
                    }
                    v
                };
                jets[i][j] = jet;
                jets[j][i] = jet;
            }
        }
        Ok(jets)
    }

    /// Plain component values at `x` (domain checked).
    pub fn matrix(&self, x: &Point) -> Result<DMatrix<f64>> {
        self.chart.check(x)?;
        let m = self.dim();
        let mut g = DMatrix::zeros(m, m);
        for i in 0..m {
            for j in i..m {
                let v = self.components[i][j].value(&x.coords)?;
                g[(i, j)] = v;
                g[(j, i)] = v;
            }
        }
        Ok(g)
    }

    pub fn eval(&self, x: &Point) -> Result<MetricEval> {
        self.chart.check(x)?;
        let m = self.dim();
        let jets = self.component_jets(&x.coords)?;
        let g = DMatrix::from_fn(m, m, |i, j| jets[i][j].value());
        let det = g.determinant();
        let scale = g.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if !(det.abs() > DEGENERACY_TOL * scale.powi(m as i32)) || !det.is_finite() {
            return Err(GeomError::Degenerate {
                coords: x.coords.clone(),
                det,
            });
        }
        let inv = g
            .clone()
            .try_inverse()
            .ok_or_else(|| GeomError::Degenerate {
                coords: x.coords.clone(),
                det,
            })?;
        Ok(MetricEval {
            coords: x.coords.clone(),
            g,
            inv,
            det,
            jets,
        })
    }

    /// Symmetry, invertibility and signature at one point.
    pub fn validate_at(&self, x: &Point) -> Result<()> {
        let ev = self.eval(x)?;
        let eig = SymmetricEigen::new(ev.g.clone());
        let scale = eig.eigenvalues.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let neg = eig.eigenvalues.iter().filter(|v| **v < 0.0).count();
        let tiny = eig
            .eigenvalues
            .iter()
            .any(|v| v.abs() <= DEGENERACY_TOL * scale);
        let found: String = {
            let mut vals: Vec<f64> = eig.eigenvalues.iter().copied().collect();
            vals.sort_by(|a, b| a.total_cmp(b));
            vals.iter()
                .map(|v| if *v < 0.0 { '-' } else { '+' })
                .collect()
        };
        if tiny || neg != self.signature.counts().0 {
            return Err(GeomError::SignatureMismatch {
                coords: x.coords.clone(),
                declared: self.signature.0.clone(),
                found,
            });
        }
        Ok(())
    }

    /// `g_ij -> exp(2 sigma) g_ij`.
    pub fn conformal_rescale(&self, sigma: &ScalarField) -> Result<MetricField> {
        conformal_rescale(self, sigma)
    }
}

pub fn conformal_rescale(g: &MetricField, sigma: &ScalarField) -> Result<MetricField> {
    if sigma.chart.id() != g.chart.id() {
        return Err(GeomError::ChartMismatch {
            expected: g.chart.id().to_string(),
            found: sigma.chart.id().to_string(),
        });
    }
    if sigma.expr.is_zero() {
        return Ok(g.clone());
    }
    let factor = Expr::call(Func::Exp, Expr::mul(Expr::Const(2.0), sigma.expr.clone()));
    let components = g
        .components
        .iter()
        .map(|row| {
            row.iter()
                .map(|e| {
                    if e.is_zero() {
                        Expr::Const(0.0)
                    } else {
                        Expr::mul(factor.clone(), e.clone())
                    }
                })
                .collect()
        })
        .collect();
    Ok(MetricField {
        name: format!("exp(2*({}))*{}", sigma.source(), g.name),
        chart: g.chart.clone(),
        components,
        signature: g.signature.clone(),
    })
}

pub fn eval_metric(g: &MetricField, x: &Point) -> Result<MetricEval> {
    g.eval(x)
}

/// What a built-in metric is known to satisfy.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Expectation {
    pub flat: bool,
    pub ricci_flat: bool,
    pub scalar_curvature: Option<f64>,
}

pub const BUILTIN_METRICS: [&str; 9] = [
    "minkowski2",
    "minkowski3",
    "minkowski4",
    "hyperbolic_polar2",
    "cone3",
    "schwarzschild",
    "euclidean_n",
    "sphere3",
    "euclidean_polar2",
];

fn minkowski(m: usize) -> Result<MetricField> {
    let names = ["t", "x", "y", "z"];
    let chart = Chart::new(
        format!("minkowski{m}"),
        &names[..m],
        &[],
        &vec![(-5.0, 5.0); m],
    )?;
    let mut diag = vec!["-1"];
    diag.extend(std::iter::repeat("1").take(m - 1));
    let sig: String = std::iter::once('-')
        .chain(std::iter::repeat('+').take(m - 1))
        .collect();
    MetricField::diagonal(&format!("minkowski{m}"), chart, &diag, &sig)
}

fn euclidean(n: usize) -> Result<MetricField> {
    let names: Vec<String> = (1..=n).map(|i| format!("x{i}")).collect();
    let refs: Vec<&str> = names.iter().map(String::as_str).collect();
    let chart = Chart::new(format!("euclidean{n}"), &refs, &[], &vec![(-5.0, 5.0); n])?;
    let diag = vec!["1"; n];
    MetricField::diagonal(&format!("euclidean{n}"), chart, &diag, &"+".repeat(n))
}

fn parse_euclidean_dim(name: &str) -> Option<usize> {
    let rest = name.strip_prefix("euclidean")?;
    let rest = rest.strip_prefix('_').unwrap_or(rest);
    rest.parse().ok()
}

/// Registry lookup. `euclidean_n` is spelled `euclidean3`, `euclidean_4`, ...
pub fn builtin_metric(name: &str) -> Result<MetricField> {
    let pi = std::f64::consts::PI;
    match name {
        "minkowski2" => minkowski(2),
        "minkowski3" => minkowski(3),
        "minkowski4" => minkowski(4),
        "hyperbolic_polar2" => {
            let chart = Chart::new(
                name,
                &["rho", "theta"],
                &["rho"],
                &[(0.1, 5.0), (-2.0, 2.0)],
            )?;
            MetricField::diagonal(name, chart, &["1", "-(rho^2)"], "+-")
        }
        "euclidean_polar2" => {
            let chart = Chart::new(
                name,
                &["rho", "theta"],
                &["rho"],
                &[(0.1, 5.0), (-3.0, 3.0)],
            )?;
            MetricField::diagonal(name, chart, &["1", "rho^2"], "++")
        }
        "cone3" => {
            let chart = Chart::new(
                name,
                &["rho", "u", "v"],
                &["rho", "u"],
                &[(0.2, 5.0), (0.1, 2.0), (-3.0, 3.0)],
            )?;
            MetricField::diagonal(name, chart, &["1", "-(rho^2)", "-(rho^2*sinh(u)^2)"], "+--")
        }
        "schwarzschild" => {
            let chart = Chart::new(
                name,
                &["t", "r", "theta", "phi"],
                &["r - 2", "theta", "pi - theta"],
                &[(-10.0, 10.0), (2.1, 20.0), (0.1, pi - 0.1), (-pi, pi)],
            )?;
            MetricField::diagonal(
                name,
                chart,
                &["-(1 - 2/r)", "1/(1 - 2/r)", "r^2", "r^2*sin(theta)^2"],
                "-+++",
            )
        }
        "sphere3" => {
            let chart = Chart::new(
                name,
                &["chi", "theta", "phi"],
                &["chi", "pi - chi", "theta", "pi - theta"],
                &[(0.1, pi - 0.1), (0.1, pi - 0.1), (-pi, pi)],
            )?;
            MetricField::diagonal(
                name,
                chart,
                &["1", "sin(chi)^2", "sin(chi)^2*sin(theta)^2"],
                "+++",
            )
        }
        other => match parse_euclidean_dim(other) {
            Some(n) if (2..=crate::jets::MAX_DIM).contains(&n) => euclidean(n),
            _ => Err(GeomError::UnknownBuiltin {
                kind: "metric",
                name: other.to_string(),
            }),
        },
    }
}

pub fn builtin_expectation(name: &str) -> Option<Expectation> {
    let flat = Expectation {
        flat: true,
        ricci_flat: true,
        scalar_curvature: Some(0.0),
    };
    match name {
        "minkowski2" | "minkowski3" | "minkowski4" | "hyperbolic_polar2" | "euclidean_polar2"
        | "cone3" => Some(flat),
        "schwarzschild" => Some(Expectation {
            flat: false,
            ricci_flat: true,
            scalar_curvature: Some(0.0),
        }),
        "sphere3" => Some(Expectation {
            flat: false,
            ricci_flat: false,
            scalar_curvature: Some(6.0),
        }),
        other if parse_euclidean_dim(other).is_some() => Some(flat),
        _ => None,
    }
}

/// A map between charts, given by target coordinates as expressions in the
/// source coordinates.
#[derive(Debug, Clone)]
pub struct SmoothMap {
    pub name: String,
    pub source: Chart,
    pub target: Chart,
    components: Vec<Expr>,
}

impl SmoothMap {
    pub fn new(
        name: &str,
        source: Chart,
        target: Chart,
        components: Vec<Expr>,
    ) -> Result<SmoothMap> {
        if components.len() != target.dim() {
            return Err(GeomError::DimensionMismatch {
                expected: target.dim(),
                found: components.len(),
            });
        }
        if let Some(v) = components.iter().filter_map(Expr::max_var).max() {
            if v >= source.dim() {
                return Err(GeomError::DimensionMismatch {
                    expected: source.dim(),
                    found: v + 1,
                });
            }
        }
        Ok(SmoothMap {
            name: name.to_string(),
            source,
            target,
            components,
        })
    }

    pub fn parse(name: &str, source: Chart, target: Chart, srcs: &[&str]) -> Result<SmoothMap> {
        let comps = srcs
            .iter()
            .map(|s| parse_expression(s, &source))
            .collect::<Result<Vec<_>>>()?;
        SmoothMap::new(name, source, target, comps)
    }

    pub fn identity(chart: &Chart) -> SmoothMap {
        SmoothMap {
            name: format!("id_{}", chart.id()),
            source: chart.clone(),
            target: chart.clone(),
            components: (0..chart.dim()).map(Expr::Var).collect(),
        }
    }

    pub fn components(&self) -> &[Expr] {
        &self.components
    }

    /// Image point and Jacobian `J[a][i] = d phi^a / d x^i`.
    pub fn apply(&self, x: &Point) -> Result<(Point, DMatrix<f64>)> {
        self.source.check(x)?;
        let n = self.source.dim();
        let jets = self
            .components
            .iter()
            .map(|e| e.eval::<Jet2>(&x.coords))
            .collect::<Result<Vec<_>, _>>()?;
        let y = self.target.point(jets.iter().map(|j| j.value()).collect());
        self.target.check(&y)?;
        let jac = DMatrix::from_fn(self.target.dim(), n, |a, i| jets[a].d(i));
        Ok((y, jac))
    }

    /// `outer . self`
    pub fn then(&self, outer: &SmoothMap) -> Result<SmoothMap> {
        if outer.source.id() != self.target.id() {
            return Err(GeomError::ChartMismatch {
                expected: self.target.id().to_string(),
                found: outer.source.id().to_string(),
            });
        }
        let comps = outer
            .components
            .iter()
            .map(|e| e.substitute(&self.components))
            .collect();
        SmoothMap::new(
            &format!("{}.{}", outer.name, self.name),
            self.source.clone(),
            outer.target.clone(),
            comps,
        )
    }
}

/// `(phi^* T)_ij = T_ab J^a_i J^b_j` for a covariant tensor already evaluated
/// at the image point.
pub fn pullback_tensor(jac: &DMatrix<f64>, t_at_image: &DMatrix<f64>) -> DMatrix<f64> {
    jac.transpose() * t_at_image * jac
}

pub fn pullback_metric(phi: &SmoothMap, g: &MetricField, x: &Point) -> Result<Tensor2> {
    if g.chart().id() != phi.target.id() {
        return Err(GeomError::ChartMismatch {
            expected: phi.target.id().to_string(),
            found: g.chart().id().to_string(),
        });
    }
    let (y, jac) = phi.apply(x)?;
    let gy = g.matrix(&y)?;
    Ok(Tensor2::covariant(pullback_tensor(&jac, &gy)))
}

/// Inversion of the unit hyperboloid in hyperbolic polar coordinates,
/// `(rho, theta) -> (1/rho, theta)`.
pub fn inversion_map() -> Result<SmoothMap> {
    let chart = builtin_metric("hyperbolic_polar2")?.chart().clone();
    SmoothMap::parse("inversion", chart.clone(), chart, &["1/rho", "theta"])
}

/// Interior of the future light cone of 3-dim Minkowski space with `x > 0`,
/// in Minkowski coordinates.
pub fn minkowski3_wedge() -> Result<Chart> {
    Chart::new(
        "minkowski3_wedge",
        &["t", "x", "y"],
        &["t", "x", "t^2 - x^2 - y^2"],
        &[(0.5, 3.0), (0.05, 1.5), (-1.5, 1.5)],
    )
}

/// `x -> (rho, u, v)` with `rho = sqrt(-phi(x))` and `(u, v)` hyperboloid
/// coordinates of `x / rho` (`x0 = cosh u`, `x1 = sinh u cos v`,
/// `x2 = sinh u sin v`).
pub fn hyperboloid_polar_map() -> Result<SmoothMap> {
    let source = minkowski3_wedge()?;
    let target = builtin_metric("cone3")?.chart().clone();
    SmoothMap::parse(
        "hyperboloid_polar3",
        source,
        target,
        &[
            "sqrt(t^2 - x^2 - y^2)",
            "log((t + sqrt(x^2 + y^2))/sqrt(t^2 - x^2 - y^2))",
            "atan(y/x)",
        ],
    )
}

pub fn builtin_map(name: &str) -> Result<SmoothMap> {
    match name {
        "inversion" => inversion_map(),
        "hyperboloid_polar3" => hyperboloid_polar_map(),
        other => Err(GeomError::UnknownBuiltin {
            kind: "map",
            name: other.to_string(),
        }),
    }
}
