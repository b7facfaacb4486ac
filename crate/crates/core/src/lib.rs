//! Numerical semi-Riemannian geometry on coordinate charts.
//!
//! Metrics and fields are given as expressions in the chart coordinates and
//! evaluated with exact second-order forward jets, so Christoffel symbols and
//! curvature carry no finite-difference error.
//!
//! ```
//! use ricci_geom::curvature::Curvature;
//! use ricci_geom::metric::builtin_metric;
//!
//! let g = builtin_metric("sphere3")?;
//! let x = g.chart().point(vec![1.0, 0.5, 0.3]);
//! let cv = Curvature::at(&g, &x)?;
//! assert!((cv.scalar - 6.0).abs() < 1e-10);
//! # Ok::<(), ricci_geom::GeomError>(())
//! ```

pub mod atp;
pub mod chart;
pub mod config;
pub mod conformal;
pub mod curvature;
pub mod error;
pub mod expr;
pub mod fields;
pub mod flows;
pub mod jets;
pub mod metric;
pub mod ode;
pub mod report;
pub mod suite;
pub mod tensor;

pub use error::{GeomError, Result};
