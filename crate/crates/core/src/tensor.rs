//! Pointwise tensor values in a chart's coordinate frame.

use nalgebra::{DMatrix, DVector};

use crate::error::{GeomError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variance {
    /// Both indices down, `T_ij`.
    Covariant,
    /// First index up, `T^i_j`.
    Mixed,
    /// Both indices up, `T^ij`.
    Contravariant,
}

impl Variance {
    pub fn name(self) -> &'static str {
        match self {
            Variance::Covariant => "covariant",
            Variance::Mixed => "mixed",
            Variance::Contravariant => "contravariant",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor2 {
    pub comps: DMatrix<f64>,
    pub variance: Variance,
}

impl Tensor2 {
    pub fn covariant(comps: DMatrix<f64>) -> Self {
        Self {
            comps,
            variance: Variance::Covariant,
        }
    }

    pub fn mixed(comps: DMatrix<f64>) -> Self {
        Self {
            comps,
            variance: Variance::Mixed,
        }
    }

    pub fn dim(&self) -> usize {
        self.comps.nrows()
    }

    pub fn expect(&self, variance: Variance) -> Result<()> {
        if self.variance != variance {
            return Err(GeomError::Variance {
                expected: variance.name(),
                found: self.variance.name(),
            });
        }
        Ok(())
    }

    pub fn max_abs(&self) -> f64 {
        max_abs(&self.comps)
    }

    /// Largest `|T_ij - T_ji|`.
    pub fn asymmetry(&self) -> f64 {
        let n = self.dim();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..i {
                worst = worst.max((self.comps[(i, j)] - self.comps[(j, i)]).abs());
            }
        }
        worst
    }
}

pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0f64, |acc, v| acc.max(v.abs()))
}

pub fn max_abs_vec(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0f64, |acc, x| acc.max(x.abs()))
}

/// `g(a, b)` for a covariant metric matrix.
pub fn inner(g: &DMatrix<f64>, a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    (a.transpose() * g * b)[(0, 0)]
}

/// `|a - b|_inf / max(1, |b|_inf)`.
pub fn rel_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    max_abs(&(a - b)) / max_abs(b).max(1.0)
}
