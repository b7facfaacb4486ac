//! Second-order forward-mode differentiation.
//!
//! A [`Jet2`] carries a scalar together with its gradient and Hessian with
//! respect to the chart coordinates. Every propagation rule below produces a
//! symmetric Hessian, so curvature (which needs second derivatives of the
//! metric) is obtained from a single evaluation pass.

use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

use thiserror::Error;

/// Largest chart dimension a jet can carry.
pub const MAX_DIM: usize = 8;

/// Divisors with magnitude at or below this are rejected by checked division.
pub const DEFAULT_DIV_TOL: f64 = 1e-300;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum JetError {
    #[error("coordinate index {index} out of range for dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },
    #[error("dimension {0} exceeds the supported maximum of {MAX_DIM}")]
    DimensionTooLarge(usize),
    #[error("jets of dimension {0} and {1} combined")]
    DimensionMismatch(usize, usize),
    #[error("division by near-zero value {0:e}")]
    DivisionByZero(f64),
    #[error("{func} is undefined at {value}")]
    Domain { func: &'static str, value: f64 },
}

/// A point of a chart.
#[derive(Debug, Clone, PartialEq)]
pub struct Point {
    pub chart_id: String,
    pub coords: Vec<f64>,
}

impl Point {
    pub fn new(chart_id: impl Into<String>, coords: Vec<f64>) -> Self {
        Self {
            chart_id: chart_id.into(),
            coords,
        }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }
}

/// Elementary functions understood by the jet layer and the expression parser.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Func {
    Sin,
    Cos,
    Tan,
    Sinh,
    Cosh,
    Exp,
    Log,
    Sqrt,
    Atan,
}

impl Func {
    pub const ALL: [Func; 9] = [
        Func::Sin,
        Func::Cos,
        Func::Tan,
        Func::Sinh,
        Func::Cosh,
        Func::Exp,
        Func::Log,
        Func::Sqrt,
        Func::Atan,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tan => "tan",
            Func::Sinh => "sinh",
            Func::Cosh => "cosh",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
            Func::Atan => "atan",
        }
    }

    pub fn from_name(name: &str) -> Option<Func> {
        Func::ALL.into_iter().find(|f| f.name() == name)
    }

    /// Value, first and second derivative at `x`.
    pub fn derivatives(self, x: f64) -> Result<(f64, f64, f64), JetError> {
        let domain = |func| Err(JetError::Domain { func, value: x });
        Ok(match self {
            Func::Sin => (x.sin(), x.cos(), -x.sin()),
            Func::Cos => (x.cos(), -x.sin(), -x.cos()),
            Func::Tan => {
                if x.cos().abs() < 1e-12 {
                    return domain("tan");
                }
                let t = x.tan();
                let sec2 = 1.0 + t * t;
                (t, sec2, 2.0 * t * sec2)
            }
            Func::Sinh => (x.sinh(), x.cosh(), x.sinh()),
            Func::Cosh => (x.cosh(), x.sinh(), x.cosh()),
            Func::Exp => {
                let e = x.exp();
                (e, e, e)
            }
            Func::Log => {
                if !(x > 0.0) {
                    return domain("log");
                }
                (x.ln(), 1.0 / x, -1.0 / (x * x))
            }
            Func::Sqrt => {
                if !(x > 0.0) {
                    return domain("sqrt");
                }
                let s = x.sqrt();
                (s, 0.5 / s, -0.25 / (s * x))
            }
            Func::Atan => {
                let d = 1.0 + x * x;
                (x.atan(), 1.0 / d, -2.0 * x / (d * d))
            }
        })
    }
}

impl fmt::Display for Func {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Value, gradient and Hessian of a scalar with respect to `dim` coordinates.
///
/// A jet of dimension 0 is a pure constant and combines with jets of any
/// dimension.
#[derive(Clone, Copy, PartialEq)]
pub struct Jet2 {
    dim: usize,
    value: f64,
    grad: [f64; MAX_DIM],
    hess: [[f64; MAX_DIM]; MAX_DIM],
}

impl fmt::Debug for Jet2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Jet2")
            .field("value", &self.value)
            .field("grad", &self.grad())
            .field("hess", &self.hess_matrix())
            .finish()
    }
}

impl Jet2 {
    pub fn constant(value: f64) -> Self {
        Self {
            dim: 0,
            value,
            grad: [0.0; MAX_DIM],
            hess: [[0.0; MAX_DIM]; MAX_DIM],
        }
    }

    /// Constant with an explicit dimension.
    pub fn constant_in(dim: usize, value: f64) -> Result<Self, JetError> {
        if dim > MAX_DIM {
            return Err(JetError::DimensionTooLarge(dim));
        }
        Ok(Self {
            dim,
            ..Self::constant(value)
        })
    }

    /// Build a jet from explicit parts. `hess` must be symmetric.
    pub fn from_parts(value: f64, grad: &[f64], hess: &[Vec<f64>]) -> Result<Self, JetError> {
        let dim = grad.len();
        let mut jet = Self::constant_in(dim, value)?;
        jet.grad[..dim].copy_from_slice(grad);
        for i in 0..dim {
            for j in 0..dim {
                jet.hess[i][j] = 0.5 * (hess[i][j] + hess[j][i]);
            }
        }
        Ok(jet)
    }

    /// The `i`-th coordinate at `coords`: unit gradient, zero Hessian.
    pub fn coordinate(i: usize, coords: &[f64]) -> Result<Self, JetError> {
        let dim = coords.len();
        if i >= dim {
            return Err(JetError::IndexOutOfRange { index: i, dim });
        }
        let mut jet = Self::constant_in(dim, coords[i])?;
        jet.grad[i] = 1.0;
        Ok(jet)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn grad(&self) -> &[f64] {
        &self.grad[..self.dim]
    }

    /// Partial derivative along coordinate `i` (zero beyond the jet's dimension).
    pub fn d(&self, i: usize) -> f64 {
        if i < self.dim {
            self.grad[i]
        } else {
            0.0
        }
    }

    /// Second partial derivative along coordinates `i`, `j`.
    pub fn dd(&self, i: usize, j: usize) -> f64 {
        if i < self.dim && j < self.dim {
            self.hess[i][j]
        } else {
            0.0
        }
    }

    pub fn hess_matrix(&self) -> Vec<Vec<f64>> {
        (0..self.dim)
            .map(|i| self.hess[i][..self.dim].to_vec())
            .collect()
    }

    fn joint_dim(a: usize, b: usize) -> usize {
        match (a, b) {
            (0, d) | (d, 0) => d,
            (x, y) => {
                assert_eq!(x, y, "jets of different dimension combined");
                x
            }
        }
    }

    fn check_dims(&self, rhs: &Jet2) -> Result<(), JetError> {
        if self.dim != 0 && rhs.dim != 0 && self.dim != rhs.dim {
            return Err(JetError::DimensionMismatch(self.dim, rhs.dim));
        }
        Ok(())
    }

    /// Compose with a scalar function given its first and second derivative.
    pub fn chain(&self, value: f64, d1: f64, d2: f64) -> Jet2 {
        let n = self.dim;
        let mut out = Jet2 {
            dim: n,
            value,
            ..Jet2::constant(value)
        };
        for i in 0..n {
            out.grad[i] = d1 * self.grad[i];
        }
        for i in 0..n {
            for j in i..n {
                let h = d1 * self.hess[i][j] + d2 * self.grad[i] * self.grad[j];
                out.hess[i][j] = h;
                out.hess[j][i] = h;
            }
        }
        out
    }

    pub fn apply(&self, func: Func) -> Result<Jet2, JetError> {
        let (f, d1, d2) = func.derivatives(self.value)?;
        Ok(self.chain(f, d1, d2))
    }

    pub fn recip(&self) -> Result<Jet2, JetError> {
        self.recip_with_tol(DEFAULT_DIV_TOL)
    }

    pub fn recip_with_tol(&self, tol: f64) -> Result<Jet2, JetError> {
        let x = self.value;
        if !(x.abs() > tol) {
            return Err(JetError::DivisionByZero(x));
        }
        let r = 1.0 / x;
        Ok(self.chain(r, -r * r, 2.0 * r * r * r))
    }

    pub fn checked_div(&self, rhs: &Jet2) -> Result<Jet2, JetError> {
        self.check_dims(rhs)?;
        Ok(*self * rhs.recip()?)
    }

    pub fn checked_mul(&self, rhs: &Jet2) -> Result<Jet2, JetError> {
        self.check_dims(rhs)?;
        Ok(*self * *rhs)
    }

    pub fn checked_add(&self, rhs: &Jet2) -> Result<Jet2, JetError> {
        self.check_dims(rhs)?;
        Ok(*self + *rhs)
    }

    pub fn checked_sub(&self, rhs: &Jet2) -> Result<Jet2, JetError> {
        self.check_dims(rhs)?;
        Ok(*self - *rhs)
    }

    pub fn powi(&self, n: i32) -> Result<Jet2, JetError> {
        let x = self.value;
        if n == 0 {
            return Ok(Jet2 {
                dim: self.dim,
                ..Jet2::constant(1.0)
            });
        }
        if n < 0 && !(x.abs() > DEFAULT_DIV_TOL) {
            return Err(JetError::DivisionByZero(x));
        }
        let nf = n as f64;
        let d1 = if n == 1 { 1.0 } else { nf * x.powi(n - 1) };
        let d2 = match n {
            1 => 0.0,
            2 => 2.0,
            _ => nf * (nf - 1.0) * x.powi(n - 2),
        };
        Ok(self.chain(x.powi(n), d1, d2))
    }

    pub fn powf(&self, p: f64) -> Result<Jet2, JetError> {
        if p.fract() == 0.0 && p.abs() <= i32::MAX as f64 {
            return self.powi(p as i32);
        }
        let x = self.value;
        if !(x > 0.0) {
            return Err(JetError::Domain {
                func: "pow",
                value: x,
            });
        }
        Ok(self.chain(
            x.powf(p),
            p * x.powf(p - 1.0),
            p * (p - 1.0) * x.powf(p - 2.0),
        ))
    }

    /// General power. A constant exponent dispatches to [`Jet2::powf`];
    /// otherwise `exp(b log a)`, which requires `a > 0`.
    pub fn pow(&self, exponent: &Jet2) -> Result<Jet2, JetError> {
        self.check_dims(exponent)?;
        if exponent.grad().iter().all(|g| *g == 0.0)
            && exponent.hess_matrix().iter().flatten().all(|h| *h == 0.0)
        {
            return self.powf(exponent.value);
        }
        if !(self.value > 0.0) {
            return Err(JetError::Domain {
                func: "pow",
                value: self.value,
            });
        }
        (*exponent * self.apply(Func::Log)?).apply(Func::Exp)
    }
}

impl Add for Jet2 {
    type Output = Jet2;
    fn add(self, rhs: Jet2) -> Jet2 {
        let n = Jet2::joint_dim(self.dim, rhs.dim);
        let mut out = Jet2::constant(self.value + rhs.value);
        out.dim = n;
        for i in 0..n {
            out.grad[i] = self.d(i) + rhs.d(i);
            for j in 0..n {
                out.hess[i][j] = self.dd(i, j) + rhs.dd(i, j);
            }
        }
        out
    }
}

impl Neg for Jet2 {
    type Output = Jet2;
    fn neg(self) -> Jet2 {
        let mut out = self;
        out.value = -self.value;
        for i in 0..self.dim {
            out.grad[i] = -self.grad[i];
            for j in 0..self.dim {
                out.hess[i][j] = -self.hess[i][j];
            }
        }
        out
    }
}

impl Sub for Jet2 {
    type Output = Jet2;
    fn sub(self, rhs: Jet2) -> Jet2 {
        self + (-rhs)
    }
}

impl Mul for Jet2 {
    type Output = Jet2;
    fn mul(self, rhs: Jet2) -> Jet2 {
        let n = Jet2::joint_dim(self.dim, rhs.dim);
        let (a, b) = (self.value, rhs.value);
        let mut out = Jet2::constant(a * b);
        out.dim = n;
        for i in 0..n {
            out.grad[i] = a * rhs.d(i) + b * self.d(i);
        }
        for i in 0..n {
            for j in i..n {
                let h = a * rhs.dd(i, j)
                    + b * self.dd(i, j)
                    + self.d(i) * rhs.d(j)
                    + rhs.d(i) * self.d(j);
                out.hess[i][j] = h;
                out.hess[j][i] = h;
            }
        }
        out
    }
}

/// Unchecked division; a zero divisor yields non-finite components.
impl Div for Jet2 {
    type Output = Jet2;
    fn div(self, rhs: Jet2) -> Jet2 {
        let r = 1.0 / rhs.value;
        self * rhs.chain(r, -r * r, 2.0 * r * r * r)
    }
}

impl Add<f64> for Jet2 {
    type Output = Jet2;
    fn add(self, rhs: f64) -> Jet2 {
        let mut out = self;
        out.value += rhs;
        out
    }
}

impl Mul<f64> for Jet2 {
    type Output = Jet2;
    fn mul(self, rhs: f64) -> Jet2 {
        self.chain(self.value * rhs, rhs, 0.0)
    }
}

/// Scalar types the expression evaluator can run on: plain `f64` for fast
/// value-only evaluation and [`Jet2`] when derivatives are needed.
pub trait Number:
    Copy + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> + Neg<Output = Self>
{
    fn from_const(v: f64) -> Self;
    fn coordinate(i: usize, coords: &[f64]) -> Result<Self, JetError>;
    fn val(&self) -> f64;
    fn apply(&self, func: Func) -> Result<Self, JetError>;
    fn checked_div(&self, rhs: &Self) -> Result<Self, JetError>;
    fn pow(&self, exponent: &Self) -> Result<Self, JetError>;
}

impl Number for f64 {
    fn from_const(v: f64) -> Self {
        v
    }

    fn coordinate(i: usize, coords: &[f64]) -> Result<Self, JetError> {
        coords.get(i).copied().ok_or(JetError::IndexOutOfRange {
            index: i,
            dim: coords.len(),
        })
    }

    fn val(&self) -> f64 {
        *self
    }

    fn apply(&self, func: Func) -> Result<Self, JetError> {
        Ok(func.derivatives(*self)?.0)
    }

    fn checked_div(&self, rhs: &Self) -> Result<Self, JetError> {
        if !(rhs.abs() > DEFAULT_DIV_TOL) {
            return Err(JetError::DivisionByZero(*rhs));
        }
        Ok(self / rhs)
    }

    fn pow(&self, exponent: &Self) -> Result<Self, JetError> {
        let p = *exponent;
        if p.fract() == 0.0 && p.abs() <= i32::MAX as f64 {
            if p < 0.0 && !(self.abs() > DEFAULT_DIV_TOL) {
                return Err(JetError::DivisionByZero(*self));
            }
            return Ok(self.powi(p as i32));
        }
        if !(*self > 0.0) {
            return Err(JetError::Domain {
                func: "pow",
                value: *self,
            });
        }
        Ok(self.powf(p))
    }
}

impl Number for Jet2 {
    fn from_const(v: f64) -> Self {
        Jet2::constant(v)
    }

    fn coordinate(i: usize, coords: &[f64]) -> Result<Self, JetError> {
        Jet2::coordinate(i, coords)
    }

    fn val(&self) -> f64 {
        self.value
    }

    fn apply(&self, func: Func) -> Result<Self, JetError> {
        Jet2::apply(self, func)
    }

    fn checked_div(&self, rhs: &Self) -> Result<Self, JetError> {
        Jet2::checked_div(self, rhs)
    }

    fn pow(&self, exponent: &Self) -> Result<Self, JetError> {
        Jet2::pow(self, exponent)
    }
}

/// Binary jet operations selectable at runtime.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArithOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

pub fn jet_arith(op: ArithOp, a: &Jet2, b: &Jet2) -> Result<Jet2, JetError> {
    match op {
        ArithOp::Add => a.checked_add(b),
        ArithOp::Sub => a.checked_sub(b),
        ArithOp::Mul => a.checked_mul(b),
        ArithOp::Div => a.checked_div(b),
        ArithOp::Pow => a.pow(b),
    }
}

pub fn lift_coordinate(i: usize, x: &Point) -> Result<Jet2, JetError> {
    Jet2::coordinate(i, &x.coords)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn x_at(v: f64) -> Jet2 {
        Jet2::coordinate(0, &[v]).unwrap()
    }

    #[test]
    fn coordinate_lift() {
        let p = Point::new("plane", vec![3.0, 4.0]);
        let j0 = lift_coordinate(0, &p).unwrap();
        assert_eq!(j0.value(), 3.0);
        assert_eq!(j0.grad(), &[1.0, 0.0]);
        assert_eq!(j0.hess_matrix(), vec![vec![0.0; 2]; 2]);
        let j1 = lift_coordinate(1, &p).unwrap();
        assert_eq!(j1.value(), 4.0);
        assert_eq!(j1.grad(), &[0.0, 1.0]);
        assert!(matches!(
            lift_coordinate(2, &p),
            Err(JetError::IndexOutOfRange { index: 2, dim: 2 })
        ));
        let c = Jet2::constant_in(2, 5.0).unwrap();
        assert_eq!(c.value(), 5.0);
        assert_eq!(c.grad(), &[0.0, 0.0]);
    }

    #[test]
    fn square_and_reciprocal() {
        let x = x_at(3.0);
        let sq = jet_arith(ArithOp::Mul, &x, &x).unwrap();
        assert_eq!((sq.value(), sq.d(0), sq.dd(0, 0)), (9.0, 6.0, 2.0));

        let rho = x_at(2.0);
        let inv = jet_arith(ArithOp::Div, &Jet2::constant(1.0), &rho).unwrap();
        assert_eq!((inv.value(), inv.d(0), inv.dd(0, 0)), (0.5, -0.25, 0.25));
    }

    #[test]
    fn division_by_zero_rejected() {
        let z = x_at(0.0);
        assert!(matches!(
            jet_arith(ArithOp::Div, &Jet2::constant(1.0), &z),
            Err(JetError::DivisionByZero(_))
        ));
        // Only a true zero trips the default tolerance.
        assert!(jet_arith(ArithOp::Div, &Jet2::constant(1.0), &x_at(1e-200)).is_ok());
    }

    #[test]
    fn pow_domain() {
        let neg = x_at(-2.0);
        assert!(neg.powf(0.5).is_err());
        let cube = neg.powf(3.0).unwrap();
        assert_eq!(
            (cube.value(), cube.d(0), cube.dd(0, 0)),
            (-8.0, 12.0, -12.0)
        );
        let half = jet_arith(ArithOp::Pow, &x_at(-2.0), &Jet2::constant(0.5));
        assert!(matches!(half, Err(JetError::Domain { func: "pow", .. })));
    }

    #[test]
    fn conformal_factor_of_inversion() {
        // exp(2 sigma) with sigma = -2 ln(rho) is rho^-4.
        let rho = x_at(2.0);
        let sigma = rho.apply(Func::Log).unwrap() * -2.0;
        let factor = (sigma * 2.0).apply(Func::Exp).unwrap();
        // d/drho rho^-4 = -4 rho^-5, d2 = 20 rho^-6
        assert!((factor.value() - 1.0 / 16.0).abs() < 1e-15);
        assert!((factor.d(0) + 4.0 / 32.0).abs() < 1e-15);
        assert!((factor.dd(0, 0) - 20.0 / 64.0).abs() < 1e-15);
    }

    #[test]
    fn sinh_at_zero() {
        let s = x_at(0.0).apply(Func::Sinh).unwrap();
        assert_eq!((s.value(), s.d(0), s.dd(0, 0)), (0.0, 1.0, 0.0));
    }

    #[test]
    fn function_domains() {
        assert!(x_at(0.0).apply(Func::Log).is_err());
        assert!(x_at(-1.0).apply(Func::Sqrt).is_err());
        assert!(x_at(std::f64::consts::FRAC_PI_2).apply(Func::Tan).is_err());
        assert!(x_at(1.0).apply(Func::Tan).is_ok());
    }

    #[test]
    fn mismatched_dimensions() {
        let a = Jet2::coordinate(0, &[1.0, 2.0]).unwrap();
        let b = Jet2::coordinate(0, &[1.0, 2.0, 3.0]).unwrap();
        assert!(matches!(
            a.checked_add(&b),
            Err(JetError::DimensionMismatch(2, 3))
        ));
        assert!(a.checked_add(&Jet2::constant(1.0)).is_ok());
    }
}
