//! Pole classes of path generating functions.
//!
//! A generating function `F(x) = Z(-log x)` that is analytic with a pole of
//! order `n` at its radius of convergence `x_F` is identified with the class
//! `[Phi_{x_F}^n]`, where `Phi_a(x) = 1 / (1 - x/a)`. Two such functions are
//! equivalent when their ratio has a finite nonzero limit at `x_F`. Classes
//! form a commutative semiring: the sum keeps the nearer pole (the larger
//! order on ties) and the product adds orders at a shared pole.
//!
//! Bounded functions form the multiplicative unit, stored as `x = +inf`,
//! order 0. Pole locations live in the `x = e^{-beta}` domain.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Mul};

use serde::{Deserialize, Serialize};

use crate::error::{KmsError, Result};

/// Relative tolerance for deciding that two pole locations coincide.
pub const DEFAULT_POLE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoleClass {
    x: f64,
    order: u32,
}

impl PoleClass {
    pub const UNIT: PoleClass = PoleClass {
        x: f64::INFINITY,
        order: 0,
    };

    /// `[Phi_x^order]`; order 0 yields the unit regardless of `x`.
    pub fn new(x: f64, order: u32) -> Result<Self> {
        if order == 0 {
            return Ok(Self::UNIT);
        }
        if !(x > 0.0 && x.is_finite()) {
            return Err(KmsError::InvalidParameter(format!(
                "pole location must be finite and positive, got {x}"
            )));
        }
        Ok(PoleClass { x, order })
    }

    pub fn x(&self) -> f64 {
        self.x
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    pub fn is_unit(&self) -> bool {
        self.order == 0
    }

    /// Pole location in the inverse-temperature domain, `-log x`.
    pub fn beta(&self) -> f64 {
        -self.x.ln()
    }

    pub fn pow(self, n: u32) -> Self {
        if n == 0 || self.is_unit() {
            Self::UNIT
        } else {
            PoleClass {
                x: self.x,
                order: self.order * n,
            }
        }
    }

    /// Compares pole locations: `Less` when `self` has the nearer pole.
    fn compare_location(&self, other: &Self, tol: f64) -> Ordering {
        match (self.is_unit(), other.is_unit()) {
            (true, true) => Ordering::Equal,
            (true, false) => Ordering::Greater,
            (false, true) => Ordering::Less,
            (false, false) => {
                if same_location(self.x, other.x, tol) {
                    Ordering::Equal
                } else if self.x < other.x {
                    Ordering::Less
                } else {
                    Ordering::Greater
                }
            }
        }
    }

    pub fn add_with_tolerance(self, other: Self, tol: f64) -> Self {
        match self.compare_location(&other, tol) {
            Ordering::Less => self,
            Ordering::Greater => other,
            Ordering::Equal => PoleClass {
                x: self.x,
                order: self.order.max(other.order),
            },
        }
    }

    pub fn mul_with_tolerance(self, other: Self, tol: f64) -> Self {
        match self.compare_location(&other, tol) {
            Ordering::Less => self,
            Ordering::Greater => other,
            Ordering::Equal if self.is_unit() => Self::UNIT,
            Ordering::Equal => PoleClass {
                x: self.x,
                order: self.order + other.order,
            },
        }
    }

    /// The order `a ⪯ b`: `b` has the nearer pole, or the same pole with at
    /// least the same order.
    pub fn le_with_tolerance(self, other: Self, tol: f64) -> bool {
        match self.compare_location(&other, tol) {
            Ordering::Greater => true,
            Ordering::Less => false,
            Ordering::Equal => self.order <= other.order,
        }
    }

    /// Equality of classes up to the location tolerance.
    pub fn approx_eq(self, other: Self, tol: f64) -> bool {
        self.order == other.order && self.compare_location(&other, tol) == Ordering::Equal
    }
}

pub fn same_location(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs())
}

pub fn class_add(a: PoleClass, b: PoleClass) -> PoleClass {
    a.add_with_tolerance(b, DEFAULT_POLE_TOLERANCE)
}

pub fn class_mul(a: PoleClass, b: PoleClass) -> PoleClass {
    a.mul_with_tolerance(b, DEFAULT_POLE_TOLERANCE)
}

pub fn class_le(a: PoleClass, b: PoleClass) -> bool {
    a.le_with_tolerance(b, DEFAULT_POLE_TOLERANCE)
}

impl Add for PoleClass {
    type Output = PoleClass;
    fn add(self, rhs: Self) -> Self {
        class_add(self, rhs)
    }
}

impl Mul for PoleClass {
    type Output = PoleClass;
    fn mul(self, rhs: Self) -> Self {
        class_mul(self, rhs)
    }
}

impl fmt::Display for PoleClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_unit() {
            write!(f, "1")
        } else {
            write!(f, "[Phi_{}]^{}", self.x, self.order)
        }
    }
}

/// Class of the generating function of a component with spectral radius
/// `rho`: a simple pole at `1/rho`, or the unit for `rho = 0`.
pub fn component_class(rho: f64) -> Result<PoleClass> {
    if !(rho >= 0.0 && rho.is_finite()) {
        return Err(KmsError::InvalidParameter(format!(
            "spectral radius must be nonnegative, got {rho}"
        )));
    }
    if rho == 0.0 {
        Ok(PoleClass::UNIT)
    } else {
        PoleClass::new(1.0 / rho, 1)
    }
}

/// `F_n(beta) = sum_k n^k e^{-beta k} = 1 / (1 - n e^{-beta})`.
pub fn geometric_closed_form(n: u64, beta: f64) -> Result<f64> {
    let ratio = n as f64 * (-beta).exp();
    if !(ratio < 1.0) {
        return Err(KmsError::SeriesDivergent {
            beta,
            threshold: (n as f64).ln(),
        });
    }
    Ok(1.0 / (1.0 - ratio))
}
