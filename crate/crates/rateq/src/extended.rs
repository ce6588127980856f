//! Extended reals `[0, +∞]` for potential and functional values.
//!
//! Dissipation potentials and the trajectory functionals take the value `+∞`
//! on infeasible arguments. We keep that as a dedicated variant instead of an
//! IEEE infinity so that `+∞` can never leak into ordinary arithmetic as a
//! sentinel and silently turn into a NaN.

use serde::{Serialize, Serializer};
use std::fmt;
use std::ops::Add;

/// A nonnegative extended real: either a finite `f64` or `+∞`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Extended {
    Finite(f64),
    Infinite,
}

impl Extended {
    pub const ZERO: Extended = Extended::Finite(0.0);

    pub fn is_finite(self) -> bool {
        matches!(self, Extended::Finite(_))
    }

    /// Finite value, or panic. Only for contexts where finiteness was already checked.
    pub fn expect_finite(self, what: &str) -> f64 {
        match self {
            Extended::Finite(v) => v,
            Extended::Infinite => panic!("{what} is infinite"),
        }
    }

    /// Finite value, or `None`.
    pub fn finite(self) -> Option<f64> {
        match self {
            Extended::Finite(v) => Some(v),
            Extended::Infinite => None,
        }
    }

    /// Collapses to an IEEE float (`f64::INFINITY` for the infinite variant),
    /// for reporting only.
    pub fn to_f64(self) -> f64 {
        match self {
            Extended::Finite(v) => v,
            Extended::Infinite => f64::INFINITY,
        }
    }

    /// `self <= bound` with the convention that `+∞` exceeds every finite bound.
    pub fn le(self, bound: f64) -> bool {
        match self {
            Extended::Finite(v) => v <= bound,
            Extended::Infinite => false,
        }
    }
}

impl From<f64> for Extended {
    fn from(v: f64) -> Self {
        assert!(!v.is_nan(), "NaN is not an extended real");
        if v.is_infinite() {
            Extended::Infinite
        } else {
            Extended::Finite(v)
        }
    }
}

impl Add for Extended {
    type Output = Extended;
    fn add(self, rhs: Extended) -> Extended {
        match (self, rhs) {
            (Extended::Finite(a), Extended::Finite(b)) => Extended::Finite(a + b),
            _ => Extended::Infinite,
        }
    }
}

impl Add<f64> for Extended {
    type Output = Extended;
    fn add(self, rhs: f64) -> Extended {
        self + Extended::from(rhs)
    }
}

impl fmt::Display for Extended {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Extended::Finite(v) => write!(f, "{v}"),
            Extended::Infinite => write!(f, "inf"),
        }
    }
}

impl Serialize for Extended {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Extended::Finite(v) => serializer.serialize_f64(*v),
            Extended::Infinite => serializer.serialize_str("inf"),
        }
    }
}
