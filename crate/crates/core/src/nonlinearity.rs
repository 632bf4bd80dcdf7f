//! Scalar nonlinearities: soft shrinkage for the analog solvers and the
//! ternary threshold that turns a potential into a spike.

use serde::{Deserialize, Serialize};

/// A quantized broadcast value in {-1, 0, +1}.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum Ternary {
    Neg,
    #[default]
    Zero,
    Pos,
}

impl Ternary {
    pub fn value(self) -> i8 {
        match self {
            Ternary::Neg => -1,
            Ternary::Zero => 0,
            Ternary::Pos => 1,
        }
    }

    pub fn as_f64(self) -> f64 {
        f64::from(self.value())
    }

    pub fn is_zero(self) -> bool {
        self == Ternary::Zero
    }

    /// Sign of `x` as a ternary value (zero maps to `Zero`).
    pub fn sign_of(x: f64) -> Self {
        if x > 0.0 {
            Ternary::Pos
        } else if x < 0.0 {
            Ternary::Neg
        } else {
            Ternary::Zero
        }
    }
}

impl std::ops::Neg for Ternary {
    type Output = Ternary;

    fn neg(self) -> Ternary {
        match self {
            Ternary::Neg => Ternary::Pos,
            Ternary::Zero => Ternary::Zero,
            Ternary::Pos => Ternary::Neg,
        }
    }
}

/// Soft threshold: moves `x` toward zero by `lambda`, zeroing the dead zone
/// `[-lambda, lambda]`.
#[inline]
pub fn shrink(x: f64, lambda: f64) -> f64 {
    debug_assert!(lambda > 0.0);
    if x > lambda {
        x - lambda
    } else if x < -lambda {
        x + lambda
    } else {
        0.0
    }
}

/// Ternary spike decision. Fires when `|x| >= lambda`, so a potential that
/// reaches the threshold exactly emits a spike.
#[inline]
pub fn threshold(x: f64, lambda: f64) -> Ternary {
    debug_assert!(lambda > 0.0);
    if x >= lambda {
        Ternary::Pos
    } else if x <= -lambda {
        Ternary::Neg
    } else {
        Ternary::Zero
    }
}
