//! Floating-point scalar abstraction shared by every solver component.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use num_traits::{Float, FromPrimitive, NumCast, ToPrimitive};

/// Numeric tolerances used by the LP engine and the decomposition loop.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tolerances<T> {
    /// Primal/dual feasibility.
    pub feasibility: T,
    /// Reduced-cost optimality and complementary slackness.
    pub optimality: T,
    /// Threshold for reporting and integrality decisions.
    pub reporting: T,
    /// Smallest admissible pivot magnitude.
    pub pivot: T,
}

/// Real scalar the solver is generic over (`f32` or `f64`).
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + NumCast
    + Debug
    + Display
    + Default
    + Sum
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Send
    + Sync
    + 'static
{
    fn tolerances() -> Tolerances<Self>;

    /// Converts an `f64` constant, panicking only for values the type cannot represent at all.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("constant not representable")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f64 {
    fn tolerances() -> Tolerances<Self> {
        Tolerances {
            feasibility: 1e-9,
            optimality: 1e-7,
            reporting: 1e-6,
            pivot: 1e-11,
        }
    }
}

// single precision cannot honor the f64 thresholds; scale them to its epsilon
impl Scalar for f32 {
    fn tolerances() -> Tolerances<Self> {
        Tolerances {
            feasibility: 1e-5,
            optimality: 1e-4,
            reporting: 1e-3,
            pivot: 1e-6,
        }
    }
}

pub(crate) fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}
