//! Scalar abstraction shared by every numerical kernel in the crate.

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating-point scalar the solvers are generic over (`f32`, `f64`).
pub trait Real:
    Float + FromPrimitive + ToPrimitive + Debug + Display + LowerExp + Sum + Send + Sync + 'static
{
    /// Lossy conversion from an `f64` literal.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal representable in scalar type")
    }

    fn from_count(n: usize) -> Self {
        <Self as FromPrimitive>::from_usize(n).expect("integer representable in scalar type")
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Positive part `max(x, 0)`.
    fn pos(self) -> Self {
        self.max(Self::zero())
    }

    /// Negative part `max(-x, 0)`.
    fn neg_part(self) -> Self {
        (-self).max(Self::zero())
    }

    /// Default solver tolerance: `1e-10`, loosened to a thousand ulps for
    /// narrow types.
    fn default_tol() -> Self {
        Self::lit(1e-10).max(Self::epsilon() * Self::lit(1e3))
    }
}

impl<T> Real for T where
    T: Float + FromPrimitive + ToPrimitive + Debug + Display + LowerExp + Sum + Send + Sync + 'static
{
}
