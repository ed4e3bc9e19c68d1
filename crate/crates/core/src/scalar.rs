//! Scalar abstraction so the whole stack runs in either f32 or f64.

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};
use std::fmt::{Debug, Display};

/// Floating-point scalar used for weights, potentials and gradients.
///
/// Implemented for `f32` and `f64`. All simulation times stay integral
/// (`u32`); only analog quantities go through this trait.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    /// Lossy conversion from f64; panics only if the value is not
    /// representable at all (never happens for finite inputs in range).
    fn from_f64_lossy(v: f64) -> Self {
        Self::from_f64(v).expect("f64 -> scalar conversion")
    }

    /// Exact widening to f64 for aggregation and reporting.
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().expect("scalar -> f64 conversion")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
