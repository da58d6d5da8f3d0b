//! Scalar abstraction for the numeric parts of the crate.
//!
//! Everything that does floating-point math (feature matrices, the GNN
//! predictor, the RL agent, reward arithmetic) is generic over [`Scalar`],
//! with implementations for `f32` and `f64`. Graph topology, integer costs,
//! and file formats are not generic; the on-disk checkpoint format always
//! stores `f64`. The crate root exports concrete `f64` aliases
//! ([`crate::Real`] and friends) which the CLI and the tests use.

use ndarray::ScalarOperand;
use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};
use std::fmt::{Debug, Display};
use std::iter::Sum;

/// Floating-point scalar used by all numeric code in this crate.
///
/// The bounds cover what the numeric pipeline needs: `Float` for
/// transcendental functions, `FromPrimitive`/`ToPrimitive` for converting
/// counters and file payloads, `NumAssign` for in-place updates,
/// `ScalarOperand` so `ndarray` accepts the type in scalar-array products,
/// and `Sum` for reductions.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + ScalarOperand
    + Sum
    + Display
    + Debug
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` constant. Conversion of a finite `f64` cannot fail
    /// for the provided impls (`f32` saturates to infinity at worst).
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("f64 constant converts to Scalar")
    }

    /// Converts a count or index.
    fn of_usize(x: usize) -> Self {
        Self::from_usize(x).expect("usize converts to Scalar")
    }

    /// Converts back to `f64` (used for RNG comparisons and file payloads).
    fn as_f64(self) -> f64 {
        self.to_f64().expect("Scalar converts to f64")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
