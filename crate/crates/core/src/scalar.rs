//! Scalar abstraction shared by every numerical routine in the crate.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign};

/// Floating point scalar the solvers are generic over (`f32` or `f64`).
pub trait Real:
    Float + FromPrimitive + NumAssign + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Relative step for central finite differences, scaled by `1 + |x_i|`.
    fn fd_step() -> Self;

    /// Converts an `f64` literal. Every literal used in the crate is representable.
    #[inline]
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("f64 literal representable in scalar type")
    }

    /// Lossy conversion back to `f64`, used for reports.
    #[inline]
    fn to_f64_lossy(self) -> f64 {
        num_traits::ToPrimitive::to_f64(&self).unwrap_or(f64::NAN)
    }

    /// Tolerance `v`, floored at a small multiple of machine epsilon so that
    /// `f64` tolerances stay meaningful in lower precision.
    #[inline]
    fn tol(v: f64) -> Self {
        Self::lit(v).max(Self::epsilon() * Self::lit(16.0))
    }
}

impl Real for f64 {
    #[inline]
    fn fd_step() -> f64 {
        1e-6
    }
}

impl Real for f32 {
    #[inline]
    fn fd_step() -> f32 {
        2e-3
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tolerance_floor_tracks_precision() {
        assert_eq!(<f64 as Real>::tol(1e-8), 1e-8);
        assert!(<f32 as Real>::tol(1e-12) > 1e-7);
    }
}
