//! Floating-point abstraction shared by every numerical routine in the crate.
//!
//! All model and solver code is written against [`Scalar`], so the same
//! implementation runs in `f64` (the default everywhere) or `f32`. Tolerances
//! are stated as `f64` literals and lifted with [`Scalar::lit`]; the
//! [`Scalar::gate`] helper keeps a requested tolerance attainable for the
//! narrower type.

use std::fmt::{Debug, Display, LowerExp};

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

pub trait Scalar:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Default
    + Debug
    + Display
    + LowerExp
    + Send
    + Sync
    + Serialize
    + DeserializeOwned
    + 'static
{
    /// Lift an `f64` literal.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    #[inline]
    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// `max(tol, 64 ε)`: a tolerance the type can actually resolve.
    #[inline]
    fn gate(tol: f64) -> Self {
        Self::lit(tol).max(Self::epsilon() * Self::lit(64.0))
    }

    /// Relative finite-difference step: the requested one, or `ε^(1/3)` if
    /// that is larger.
    #[inline]
    fn fd_step(rel: f64) -> Self {
        Self::lit(rel).max(Self::epsilon().cbrt())
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gate_is_attainable() {
        assert_eq!(<f64 as Scalar>::gate(1e-7), 1e-7);
        assert!(<f32 as Scalar>::gate(1e-9) > 1e-6);
    }

    #[test]
    fn fd_step_widens_for_f32() {
        assert_eq!(<f64 as Scalar>::fd_step(1e-5), 1e-5);
        assert!(<f32 as Scalar>::fd_step(1e-5) > 1e-3);
    }
}
