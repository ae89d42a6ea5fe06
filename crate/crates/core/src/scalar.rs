//! Scalar abstraction for the closed-form and transform layers.
//!
//! The dense matrix pipeline is double precision throughout; everything that is
//! plain real arithmetic (derived constants, weak-field waveforms, cosine
//! transforms, peak widths) is written against [`Real`] so it runs in `f32`
//! or `f64`.

use std::fmt::Debug;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Floating point type usable by the scalar-generic modules.
pub trait Real:
    Float + FloatConst + FromPrimitive + ToPrimitive + Debug + Default + Send + Sync + 'static
{
    /// Lossy conversion from `f64`; every constant in this crate is representable.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable in target float")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("finite float converts to f64")
    }
}

impl Real for f32 {}
impl Real for f64 {}
