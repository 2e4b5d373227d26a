//! Scalar abstraction so the numeric core runs at either precision.
//!
//! Training and verification run at f64; the inference path also supports
//! f32 (latency benchmarking pins 32-bit). See the crate root for concrete
//! type aliases.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, NumAssignOps};

/// Floating-point scalar the math core is generic over.
pub trait Scalar:
    Float + NumAssignOps + Sum + Debug + Display + Default + Send + Sync + 'static
{
    fn from_f64(v: f64) -> Self;
    fn as_f64(self) -> f64;
    /// Parse a decimal literal exactly as this type (used by the checkpoint
    /// loader so save/load round-trips are bit-identical).
    fn parse_str(s: &str) -> Option<Self>;
}

impl Scalar for f32 {
    #[inline]
    fn from_f64(v: f64) -> Self {
        v as f32
    }
    #[inline]
    fn as_f64(self) -> f64 {
        self as f64
    }
    fn parse_str(s: &str) -> Option<Self> {
        s.parse().ok()
    }
}

impl Scalar for f64 {
    #[inline]
    fn from_f64(v: f64) -> Self {
        v
    }
    #[inline]
    fn as_f64(self) -> f64 {
        self
    }
    fn parse_str(s: &str) -> Option<Self> {
        s.parse().ok()
    }
}
