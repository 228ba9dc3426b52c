//! Scalar abstraction so the numeric core runs in either f32 or f64.
//!
//! Training can use f32 storage; gradient checks require f64. All reductions
//! accumulate in f64 regardless of the storage type.

use std::fmt::{Debug, Display};

use num_traits::{Float, NumAssignOps};

pub trait Scalar: Float + NumAssignOps + Debug + Display + Send + Sync + 'static {
    fn from_f64(v: f64) -> Self;

    #[inline]
    fn to_f64_(self) -> f64 {
        self.to_f64().expect("scalar convertible to f64")
    }
}

impl Scalar for f32 {
    #[inline]
    fn from_f64(v: f64) -> Self {
        v as f32
    }
}

impl Scalar for f64 {
    #[inline]
    fn from_f64(v: f64) -> Self {
        v
    }
}
