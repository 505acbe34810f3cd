use std::fmt::{Debug, Display};

use num_traits::Num;

/// Numbers that chart coordinates and kernel values are built from.
///
/// Implemented for the exact `i64` (generators with integer arithmetic) and
/// for `f32`/`f64`.
pub trait Scalar:
    Num + Copy + PartialOrd + Debug + Display + Send + Sync + Default + 'static
{
    /// Residual accepted when checking equalities of affine maps.
    fn validation_tolerance() -> Self;

    fn from_i64(v: i64) -> Self;

    fn to_f64(self) -> f64;

    fn magnitude(self) -> Self {
        if self < Self::zero() {
            Self::zero() - self
        } else {
            self
        }
    }
}

impl Scalar for i64 {
    fn validation_tolerance() -> Self {
        0
    }
    fn from_i64(v: i64) -> Self {
        v
    }
    fn to_f64(self) -> f64 {
        self as f64
    }
}

impl Scalar for f64 {
    fn validation_tolerance() -> Self {
        1e-9
    }
    fn from_i64(v: i64) -> Self {
        v as f64
    }
    fn to_f64(self) -> f64 {
        self
    }
}

impl Scalar for f32 {
    fn validation_tolerance() -> Self {
        1e-5
    }
    fn from_i64(v: i64) -> Self {
        v as f32
    }
    fn to_f64(self) -> f64 {
        self as f64
    }
}

/// Floating-point scalars usable with the symmetric eigensolver.
pub trait Real: Scalar + nalgebra::RealField {
    fn of(v: f64) -> Self;
}

impl Real for f64 {
    fn of(v: f64) -> Self {
        v
    }
}

impl Real for f32 {
    fn of(v: f64) -> Self {
        v as f32
    }
}
