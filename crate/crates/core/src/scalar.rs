//! Scalar abstractions shared by the numeric kernels.
//!
//! Quantities that only need field arithmetic (operation times, token
//! latencies) are generic over [`Scalar`], which admits exact rationals.
//! Geometry that needs square roots is generic over [`RealScalar`].

use std::fmt::Debug;
use std::ops::{Add, Sub};

use num_traits::{Float, FromPrimitive, Num, Signed, ToPrimitive};
use serde::{Deserialize, Serialize};

/// Field-like scalar: `f32`, `f64` or an exact rational such as `Rational64`.
pub trait Scalar:
    Num + Signed + Copy + PartialOrd + FromPrimitive + ToPrimitive + Debug + Send + Sync + 'static
{
    /// `numerator / denominator` built in the scalar's own arithmetic, so
    /// decimal constants such as 0.6 are exact for rationals and correctly
    /// rounded for floats.
    fn ratio(numerator: i64, denominator: i64) -> Self {
        let n = Self::from_i64(numerator).expect("numerator representable");
        let d = Self::from_i64(denominator).expect("denominator representable");
        n / d
    }

    fn from_count(count: u64) -> Self {
        Self::from_u64(count).expect("count representable")
    }
}

impl<T> Scalar for T where
    T: Num + Signed + Copy + PartialOrd + FromPrimitive + ToPrimitive + Debug + Send + Sync + 'static
{
}

/// Floating-point scalar used for Euclidean geometry.
pub trait RealScalar: Scalar + Float {
    fn from_f64_lossy(v: f64) -> Self {
        <Self as FromPrimitive>::from_f64(v).expect("finite value")
    }
}

impl<T> RealScalar for T where T: Scalar + Float {}

/// Compensated (Neumaier) summation.
///
/// For short sums of decimal constants this returns the correctly rounded
/// total, which keeps results independent of summation order.
pub fn compensated_sum<T: Scalar, I: IntoIterator<Item = T>>(values: I) -> T {
    let mut sum = T::zero();
    let mut carry = T::zero();
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            carry = carry + ((sum - t) + v);
        } else {
            carry = carry + ((v - t) + sum);
        }
        sum = t;
    }
    sum + carry
}

/// A point in the plane, in meters.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point2<F> {
    pub x: F,
    pub y: F,
}

impl<F> Point2<F> {
    pub const fn new(x: F, y: F) -> Self {
        Self { x, y }
    }
}

impl<F: RealScalar> Point2<F> {
    pub fn distance(&self, other: &Self) -> F {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn distance_squared(&self, other: &Self) -> F {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        dx * dx + dy * dy
    }

    /// Bearing from `self` to `other` in degrees, counterclockwise from +x,
    /// normalized to `[0, 360)`.
    pub fn bearing_deg(&self, other: &Self) -> F {
        let deg = (other.y - self.y).atan2(other.x - self.x).to_degrees();
        let full = F::from_f64_lossy(360.0);
        if deg < F::zero() {
            deg + full
        } else {
            deg
        }
    }

    pub fn cast<G: RealScalar>(&self) -> Point2<G> {
        Point2::new(
            G::from_f64_lossy(self.x.to_f64().expect("finite")),
            G::from_f64_lossy(self.y.to_f64().expect("finite")),
        )
    }
}

impl<F: Add<Output = F>> Add for Point2<F> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Self::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl<F: Sub<Output = F>> Sub for Point2<F> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        Self::new(self.x - rhs.x, self.y - rhs.y)
    }
}
