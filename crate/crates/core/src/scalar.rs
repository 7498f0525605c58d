//! Scalar abstraction shared by the weight and regularization code.
//!
//! `Scalar` covers exact rationals as well as floats; `Real` adds the
//! transcendental functions the trajectory evaluators need.

use num_rational::Ratio;
use num_traits::{Float, Num, NumAssign};
use std::fmt::Debug;

pub trait Scalar: Num + NumAssign + Copy + PartialOrd + Debug + Send + Sync + 'static {
    fn from_count(k: u64) -> Self;
    fn from_ratio(num: i64, den: i64) -> Self;
    fn to_f64(self) -> f64;
}

macro_rules! float_scalar {
    ($t:ty) => {
        impl Scalar for $t {
            fn from_count(k: u64) -> Self {
                k as $t
            }
            fn from_ratio(num: i64, den: i64) -> Self {
                (num as f64 / den as f64) as $t
            }
            fn to_f64(self) -> f64 {
                self as f64
            }
        }
    };
}
float_scalar!(f32);
float_scalar!(f64);

impl Scalar for Ratio<i64> {
    fn from_count(k: u64) -> Self {
        Ratio::from_integer(k as i64)
    }
    fn from_ratio(num: i64, den: i64) -> Self {
        Ratio::new(num, den)
    }
    fn to_f64(self) -> f64 {
        *self.numer() as f64 / *self.denom() as f64
    }
}

pub trait Real: Scalar + Float {}
impl<T: Scalar + Float> Real for T {}

/// Compensated (Kahan) accumulator. With exact arithmetic the
/// compensation term stays zero.
#[derive(Clone, Copy, Debug)]
pub struct KahanSum<T> {
    sum: T,
    comp: T,
}

impl<T: Scalar> KahanSum<T> {
    pub fn new() -> Self {
        Self { sum: T::zero(), comp: T::zero() }
    }

    pub fn add(&mut self, x: T) {
        let y = x - self.comp;
        let t = self.sum + y;
        self.comp = (t - self.sum) - y;
        self.sum = t;
    }

    pub fn value(&self) -> T {
        self.sum
    }
}

impl<T: Scalar> Default for KahanSum<T> {
    fn default() -> Self {
        Self::new()
    }
}
