//! Scalar abstraction shared by every numeric routine in the crate.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Floating-point scalar the model and the EM engine are generic over.
///
/// Implemented for `f32` and `f64`. Tolerances quoted throughout the crate
/// assume `f64`; `f32` works but converges to proportionally looser bounds.
pub trait Real:
    Float + FloatConst + FromPrimitive + ToPrimitive + Debug + Display + Default + Sum + Send + Sync + 'static
{
    /// Lossy conversion from an `f64` literal.
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("f64 literal representable")
    }

    /// Conversion from a pixel index or count.
    fn from_index(i: usize) -> Self {
        Self::from_usize(i).expect("index representable")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Neumaier compensated accumulator.
///
/// Grid sums in the engine are taken in a fixed row-major order through this
/// accumulator, so results are reproducible and accurate to a few ulps
/// regardless of image size.
#[derive(Clone, Copy, Debug, Default)]
pub struct CompensatedSum<T> {
    sum: T,
    carry: T,
}

impl<T: Real> CompensatedSum<T> {
    pub fn new() -> Self {
        Self {
            sum: T::zero(),
            carry: T::zero(),
        }
    }

    #[inline]
    pub fn add(&mut self, v: T) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.carry = self.carry + ((self.sum - t) + v);
        } else {
            self.carry = self.carry + ((v - t) + self.sum);
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> T {
        self.sum + self.carry
    }
}

/// Sums a slice in a permutation-invariant way: the terms are sorted before
/// accumulation, so reordering the input yields a bitwise-identical result.
pub(crate) fn sorted_sum<T: Real>(terms: &mut [T]) -> T {
    terms.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let mut acc = CompensatedSum::new();
    for &t in terms.iter() {
        acc.add(t);
    }
    acc.value()
}

/// Unevaluated sum `hi + lo` carrying about twice the working precision.
/// Products use a fused multiply-add to recover their rounding error.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TwoFold<T> {
    pub hi: T,
    pub lo: T,
}

impl<T: Real> TwoFold<T> {
    pub fn new(v: T) -> Self {
        Self { hi: v, lo: T::zero() }
    }

    fn renormalized(hi: T, lo: T) -> Self {
        let s = hi + lo;
        Self { hi: s, lo: lo - (s - hi) }
    }

    /// Exact `a·b`.
    pub fn product(a: T, b: T) -> Self {
        let p = a * b;
        Self { hi: p, lo: a.mul_add(b, -p) }
    }

    pub fn add(self, o: Self) -> Self {
        let s = self.hi + o.hi;
        let bb = s - self.hi;
        let err = (self.hi - (s - bb)) + (o.hi - bb);
        Self::renormalized(s, err + self.lo + o.lo)
    }

    pub fn sub(self, o: Self) -> Self {
        self.add(o.neg())
    }

    pub fn neg(self) -> Self {
        Self { hi: -self.hi, lo: -self.lo }
    }

    pub fn mul(self, o: Self) -> Self {
        let p = Self::product(self.hi, o.hi);
        Self::renormalized(p.hi, p.lo + (self.hi * o.lo + self.lo * o.hi))
    }

    /// Multiplication by a power of two, exact barring overflow.
    pub fn scale(self, k: T) -> Self {
        Self { hi: self.hi * k, lo: self.lo * k }
    }

    pub fn value(self) -> T {
        self.hi + self.lo
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let mut acc = CompensatedSum::<f64>::new();
        acc.add(1.0);
        for _ in 0..10_000 {
            acc.add(1e-16);
        }
        acc.add(-1.0);
        assert!((acc.value() - 1e-12).abs() < 1e-24);
    }

    #[test]
    fn two_fold_survives_cancellation() {
        let big = TwoFold::product(1e8f64 + 1.0, 1e8 - 1.0);
        let diff = big.sub(TwoFold::product(1e8, 1e8));
        assert_eq!(diff.value(), -1.0);
        let naive = (1e8f64 + 1.0) * (1e8 - 1.0) - 1e8 * 1e8;
        assert_eq!(naive, 0.0);
        let x = TwoFold::new(1.0 / 3.0f64);
        let near_one = x.mul(TwoFold::new(3.0));
        assert!((near_one.hi - 1.0).abs() <= f64::EPSILON && near_one.lo.abs() < 1e-16);
    }

    #[test]
    fn sorted_sum_is_order_invariant() {
        let mut a = [0.1f64, 1e10, -3.3, 7.0e-8, 2.5];
        let mut b = [2.5f64, 7.0e-8, 0.1, -3.3, 1e10];
        assert_eq!(sorted_sum(&mut a).to_bits(), sorted_sum(&mut b).to_bits());
    }
}
