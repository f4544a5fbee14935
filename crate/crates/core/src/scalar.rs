//! Field abstraction shared by the real and complex code paths.

use nalgebra::ComplexField;
use num_complex::Complex64;
use std::fmt::Debug;

/// Matrix element type: `f64` or `Complex64`.
pub trait Scalar: ComplexField<RealField = f64> + Copy + Send + Sync + Debug + 'static {
    fn lift(x: f64) -> Self;
    fn conj(self) -> Self;
    fn re(self) -> f64;
    fn im(self) -> f64;
    fn abs_sqr(self) -> f64;
    fn to_c64(self) -> Complex64;
    /// Builds a random element from two uniform draws; the second is ignored for reals.
    fn from_parts(re: f64, im: f64) -> Self;
}

impl Scalar for f64 {
    #[inline]
    fn lift(x: f64) -> Self {
        x
    }
    #[inline]
    fn conj(self) -> Self {
        self
    }
    #[inline]
    fn re(self) -> f64 {
        self
    }
    #[inline]
    fn im(self) -> f64 {
        0.0
    }
    #[inline]
    fn abs_sqr(self) -> f64 {
        self * self
    }
    #[inline]
    fn to_c64(self) -> Complex64 {
        Complex64::new(self, 0.0)
    }
    #[inline]
    fn from_parts(re: f64, _im: f64) -> Self {
        re
    }
}

impl Scalar for Complex64 {
    #[inline]
    fn lift(x: f64) -> Self {
        Complex64::new(x, 0.0)
    }
    #[inline]
    fn conj(self) -> Self {
        Complex64::conj(&self)
    }
    #[inline]
    fn re(self) -> f64 {
        self.re
    }
    #[inline]
    fn im(self) -> f64 {
        self.im
    }
    #[inline]
    fn abs_sqr(self) -> f64 {
        self.norm_sqr()
    }
    #[inline]
    fn to_c64(self) -> Complex64 {
        self
    }
    #[inline]
    fn from_parts(re: f64, im: f64) -> Self {
        Complex64::new(re, im)
    }
}

/// `<a|b>` with the first argument conjugated.
#[inline]
pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    // Four independent accumulators let the loop pipeline.
    let mut acc = [T::zero(); 4];
    let (ac, ar) = (a.chunks_exact(4), a.chunks_exact(4).remainder());
    let (bc, br) = (b.chunks_exact(4), b.chunks_exact(4).remainder());
    for (x, y) in ac.zip(bc) {
        for l in 0..4 {
            acc[l] += x[l].conj() * y[l];
        }
    }
    for (x, y) in ar.iter().zip(br) {
        acc[0] += x.conj() * *y;
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3])
}

#[inline]
pub fn norm<T: Scalar>(a: &[T]) -> f64 {
    a.iter().map(|x| x.abs_sqr()).sum::<f64>().sqrt()
}

/// `y += alpha * x`
#[inline]
pub fn axpy<T: Scalar>(alpha: T, x: &[T], y: &mut [T]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * *xi;
    }
}

#[inline]
pub fn scale<T: Scalar>(alpha: f64, x: &mut [T]) {
    let a = T::lift(alpha);
    for xi in x.iter_mut() {
        *xi *= a;
    }
}
