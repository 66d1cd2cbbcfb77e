//! Scalar abstraction shared by every module.
//!
//! All numerics are written against [`Real`], which is implemented for `f32`
//! and `f64`. The handful of kernels that have no portable generic form
//! (complex GEMM, `erfc`) are trait methods so each precision can dispatch to
//! the right backend.

use std::fmt;

use nalgebra::{Complex, DMatrix, DVector, RealField};
use num_traits::{FloatConst, ToPrimitive};

/// Dense complex matrix over the scalar `T`.
pub type CMatrix<T> = DMatrix<Complex<T>>;
/// Dense complex column vector over the scalar `T`.
pub type CVector<T> = DVector<Complex<T>>;

/// Real floating-point scalar usable by the simulator.
pub trait Real:
    RealField + Copy + FloatConst + ToPrimitive + fmt::Display + fmt::LowerExp + Send + Sync + 'static
{
    /// Complementary error function at full working precision.
    fn erfc(self) -> Self;

    /// `C = A * B` for column-major complex matrices.
    fn complex_gemm(a: &CMatrix<Self>, b: &CMatrix<Self>) -> CMatrix<Self>;

    /// Machine epsilon of the type.
    fn eps() -> Self;
}

impl Real for f64 {
    fn erfc(self) -> Self {
        libm::erfc(self)
    }

    fn complex_gemm(a: &CMatrix<Self>, b: &CMatrix<Self>) -> CMatrix<Self> {
        let (m, k) = a.shape();
        assert_eq!(k, b.nrows(), "gemm inner dimension mismatch");
        let n = b.ncols();
        let mut c = CMatrix::<f64>::zeros(m, n);
        if m == 0 || n == 0 || k == 0 {
            return c;
        }
        // SAFETY: Complex<f64> is repr(C) { re, im }, layout-identical to [f64; 2].
        // All three buffers are contiguous column-major with the given extents.
        unsafe {
            matrixmultiply::zgemm(
                matrixmultiply::CGemmOption::Standard,
                matrixmultiply::CGemmOption::Standard,
                m,
                k,
                n,
                [1.0, 0.0],
                a.as_ptr() as *const [f64; 2],
                1,
                m as isize,
                b.as_ptr() as *const [f64; 2],
                1,
                k as isize,
                [0.0, 0.0],
                c.as_mut_ptr() as *mut [f64; 2],
                1,
                m as isize,
            );
        }
        c
    }

    fn eps() -> Self {
        f64::EPSILON
    }
}

impl Real for f32 {
    fn erfc(self) -> Self {
        libm::erfcf(self)
    }

    fn complex_gemm(a: &CMatrix<Self>, b: &CMatrix<Self>) -> CMatrix<Self> {
        let (m, k) = a.shape();
        assert_eq!(k, b.nrows(), "gemm inner dimension mismatch");
        let n = b.ncols();
        let mut c = CMatrix::<f32>::zeros(m, n);
        if m == 0 || n == 0 || k == 0 {
            return c;
        }
        // SAFETY: see the f64 implementation.
        unsafe {
            matrixmultiply::cgemm(
                matrixmultiply::CGemmOption::Standard,
                matrixmultiply::CGemmOption::Standard,
                m,
                k,
                n,
                [1.0, 0.0],
                a.as_ptr() as *const [f32; 2],
                1,
                m as isize,
                b.as_ptr() as *const [f32; 2],
                1,
                k as isize,
                [0.0, 0.0],
                c.as_mut_ptr() as *mut [f32; 2],
                1,
                m as isize,
            );
        }
        c
    }

    fn eps() -> Self {
        f32::EPSILON
    }
}

/// Converts an `f64` literal into `T`.
#[inline]
pub fn lit<T: Real>(x: f64) -> T {
    nalgebra::convert(x)
}

/// Lossy conversion back to `f64` for reporting.
#[inline]
pub fn to_f64<T: Real>(x: T) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

#[inline]
pub fn cplx<T: Real>(re: T, im: T) -> Complex<T> {
    Complex::new(re, im)
}

#[inline]
pub fn creal<T: Real>(re: T) -> Complex<T> {
    Complex::new(re, T::zero())
}

/// `A * B` through the precision-specific GEMM kernel.
#[inline]
pub fn matmul<T: Real>(a: &CMatrix<T>, b: &CMatrix<T>) -> CMatrix<T> {
    T::complex_gemm(a, b)
}

/// `A * B^†`.
pub fn matmul_adj_right<T: Real>(a: &CMatrix<T>, b: &CMatrix<T>) -> CMatrix<T> {
    T::complex_gemm(a, &b.adjoint())
}

/// `A^† * B`.
pub fn matmul_adj_left<T: Real>(a: &CMatrix<T>, b: &CMatrix<T>) -> CMatrix<T> {
    T::complex_gemm(&a.adjoint(), b)
}
