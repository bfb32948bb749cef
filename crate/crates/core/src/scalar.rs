//! Element type and the handful of transcendental functions the crate needs.
//!
//! 64-bit floats are the default. The `f32` feature switches every tensor to
//! single precision for speed runs.

#[cfg(not(feature = "f32"))]
pub type Scalar = f64;
#[cfg(feature = "f32")]
pub type Scalar = f32;

#[cfg(not(feature = "f32"))]
mod imp {
    #[inline]
    pub fn sqrt(x: f64) -> f64 {
        libm::sqrt(x)
    }
    #[inline]
    pub fn exp(x: f64) -> f64 {
        libm::exp(x)
    }
    #[inline]
    pub fn log10(x: f64) -> f64 {
        libm::log10(x)
    }
    #[inline]
    pub fn sin(x: f64) -> f64 {
        libm::sin(x)
    }
    #[inline]
    pub fn cos(x: f64) -> f64 {
        libm::cos(x)
    }
    #[inline]
    pub fn floor(x: f64) -> f64 {
        libm::floor(x)
    }
    #[inline]
    pub fn ceil(x: f64) -> f64 {
        libm::ceil(x)
    }
}

#[cfg(feature = "f32")]
mod imp {
    #[inline]
    pub fn sqrt(x: f32) -> f32 {
        libm::sqrtf(x)
    }
    #[inline]
    pub fn exp(x: f32) -> f32 {
        libm::expf(x)
    }
    #[inline]
    pub fn log10(x: f32) -> f32 {
        libm::log10f(x)
    }
    #[inline]
    pub fn sin(x: f32) -> f32 {
        libm::sinf(x)
    }
    #[inline]
    pub fn cos(x: f32) -> f32 {
        libm::cosf(x)
    }
    #[inline]
    pub fn floor(x: f32) -> f32 {
        libm::floorf(x)
    }
    #[inline]
    pub fn ceil(x: f32) -> f32 {
        libm::ceilf(x)
    }
}

pub use imp::{ceil, cos, exp, floor, log10, sin, sqrt};

/// `C = alpha * A * B + beta * C` over strided row/column layouts.
///
/// Panics if a slice is too short for the given dimensions and strides.
#[allow(clippy::too_many_arguments)]
pub(crate) fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[Scalar],
    rsa: usize,
    csa: usize,
    b: &[Scalar],
    rsb: usize,
    csb: usize,
    beta: Scalar,
    c: &mut [Scalar],
    rsc: usize,
    csc: usize,
) {
    if m == 0 || n == 0 {
        return;
    }
    let span = |rows: usize, cols: usize, rs: usize, cs: usize| {
        if rows == 0 || cols == 0 {
            0
        } else {
            (rows - 1) * rs + (cols - 1) * cs + 1
        }
    };
    assert!(a.len() >= span(m, k, rsa, csa), "gemm: A too short");
    assert!(b.len() >= span(k, n, rsb, csb), "gemm: B too short");
    assert!(c.len() >= span(m, n, rsc, csc), "gemm: C too short");
    // SAFETY: the asserts above bound every index the kernel can touch.
    unsafe {
        #[cfg(not(feature = "f32"))]
        let f = matrixmultiply::dgemm;
        #[cfg(feature = "f32")]
        let f = matrixmultiply::sgemm;
        f(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa as isize,
            csa as isize,
            b.as_ptr(),
            rsb as isize,
            csb as isize,
            beta,
            c.as_mut_ptr(),
            rsc as isize,
            csc as isize,
        );
    }
}
