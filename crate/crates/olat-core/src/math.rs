//! Scalar and small-vector math helpers.
//!
//! Transcendentals are routed through `libm` so the crate stays `no_std`
//! and results do not depend on the platform libm.

/// e^x.
#[inline]
pub fn exp(x: f64) -> f64 {
    libm::exp(x)
}

/// Natural logarithm.
#[inline]
pub fn ln(x: f64) -> f64 {
    libm::log(x)
}

/// Square root.
#[inline]
pub fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

/// x^y for real y.
#[inline]
pub fn powf(x: f64, y: f64) -> f64 {
    libm::pow(x, y)
}

/// Sine.
#[inline]
pub fn sin(x: f64) -> f64 {
    libm::sin(x)
}

/// Cosine.
#[inline]
pub fn cos(x: f64) -> f64 {
    libm::cos(x)
}

/// Pre-activations beyond this magnitude are clamped before the logistic,
/// keeping occlusion codes strictly inside (0, 1) in f64 arithmetic
/// (sigmoid(36.8) already rounds to 1.0).
pub const SIGMOID_CLAMP: f64 = 30.0;

/// Logistic function with clamped input; output is strictly in (0, 1).
#[inline]
pub fn sigmoid(x: f64) -> f64 {
    let x = x.clamp(-SIGMOID_CLAMP, SIGMOID_CLAMP);
    1.0 / (1.0 + exp(-x))
}

/// Derivative of [`sigmoid`] expressed through its input; zero in the
/// clamped region.
#[inline]
pub fn sigmoid_grad(x: f64) -> f64 {
    if x.abs() >= SIGMOID_CLAMP {
        return 0.0;
    }
    let s = sigmoid(x);
    s * (1.0 - s)
}

/// Squared Euclidean distance between two 3-D points.
#[inline]
pub fn dist_sq(a: [f64; 3], b: [f64; 3]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    dx * dx + dy * dy + dz * dz
}

/// Inner product of two equal-length slices.
#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b) {
        acc += x * y;
    }
    acc
}

/// `y += alpha * x`, element-wise.
#[inline]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Euclidean norm of a slice.
#[inline]
pub fn norm(a: &[f64]) -> f64 {
    sqrt(dot(a, a))
}

/// log(1 + sum_j exp(e_j)) computed without overflow.
///
/// Shifts by the running maximum of {0, e_0, ..} so the naive value is
/// reproduced exactly wherever the naive form does not overflow.
pub fn log1p_sum_exp(exponents: &[f64]) -> f64 {
    let mut m = 0.0f64;
    for &e in exponents {
        if e > m {
            m = e;
        }
    }
    let mut s = exp(-m); // the implicit "1" term
    for &e in exponents {
        s += exp(e - m);
    }
    m + ln(s)
}

/// True when every element is finite.
#[inline]
pub fn all_finite(xs: &[f64]) -> bool {
    xs.iter().all(|x| x.is_finite())
}
