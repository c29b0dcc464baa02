//! Small scalar and vector helpers shared across modules.

use nalgebra::DVector;
#[allow(unused_imports)]
use num_traits::Float;

/// `ln(Σ exp(aᵢ))`, stable for large magnitudes. Returns `-inf` for an empty input.
pub fn log_sum_exp<I: IntoIterator<Item = f64> + Clone>(values: I) -> f64 {
    let max = values
        .clone()
        .into_iter()
        .fold(f64::NEG_INFINITY, |acc, v| acc.max(v));
    if max == f64::NEG_INFINITY || !max.is_finite() {
        return max;
    }
    let sum: f64 = values.into_iter().map(|v| (v - max).exp()).sum();
    max + sum.ln()
}

/// `ln(1 + e^z)`.
pub fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// `ln(ln(1 + e^z))`, accurate far into the left tail.
pub fn ln_softplus(z: f64) -> f64 {
    if z < -20.0 {
        z - 0.5 * z.exp()
    } else {
        softplus(z).ln()
    }
}

/// `1 / (1 + e^{-z})`.
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Bisection for an increasing function on `[lo, hi]` with `f(lo) ≤ 0 ≤ f(hi)`.
pub fn bisect_increasing<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Euclidean distance between `a/‖a‖` and `b/‖b‖`; `None` if either is zero.
pub fn unit_distance(a: &DVector<f64>, b: &DVector<f64>) -> Option<f64> {
    let na = a.norm();
    let nb = b.norm();
    if na == 0.0 || nb == 0.0 || !na.is_finite() || !nb.is_finite() {
        return None;
    }
    Some((a / na - b / nb).norm())
}

/// Median of a slice (average of the middle pair for even lengths). NaN for empty input.
pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let mid = v.len() / 2;
    if v.len() % 2 == 1 {
        v[mid]
    } else {
        0.5 * (v[mid - 1] + v[mid])
    }
}
