//! Closed-form large-`n` predictions for the estimators.
//!
//! Every function returns 0 (never NaN) below its recovery threshold.

use crate::scalar::Real;
use crate::shrinkage::{big_h, AspectRatio};

/// A point on the prediction curves.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Prediction<T> {
    pub sigma: T,
    pub gamma: AspectRatio<T>,
    /// Effective noise precision: `I_W` for the adaptive estimator,
    /// `1/Var(W)` for the baseline.
    pub t: T,
    pub overlap: T,
    pub error: T,
}

impl<T: Real> Prediction<T> {
    pub fn at(sigma: T, t: T, gamma: AspectRatio<T>) -> Self {
        Prediction {
            sigma,
            gamma,
            t,
            overlap: overlap_limit(sigma, t, gamma),
            error: error_limit(sigma, t),
        }
    }
}

/// Limit of `σ_min(Û_lᵀU_l)` at signal strength `σ` and precision `t`:
///
/// `G(σ; t) = ((1 − t⁻²σ⁻⁴) / (1 + min(γ^{1/2}, γ^{−1/2})·t⁻¹σ⁻²))^{1/2}`
///
/// for `σ²t > 1`, zero otherwise.
pub fn overlap_limit<T: Real>(sigma: T, t: T, gamma: AspectRatio<T>) -> T {
    let snr = sigma * sigma * t;
    if !(snr > T::one()) {
        return T::zero();
    }
    let s = gamma.gamma().sqrt();
    let c = s.min(s.recip());
    let inv = snr.recip();
    ((T::one() - inv * inv) / (T::one() + c * inv)).sqrt()
}

/// Left/right singular vector overlap limits for unit-variance noise:
/// `G⁽¹⁾` uses `γ^{1/2}`, `G⁽²⁾` uses `γ^{−1/2}`. Both are 0 for `σ ≤ 1`.
pub fn overlap_limits_lr<T: Real>(sigma: T, gamma: AspectRatio<T>) -> (T, T) {
    if !(sigma > T::one()) {
        return (T::zero(), T::zero());
    }
    let s = gamma.gamma().sqrt();
    let inv2 = (sigma * sigma).recip();
    let num = T::one() - inv2 * inv2;
    let g1 = (num / (T::one() + s * inv2)).sqrt();
    let g2 = (num / (T::one() + s.recip() * inv2)).sqrt();
    (g1, g2)
}

/// Limit of the top scaled empirical singular value produced by a planted
/// value `σ` under unit-variance noise; this is `H(σ)`.
pub fn singular_value_limit<T: Real>(sigma: T, gamma: AspectRatio<T>) -> T {
    big_h(sigma, gamma)
}

/// Limit of `(mn)^{−1/4}‖X̂ − X‖_op`: `min(σ₁, t^{−1/2})`.
pub fn error_limit<T: Real>(sigma1: T, t: T) -> T {
    sigma1.min(t.sqrt().recip())
}

/// Minimax error constants in `(mn)^{1/4}` units, for the rank-constrained
/// and unconstrained problems:
/// `(max(γ^{1/4}, γ^{−1/4})·I_W^{−1/2}, (γ^{1/4} + γ^{−1/4})·I_W^{−1/2})`.
pub fn minimax_limits<T: Real>(gamma: AspectRatio<T>, i_w: T) -> (T, T) {
    let q = gamma.gamma().sqrt().sqrt();
    let scale = i_w.sqrt().recip();
    (q.max(q.recip()) * scale, (q + q.recip()) * scale)
}
