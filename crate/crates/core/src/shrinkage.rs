//! Spectral maps for singular value shrinkage.
//!
//! `H(σ)` is the almost-sure limit of the top empirical singular value when a
//! unit-noise matrix carries a planted singular value `σ`; shrinkage inverts
//! it above the bulk edge `H(1)` and zeroes everything below.

use crate::error::{Error, Result};
use crate::linalg::{op_norm, svd, Matrix};
use crate::scalar::Real;

pub const DEFAULT_DELTA: f64 = 0.01;

/// Limiting aspect ratio `γ = m/n`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AspectRatio<T>(T);

impl<T: Real> AspectRatio<T> {
    pub fn new(gamma: T) -> Result<Self> {
        if !(gamma > T::zero()) || !gamma.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "aspect ratio must be positive, got {gamma}"
            )));
        }
        Ok(AspectRatio(gamma))
    }

    /// `m/n` of a concrete matrix shape.
    pub fn of_shape(m: usize, n: usize) -> Result<Self> {
        Self::new(T::of(m as f64) / T::of(n as f64))
    }

    pub fn square() -> Self {
        AspectRatio(T::one())
    }

    #[inline]
    pub fn gamma(&self) -> T {
        self.0
    }

    /// `γ^{1/2} + γ^{−1/2}`, always at least 2.
    pub fn h_const(&self) -> T {
        let s = self.folded().sqrt();
        s + s.recip()
    }

    /// The bulk edge `H(1) = γ^{1/4} + γ^{−1/4}`.
    pub fn bulk_edge(&self) -> T {
        let q = self.folded().sqrt().sqrt();
        q + q.recip()
    }

    /// `max(γ, 1/γ)`, so that symmetric quantities agree bit for bit on
    /// reciprocal pairs.
    fn folded(&self) -> T {
        self.0.max(self.0.recip())
    }
}

/// `H(σ) = √((σ + γ^{−1/2}/σ)(σ + γ^{1/2}/σ))` for `σ ≥ 1`, and `H(1)` below.
///
/// Evaluated as `hypot(H(1), σ − 1/σ)`, which is the same expression expanded.
pub fn big_h<T: Real>(sigma: T, gamma: AspectRatio<T>) -> T {
    let edge = gamma.bulk_edge();
    if sigma <= T::one() {
        return edge;
    }
    edge.hypot(sigma - sigma.recip())
}

fn domain_slack<T: Real>() -> T {
    T::of(1e-12).max(T::epsilon() * T::of(64.0))
}

/// Closed-form inverse of `H` on `[H(1), ∞)`:
/// `H⁻¹(y) = (1/√2)·(y² − h + √((y² − h)² − 4))^{1/2}` with `h = γ^{1/2} + γ^{−1/2}`.
///
/// Computed as `(t + √(t² + 4))/2` with `t = √((y − H(1))(y + H(1)))`, which
/// avoids the cancellation of the textbook form near the edge. Inputs within
/// `1e-12` below `H(1)` are clamped up to it.
pub fn big_h_inv<T: Real>(y: T, gamma: AspectRatio<T>) -> Result<T> {
    let edge = gamma.bulk_edge();
    if !(y >= edge - domain_slack::<T>()) || !y.is_finite() {
        return Err(Error::Domain {
            what: "H⁻¹",
            value: y.as_f64(),
        });
    }
    let y = y.max(edge);
    let t = ((y - edge) * (y + edge)).sqrt();
    let two = T::of(2.0);
    Ok(((t + t.hypot(two)) / two).max(T::one()))
}

/// Output of a shrinkage rule: shrunk values (same length as the input) and
/// the number of non-zero entries.
#[derive(Clone, Debug, PartialEq)]
pub struct Shrunk<T> {
    pub values: Vec<T>,
    pub rank: usize,
}

fn check_spectrum<T: Real>(sigma0: &[T]) -> Result<()> {
    if sigma0.iter().any(|s| !(*s >= T::zero()) || !s.is_finite()) {
        return Err(Error::InvalidParameter(
            "singular values must be finite and non-negative".into(),
        ));
    }
    if sigma0.windows(2).any(|w| w[0] < w[1]) {
        return Err(Error::InvalidParameter(
            "singular values must be sorted descending".into(),
        ));
    }
    Ok(())
}

fn check_delta<T: Real>(delta: T) -> Result<()> {
    if !(delta >= T::zero()) || !delta.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "delta must be non-negative, got {delta}"
        )));
    }
    Ok(())
}

fn shrink_with<T: Real>(
    sigma0: &[T],
    threshold: T,
    map: impl Fn(T) -> Result<T>,
) -> Result<Shrunk<T>> {
    let mut values = Vec::with_capacity(sigma0.len());
    let mut rank = 0;
    for &s in sigma0 {
        if s >= threshold {
            values.push(map(s)?);
            rank += 1;
        } else {
            values.push(T::zero());
        }
    }
    Ok(Shrunk { values, rank })
}

/// Adaptive rule driven by the estimated Fisher information `Î`:
/// `σ ↦ Î^{−1/2}·H⁻¹(Î^{−1/2}·σ)` when `σ ≥ (1+δ)·H(1)·Î^{1/2}`, else 0.
pub fn shrink_adaptive<T: Real>(
    sigma0: &[T],
    i_hat: T,
    delta: T,
    gamma: AspectRatio<T>,
) -> Result<Shrunk<T>> {
    check_spectrum(sigma0)?;
    check_delta(delta)?;
    if !(i_hat > T::zero()) || !i_hat.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "estimated Fisher information must be positive, got {i_hat}"
        )));
    }
    let root = i_hat.sqrt();
    let inv_root = root.recip();
    let threshold = (T::one() + delta) * gamma.bulk_edge() * root;
    shrink_with(sigma0, threshold, |s| {
        Ok(inv_root * big_h_inv(inv_root * s, gamma)?)
    })
}

/// Known-variance rule: `σ ↦ s·H⁻¹(σ/s)` when `σ ≥ (1+δ)·H(1)·s`, else 0,
/// with `s` the noise standard deviation.
pub fn shrink_baseline<T: Real>(
    sigma0: &[T],
    noise_sd: T,
    delta: T,
    gamma: AspectRatio<T>,
) -> Result<Shrunk<T>> {
    check_spectrum(sigma0)?;
    check_delta(delta)?;
    if !(noise_sd > T::zero()) || !noise_sd.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "noise standard deviation must be positive, got {noise_sd}"
        )));
    }
    let threshold = (T::one() + delta) * gamma.bulk_edge() * noise_sd;
    shrink_with(sigma0, threshold, |s| {
        Ok(noise_sd * big_h_inv(s / noise_sd, gamma)?)
    })
}

/// The scalar map `f(σ) = Î^{−1/2}·H⁻¹(Î^{−1/2}σ)` for `σ ≥ Î^{1/2}·H(1)`,
/// zero below: the adaptive rule without the `(1+δ)` margin.
pub fn adaptive_map<T: Real>(i_hat: T, gamma: AspectRatio<T>) -> impl Fn(T) -> T {
    let root = i_hat.sqrt();
    let inv_root = root.recip();
    let tau = root * gamma.bulk_edge();
    move |s| {
        if s >= tau {
            inv_root * big_h_inv(inv_root * s, gamma).unwrap_or_else(|_| T::one())
        } else {
            T::zero()
        }
    }
}

/// Hölder constants `(L, α) = (4·Î⁻¹·ζ^{3/4}, 1/4)` of [`adaptive_map`] on
/// `[Î^{1/2}·H(1), ζ]`.
pub fn adaptive_map_holder<T: Real>(i_hat: T, zeta: T) -> (T, T) {
    (T::of(4.0) / i_hat * zeta.powf(T::of(0.75)), T::of(0.25))
}

/// Outcome of [`perturbation_bound_check`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PerturbationReport<T> {
    /// `‖f(A_k) − f(Ã_k)‖_op`
    pub lhs: T,
    /// `4kL‖E‖^α + (2/ϑ)·f(σ_k(A))·‖E‖`
    pub rhs: T,
    pub hypothesis_met: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    Holds,
    Fails,
    HypothesisNotMet,
}

impl<T: Real> PerturbationReport<T> {
    pub fn verdict(&self) -> Verdict {
        if !self.hypothesis_met {
            Verdict::HypothesisNotMet
        } else if self.lhs <= self.rhs + T::of(1e-9) {
            Verdict::Holds
        } else {
            Verdict::Fails
        }
    }
}

/// `P_k · diag(f(s_1..s_k)) · Q_kᵀ` from the top-`k` singular triplets.
pub fn spectral_apply<T: Real>(a: &Matrix<T>, k: usize, f: impl Fn(T) -> T) -> Result<Matrix<T>> {
    let dec = svd(a)?;
    if k > dec.rank_capacity() {
        return Err(Error::InvalidParameter(format!(
            "rank {k} exceeds min dimension {}",
            dec.rank_capacity()
        )));
    }
    let values: Vec<T> = dec.singular_values[..k].iter().map(|&s| f(s)).collect();
    Ok(dec.compose(&values))
}

/// Evaluates both sides of the nonlinear rank-`k` perturbation bound
/// `‖f(A_k) − f(Ã_k)‖ ≤ 4kL‖E‖^α + (2/ϑ)f(σ_k(A))‖E‖` for `Ã = A + E`,
/// where `f` is `(L, α)`-Hölder on `[τ, ζ]`.
///
/// The bound is only claimed when `ζ > σ_1(A)`,
/// `σ_k(A) > max(σ_{k+1}(A), τ) + ϑ` and `ϑ > 2‖E‖`; the report records
/// whether that hypothesis held.
#[allow(clippy::too_many_arguments)]
pub fn perturbation_bound_check<T: Real>(
    a: &Matrix<T>,
    e: &Matrix<T>,
    f: impl Fn(T) -> T,
    k: usize,
    holder: (T, T),
    window: (T, T),
    gap: T,
) -> Result<PerturbationReport<T>> {
    if k == 0 {
        return Err(Error::InvalidParameter("rank must be at least 1".into()));
    }
    let (lip, alpha) = holder;
    let (tau, zeta) = window;
    let perturbed = a.add(e)?;
    let sa = crate::linalg::singular_values(a)?;
    if k > sa.len() {
        return Err(Error::InvalidParameter(format!(
            "rank {k} exceeds min dimension {}",
            sa.len()
        )));
    }
    let e_norm = op_norm(e)?;
    let next = sa.get(k).copied().unwrap_or_else(T::zero);
    let hypothesis_met =
        zeta > sa[0] && sa[k - 1] > next.max(tau) + gap && gap > T::of(2.0) * e_norm;

    let fa = spectral_apply(a, k, &f)?;
    let fb = spectral_apply(&perturbed, k, &f)?;
    let lhs = op_norm(&fa.sub(&fb)?)?;
    let rhs = T::of(4.0) * T::of(k as f64) * lip * e_norm.powf(alpha)
        + T::of(2.0) / gap * f(sa[k - 1]) * e_norm;
    Ok(PerturbationReport {
        lhs,
        rhs,
        hypothesis_met,
    })
}
