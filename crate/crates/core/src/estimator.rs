//! The adaptive denoising pipeline and the known-variance baseline.
//!
//! 1. `Ȳ` is the average entry.
//! 2. Kernel estimates `p̂`, `p̂'` are fitted to the centred entries `Y_kl − Ȳ`.
//! 3. `f̂(x) = −p̂'(x)/(p̂(x) + ε)` is applied entrywise to `Y`, giving `X̂⁽⁰⁾`;
//!    `Î = mean((p̂'/(p̂ + ε))²  at Y_ij − Ȳ) + ε` estimates the Fisher
//!    information of the noise.
//! 4. `X̂⁽⁰⁾ = (mn)^{1/4}·Û·Σ̂⁽⁰⁾·V̂ᵀ` and the scaled singular values are shrunk
//!    by [`shrink_adaptive`].
//! 5. `X̂* = Î⁻¹·X̂⁽⁰⁾` and `X̂ = (mn)^{1/4}·Û·Σ̂·V̂ᵀ`.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kde::{default_bandwidths, mean_entry, KdeSettings, KernelEstimator};
use crate::linalg::{svd, Matrix};
use crate::noise::NoiseModel;
use crate::scalar::Real;
use crate::shrinkage::{shrink_adaptive, shrink_baseline, AspectRatio, DEFAULT_DELTA};

pub const DEFAULT_EPS: f64 = 0.001;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DenoiserParams<T> {
    /// Bandwidth of the density estimate.
    pub h: T,
    /// Bandwidth of the derivative estimate.
    pub h_prime: T,
    pub eps: T,
    pub delta: T,
    /// Evaluation settings shared by both estimates; the bandwidth stored here
    /// is ignored in favour of `h` / `h_prime`.
    pub kde: KdeSettings<T>,
}

impl<T: Real> DenoiserParams<T> {
    /// `ε = 0.001`, `δ = 0.01`, `h = 1.2·(mn)^{−1/5}`, `h' = (mn)^{−1/7}`,
    /// binned evaluation with 4096 nodes.
    pub fn defaults_for(m: usize, n: usize) -> Self {
        let (h, h_prime) = default_bandwidths(m, n);
        DenoiserParams {
            h,
            h_prime,
            eps: T::of(DEFAULT_EPS),
            delta: T::of(DEFAULT_DELTA),
            kde: KdeSettings::binned(h),
        }
    }

    pub fn exact(self) -> Self {
        DenoiserParams {
            kde: KdeSettings {
                mode: crate::kde::KdeMode::Exact,
                ..self.kde
            },
            ..self
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("h", self.h), ("h_prime", self.h_prime), ("eps", self.eps)] {
            if !(v > T::zero()) || !v.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        if !(self.delta >= T::zero()) || !self.delta.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "delta must be non-negative, got {}",
                self.delta
            )));
        }
        self.kde.with_bandwidth(self.h).validate()
    }
}

/// Output of the entrywise stage.
#[derive(Clone, Debug)]
pub struct Entrywise<T> {
    pub x0: Matrix<T>,
    pub i_hat: T,
    pub y_bar: T,
}

#[derive(Clone, Debug)]
pub struct DenoiseResult<T> {
    /// `f̂(Y)` entrywise.
    pub x0: Matrix<T>,
    /// `Î⁻¹·X̂⁽⁰⁾`.
    pub x_star: Matrix<T>,
    /// Rank-`k_hat` shrinkage estimate.
    pub x_hat: Matrix<T>,
    pub u_hat: Matrix<T>,
    pub v_hat: Matrix<T>,
    /// Singular values of `x0` divided by `(mn)^{1/4}`, descending.
    pub sigma0: Vec<T>,
    pub sigma_shrunk: Vec<T>,
    pub i_hat: T,
    pub k_hat: usize,
    pub y_bar: T,
}

/// Output of the known-variance baseline, which shrinks the SVD of `Y`
/// directly.
#[derive(Clone, Debug)]
pub struct BaselineResult<T> {
    pub x_bar: Matrix<T>,
    pub u_bar: Matrix<T>,
    pub v_bar: Matrix<T>,
    pub sigma0: Vec<T>,
    pub sigma_shrunk: Vec<T>,
    pub k_bar: usize,
}

fn check_observation<T: Real>(y: &Matrix<T>) -> Result<()> {
    y.check_finite()?;
    if y.rows().min(y.cols()) < 2 {
        return Err(Error::Dimension(format!(
            "need at least a 2x2 observation, got {}x{}",
            y.rows(),
            y.cols()
        )));
    }
    Ok(())
}

/// `(mn)^{1/4}`
pub fn spectral_scale<T: Real>(m: usize, n: usize) -> T {
    T::of((m * n) as f64).sqrt().sqrt()
}

/// Fitted score estimate `x ↦ −p̂'(x)/(p̂(x) + ε)`.
pub struct ScoreEstimate<T> {
    density: KernelEstimator<T>,
    slope: KernelEstimator<T>,
    eps: T,
}

impl<T: Real> ScoreEstimate<T> {
    pub fn fit(y: &Matrix<T>, y_bar: T, params: &DenoiserParams<T>) -> Result<Self> {
        let density = KernelEstimator::fit(
            y.as_slice(),
            y_bar,
            &params.kde.with_bandwidth(params.h),
            false,
        )?;
        let slope = KernelEstimator::fit(
            y.as_slice(),
            y_bar,
            &params.kde.with_bandwidth(params.h_prime),
            true,
        )?;
        Ok(ScoreEstimate {
            density,
            slope,
            eps: params.eps,
        })
    }

    #[inline]
    pub fn eval(&self, x: T) -> T {
        -self.slope.eval(x) / (self.density.eval(x) + self.eps)
    }

    pub fn density(&self) -> &KernelEstimator<T> {
        &self.density
    }

    pub fn slope(&self) -> &KernelEstimator<T> {
        &self.slope
    }
}

/// Entrywise score denoising plus the Fisher information estimate.
///
/// The denoiser is applied at `Y_ij`; `Î` is averaged over `Y_ij − Ȳ`.
pub fn denoise_entrywise<T: Real>(
    y: &Matrix<T>,
    params: &DenoiserParams<T>,
) -> Result<Entrywise<T>> {
    check_observation(y)?;
    params.validate()?;
    let y_bar = mean_entry(y);
    let score = ScoreEstimate::fit(y, y_bar, params)?;

    let x0: Vec<T> = y.as_slice().par_iter().map(|&v| score.eval(v)).collect();
    let squares: Vec<T> = y
        .as_slice()
        .par_iter()
        .map(|&v| {
            let s = score.eval(v - y_bar);
            s * s
        })
        .collect();
    // sequential sum keeps Î independent of the thread count
    let i_hat = squares.iter().copied().sum::<T>() / T::of(y.len() as f64) + params.eps;

    let x0 = Matrix::new(y.rows(), y.cols(), x0)?;
    Ok(Entrywise { x0, i_hat, y_bar })
}

/// The full adaptive estimator.
pub fn denoise_full<T: Real>(
    y: &Matrix<T>,
    params: &DenoiserParams<T>,
    gamma: AspectRatio<T>,
) -> Result<DenoiseResult<T>> {
    let Entrywise { x0, i_hat, y_bar } = denoise_entrywise(y, params)?;
    let (m, n) = y.shape();
    let scale = spectral_scale::<T>(m, n);

    let dec = svd(&x0)?;
    let sigma0: Vec<T> = dec.singular_values.iter().map(|&s| s / scale).collect();
    let shrunk = shrink_adaptive(&sigma0, i_hat, params.delta, gamma)?;
    let k_hat = shrunk.rank;
    let scaled: Vec<T> = shrunk.values[..k_hat].iter().map(|&s| s * scale).collect();
    let x_hat = dec.compose(&scaled);
    let x_star = x0.scale(i_hat.recip());

    Ok(DenoiseResult {
        x0,
        x_star,
        x_hat,
        u_hat: dec.u,
        v_hat: dec.v,
        sigma0,
        sigma_shrunk: shrunk.values,
        i_hat,
        k_hat,
        y_bar,
    })
}

/// Shrinks the SVD of `Y` itself with the known noise standard deviation.
pub fn baseline_estimate<T: Real>(
    y: &Matrix<T>,
    noise_sd: T,
    delta: T,
    gamma: AspectRatio<T>,
) -> Result<BaselineResult<T>> {
    check_observation(y)?;
    let (m, n) = y.shape();
    let scale = spectral_scale::<T>(m, n);
    let dec = svd(y)?;
    let sigma0: Vec<T> = dec.singular_values.iter().map(|&s| s / scale).collect();
    let shrunk = shrink_baseline(&sigma0, noise_sd, delta, gamma)?;
    let k_bar = shrunk.rank;
    let scaled: Vec<T> = shrunk.values[..k_bar].iter().map(|&s| s * scale).collect();
    let x_bar = dec.compose(&scaled);
    Ok(BaselineResult {
        x_bar,
        u_bar: dec.u,
        v_bar: dec.v,
        sigma0,
        sigma_shrunk: shrunk.values,
        k_bar,
    })
}

/// Entrywise `−p'_W(Y_ij)/(p_W(Y_ij) + ε)` using the true noise density.
pub fn oracle_denoise<T: Real>(y: &Matrix<T>, model: &NoiseModel<T>, eps: T) -> Result<Matrix<T>> {
    if matches!(model, NoiseModel::Tabulated(_)) {
        return Err(Error::Unsupported(
            "oracle denoising needs a closed-form density".into(),
        ));
    }
    if !(eps >= T::zero()) {
        return Err(Error::InvalidParameter(format!(
            "eps must be non-negative, got {eps}"
        )));
    }
    Matrix::new(
        y.rows(),
        y.cols(),
        y.as_slice()
            .iter()
            .map(|&v| model.oracle_score(eps, v))
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{singular_values, subspace_overlap};

    fn square() -> AspectRatio<f64> {
        AspectRatio::square()
    }

    #[test]
    fn constant_observation_is_finite() {
        let y = Matrix::<f64>::new(4, 5, vec![2.0; 20]).unwrap();
        let params = DenoiserParams::<f64>::defaults_for(4, 5);
        let out = denoise_entrywise(&y, &params).unwrap();
        assert!(out.x0.as_slice().iter().all(|v| v.is_finite()));
        let slope_sup = crate::kde::gaussian_kernel(1.0) / (params.h_prime * params.h_prime);
        assert!(out.x0.max_abs() <= slope_sup / params.eps);
        assert!(out.i_hat >= params.eps);
        // Î collapses to ε, so the constant matrix itself may survive as rank 1
        let full = denoise_full(&y, &params, AspectRatio::of_shape(4, 5).unwrap()).unwrap();
        assert!(full.k_hat <= 1);
        assert!(full.x_hat.check_finite().is_ok());
    }

    #[test]
    fn rejects_degenerate_shapes() {
        let y = Matrix::<f64>::new(1, 5, vec![0.0, 1.0, 2.0, 3.0, 4.0]).unwrap();
        let params = DenoiserParams::<f64>::defaults_for(1, 5);
        assert!(matches!(
            denoise_entrywise(&y, &params),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn gaussian_fisher_estimate() {
        let y = NoiseModel::<f64>::gaussian(1.0)
            .unwrap()
            .sample(200, 200, 31)
            .unwrap();
        let out = denoise_entrywise(&y, &DenoiserParams::<f64>::defaults_for(200, 200)).unwrap();
        assert!((0.90..=1.10).contains(&out.i_hat), "{}", out.i_hat);
    }

    #[test]
    fn entries_bounded_by_regularization() {
        let y = NoiseModel::<f64>::mixture(2.0)
            .unwrap()
            .sample(60, 50, 2)
            .unwrap();
        let params = DenoiserParams::<f64>::defaults_for(60, 50);
        let y_bar = mean_entry(&y);
        let score = ScoreEstimate::fit(&y, y_bar, &params).unwrap();
        let bound = score.slope().sup_bound() / params.eps;
        let out = denoise_entrywise(&y, &params).unwrap();
        assert!(out.x0.max_abs() <= bound);
    }

    #[test]
    fn result_invariants() {
        let (m, n) = (40, 30);
        let y = NoiseModel::<f64>::mixture(2.0)
            .unwrap()
            .sample(m, n, 77)
            .unwrap();
        let params = DenoiserParams::<f64>::defaults_for(m, n);
        let gamma = AspectRatio::of_shape(m, n).unwrap();
        let r = denoise_full(&y, &params, gamma).unwrap();
        assert_eq!(r.x_star, r.x0.scale(r.i_hat.recip()));
        assert!(r.i_hat >= params.eps);
        assert!(r.sigma0.windows(2).all(|w| w[0] >= w[1]));
        let scale = spectral_scale::<f64>(m, n);
        let sv = singular_values(&r.x0).unwrap();
        for (a, b) in sv.iter().zip(&r.sigma0) {
            assert!((a / scale - b).abs() < 1e-12);
        }
    }

    #[test]
    fn x_hat_has_selected_rank() {
        let (m, n) = (60, 60);
        let mut y = NoiseModel::<f64>::gaussian(1.0)
            .unwrap()
            .sample(m, n, 5)
            .unwrap();
        let scale = spectral_scale::<f64>(m, n);
        // strong rank-2 signal
        for i in 0..m {
            for j in 0..n {
                let u1 = if i % 2 == 0 { 1.0 } else { -1.0 } / (m as f64).sqrt();
                let v1 = 1.0 / (n as f64).sqrt();
                let u2 = if i < m / 2 { 1.0 } else { -1.0 } / (m as f64).sqrt();
                let v2 = if j % 2 == 0 { 1.0 } else { -1.0 } / (n as f64).sqrt();
                y[(i, j)] += scale * (8.0 * u1 * v1 + 5.0 * u2 * v2);
            }
        }
        let r = denoise_full(&y, &DenoiserParams::<f64>::defaults_for(m, n), square()).unwrap();
        assert_eq!(r.k_hat, 2);
        assert!(r.sigma_shrunk[2..].iter().all(|&v| v == 0.0));
        let sv = singular_values(&r.x_hat).unwrap();
        assert!(sv[1] > 1e-6 * sv[0]);
        assert!(sv[2] < 1e-10 * sv[0]);
        // x_hat rebuilt from its factors
        let values: Vec<f64> = r.sigma_shrunk[..2].iter().map(|s| s * scale).collect();
        let rebuilt = crate::linalg::low_rank(&r.u_hat, &values, &r.v_hat);
        let rel = rebuilt.sub(&r.x_hat).unwrap().frobenius_norm() / r.x_hat.frobenius_norm();
        assert!(rel < 1e-8);
    }

    #[test]
    fn pure_noise_selects_rank_zero() {
        let model = NoiseModel::<f64>::mixture(2.0).unwrap();
        let params = DenoiserParams::<f64>::defaults_for(200, 200);
        for seed in 0..10 {
            let y = model.sample(200, 200, 1000 + seed).unwrap();
            let r = denoise_full(&y, &params, square()).unwrap();
            assert_eq!(r.k_hat, 0, "seed {seed}");
        }
    }

    #[test]
    #[allow(clippy::needless_range_loop)]
    fn permutation_equivariance_exact_mode() {
        let (m, n) = (12, 10);
        let y = NoiseModel::<f64>::mixture(2.0)
            .unwrap()
            .sample(m, n, 4)
            .unwrap();
        let params = DenoiserParams::<f64>::defaults_for(m, n).exact();
        let base = denoise_entrywise(&y, &params).unwrap();
        let row_perm: Vec<usize> = (0..m).rev().collect();
        let col_perm: Vec<usize> = (0..n).map(|j| (j * 3) % n).collect();
        let permuted = Matrix::from_fn(m, n, |i, j| y[(row_perm[i], col_perm[j])]);
        let out = denoise_entrywise(&permuted, &params).unwrap();
        for i in 0..m {
            for j in 0..n {
                let a = out.x0[(i, j)];
                let b = base.x0[(row_perm[i], col_perm[j])];
                // identical terms summed in a different order
                assert!((a - b).abs() <= 1e-12 * (1.0 + b.abs()));
            }
        }
        assert!((out.i_hat - base.i_hat).abs() < 1e-12);
    }

    #[test]
    fn shift_moves_queries_not_the_fit() {
        let (m, n) = (10, 12);
        let y = NoiseModel::<f64>::gaussian(1.0)
            .unwrap()
            .sample(m, n, 8)
            .unwrap();
        let c = 3.25f64;
        let shifted = y.map(|v| v + c);
        let params = DenoiserParams::<f64>::defaults_for(m, n).exact();
        let a = denoise_entrywise(&y, &params).unwrap();
        let b = denoise_entrywise(&shifted, &params).unwrap();
        assert!((b.y_bar - a.y_bar - c).abs() < 1e-12);
        assert!((a.i_hat - b.i_hat).abs() < 1e-8);
        // the fitted map is unchanged; X̂⁽⁰⁾ of the shifted input is that map
        // evaluated at the shifted entries
        let score = ScoreEstimate::fit(&y, a.y_bar, &params).unwrap();
        for (v, x) in y.as_slice().iter().zip(b.x0.as_slice()) {
            assert!((score.eval(v + c) - x).abs() < 1e-8);
        }
    }

    #[test]
    fn baseline_noiseless_rank_one() {
        let (m, n) = (8, 6);
        let scale = spectral_scale::<f64>(m, n);
        let u: Vec<f64> = (0..m).map(|i| if i < 4 { 0.5 } else { 0.0 }).collect();
        let v: Vec<f64> = (0..n).map(|j| if j < 4 { 0.5 } else { 0.0 }).collect();
        let sigma = 3.0;
        let y = Matrix::from_fn(m, n, |i, j| scale * sigma * u[i] * v[j]);
        let gamma = AspectRatio::of_shape(m, n).unwrap();
        let r = baseline_estimate(&y, 1.0, 0.01, gamma).unwrap();
        assert_eq!(r.k_bar, 1);
        let expected = crate::shrinkage::big_h_inv(sigma, gamma).unwrap();
        assert!((r.sigma_shrunk[0] - expected).abs() < 1e-12);
        let direct = shrink_baseline(&r.sigma0, 1.0, 0.01, gamma).unwrap();
        assert_eq!(direct.values, r.sigma_shrunk);
        let um = Matrix::<f64>::new(m, 1, u).unwrap();
        assert!((subspace_overlap(&um, &r.u_bar.leading_columns(1)).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn baseline_pure_noise() {
        let model = NoiseModel::<f64>::mixture(2.0).unwrap();
        let sd = model.std_dev();
        for seed in 0..10 {
            let y = model.sample(200, 200, seed).unwrap();
            let r = baseline_estimate(&y, sd, 0.01, square()).unwrap();
            assert_eq!(r.k_bar, 0, "seed {seed}");
        }
    }

    #[test]
    fn oracle_denoiser() {
        let g = NoiseModel::<f64>::gaussian(1.0).unwrap();
        let y = g.sample(7, 9, 1).unwrap();
        let out = oracle_denoise(&y, &g, 0.0).unwrap();
        assert!(out.sub(&y).unwrap().max_abs() < 1e-12);
        let big = oracle_denoise(&y, &g, 1e9).unwrap();
        assert!(big.max_abs() <= 0.25 / 1e9);

        let m = NoiseModel::<f64>::mixture(2.0).unwrap();
        let y = m.sample(5, 5, 2).unwrap();
        let out = oracle_denoise(&y, &m, 0.001).unwrap();
        for (o, v) in out.as_slice().iter().zip(y.as_slice()) {
            assert_eq!(*o, m.oracle_score(0.001, *v));
        }
    }

    #[test]
    fn runs_in_single_precision() {
        let y = crate::noise::NoiseModel::<f32>::mixture(2.0)
            .unwrap()
            .sample(50, 40, 3)
            .unwrap();
        let params = DenoiserParams::<f32>::defaults_for(50, 40);
        let r = denoise_full(&y, &params, AspectRatio::of_shape(50, 40).unwrap()).unwrap();
        assert!(r.i_hat.is_finite() && r.i_hat > 0.0);
        assert_eq!(r.x_hat.shape(), (50, 40));
    }
}
