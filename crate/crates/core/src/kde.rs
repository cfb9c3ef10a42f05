//! Shift-corrected Gaussian kernel density estimation.
//!
//! Samples enter already centred (`Y_kl − Ȳ`). Two evaluation strategies are
//! provided: an exact `O(N)`-per-query sum, and a binned estimate that
//! linearly bins the samples onto a uniform grid, convolves once with the
//! sampled kernel and answers queries by linear interpolation. The binned
//! path is what makes evaluating the estimate at all `mn` entries `O(mn)`.

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Real;

pub const DEFAULT_BINS: usize = 4096;
pub const MIN_BINS: usize = 256;
pub const DEFAULT_TRUNCATION: f64 = 8.0;
const GRID_PADDING: f64 = 8.0;

#[inline]
pub fn gaussian_kernel<T: Real>(z: T) -> T {
    (-(z * z) / T::of(2.0)).exp() / T::TAU().sqrt()
}

#[inline]
pub fn gaussian_kernel_deriv<T: Real>(z: T) -> T {
    -z * gaussian_kernel(z)
}

/// Average entry, accumulated with Neumaier compensation.
pub fn mean_entry<T: Real>(y: &Matrix<T>) -> T {
    let mut sum = T::zero();
    let mut comp = T::zero();
    for &x in y.as_slice() {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            comp = comp + ((sum - t) + x);
        } else {
            comp = comp + ((x - t) + sum);
        }
        sum = t;
    }
    (sum + comp) / T::of(y.len() as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KdeMode {
    Exact,
    Binned,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KdeSettings<T> {
    pub h: T,
    pub mode: KdeMode,
    pub bins: usize,
    /// Kernel support cut, in units of `h`.
    pub truncation_radius: T,
}

impl<T: Real> KdeSettings<T> {
    pub fn binned(h: T) -> Self {
        KdeSettings {
            h,
            mode: KdeMode::Binned,
            bins: DEFAULT_BINS,
            truncation_radius: T::of(DEFAULT_TRUNCATION),
        }
    }

    pub fn exact(h: T) -> Self {
        KdeSettings {
            mode: KdeMode::Exact,
            ..Self::binned(h)
        }
    }

    pub fn with_bandwidth(self, h: T) -> Self {
        KdeSettings { h, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.h > T::zero()) || !self.h.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "bandwidth must be positive, got {}",
                self.h
            )));
        }
        if self.bins < MIN_BINS {
            return Err(Error::InvalidParameter(format!(
                "need at least {MIN_BINS} bins, got {}",
                self.bins
            )));
        }
        if !(self.truncation_radius >= T::of(6.0)) {
            return Err(Error::InvalidParameter(format!(
                "truncation radius must be >= 6, got {}",
                self.truncation_radius
            )));
        }
        Ok(())
    }
}

/// Default bandwidth pair for an `m x n` observation:
/// `h = 1.2·(mn)^(−1/5)` for the density and `h' = (mn)^(−1/7)` for its
/// derivative.
pub fn default_bandwidths<T: Real>(m: usize, n: usize) -> (T, T) {
    let mn = T::of((m * n) as f64);
    (
        T::of(1.2) * mn.powf(T::of(-0.2)),
        mn.powf(-T::one() / T::of(7.0)),
    )
}

/// Polynomial schedule `h = n^(−eta1)`, `h' = n^(−eta2)` with
/// `eta1 ∈ (1/4, 1)` and `eta2 ∈ (1/4, 1/3)`.
pub fn schedule_bandwidths<T: Real>(n: usize, eta1: T, eta2: T) -> Result<(T, T)> {
    let quarter = T::of(0.25);
    if !(eta1 > quarter && eta1 < T::one()) {
        return Err(Error::InvalidParameter(format!(
            "eta1 must lie in (1/4, 1), got {eta1}"
        )));
    }
    if !(eta2 > quarter && eta2 < T::one() / T::of(3.0)) {
        return Err(Error::InvalidParameter(format!(
            "eta2 must lie in (1/4, 1/3), got {eta2}"
        )));
    }
    let n = T::of(n as f64);
    Ok((n.powf(-eta1), n.powf(-eta2)))
}

/// Exact estimate at `x` from centred samples.
///
/// Density: `(1/(N h)) Σ K((s − x)/h)`. Derivative: the derivative of that
/// density estimate in `x`, `(1/(N h²)) Σ K'((x − s)/h)`.
pub fn kde_exact<T: Real>(samples: &[T], x: T, h: T, deriv: bool) -> T {
    assert!(
        !samples.is_empty(),
        "kernel estimate needs at least one sample"
    );
    let n = T::of(samples.len() as f64);
    if deriv {
        let sum: T = samples
            .iter()
            .map(|&s| gaussian_kernel_deriv((x - s) / h))
            .sum();
        sum / (n * h * h)
    } else {
        let sum: T = samples.iter().map(|&s| gaussian_kernel((s - x) / h)).sum();
        sum / (n * h)
    }
}

/// Density (or derivative) values on a uniform grid, interpolated linearly
/// between nodes and clamped to the boundary values outside.
#[derive(Clone, Debug)]
pub struct DensityEstimate<T> {
    pub grid: Vec<T>,
    pub values: Vec<T>,
    pub h: T,
    pub shift: T,
    pub deriv: bool,
    origin: T,
    step: T,
}

impl<T: Real> DensityEstimate<T> {
    pub fn eval(&self, x: T) -> T {
        let last = self.values.len() - 1;
        let t = (x - self.origin) / self.step;
        if !(t > T::zero()) {
            return self.values[0];
        }
        if t >= T::of(last as f64) {
            return self.values[last];
        }
        let i = t.floor().to_usize().unwrap_or(0).min(last - 1);
        let w = t - T::of(i as f64);
        self.values[i] * (T::one() - w) + self.values[i + 1] * w
    }

    pub fn sup_norm(&self) -> T {
        self.values.iter().fold(T::zero(), |a, &v| a.max(v.abs()))
    }

    /// Trapezoid integral of the interpolant over the grid.
    pub fn integral(&self) -> T {
        let inner: T = self.values[1..self.values.len() - 1].iter().copied().sum();
        let ends = (self.values[0] + self.values[self.values.len() - 1]) / T::of(2.0);
        (inner + ends) * self.step
    }
}

/// Binned estimate from centred samples.
///
/// Samples are linearly binned onto `bins` uniform nodes spanning
/// `[min − 8h, max + 8h]` and convolved with the kernel sampled at node
/// offsets, truncated at `truncation_radius · h`. Returns `None` when every
/// sample is identical, in which case the caller should use exact evaluation.
pub fn kde_binned<T: Real>(
    samples: &[T],
    shift: T,
    settings: &KdeSettings<T>,
    deriv: bool,
) -> Result<Option<DensityEstimate<T>>> {
    settings.validate()?;
    if samples.is_empty() {
        return Err(Error::InvalidParameter("no samples".into()));
    }
    let (min, max) = samples
        .iter()
        .fold((T::infinity(), T::neg_infinity()), |(lo, hi), &s| {
            (lo.min(s), hi.max(s))
        });
    if !(max > min) {
        return Ok(None);
    }
    let h = settings.h;
    let bins = settings.bins;
    let pad = T::of(GRID_PADDING) * h;
    let origin = min - pad;
    let step = (max + pad - origin) / T::of((bins - 1) as f64);

    let mut counts = vec![T::zero(); bins];
    for &s in samples {
        let t = (s - origin) / step;
        let i = t.floor().to_usize().unwrap_or(0).min(bins - 2);
        let w = t - T::of(i as f64);
        counts[i] = counts[i] + (T::one() - w);
        counts[i + 1] = counts[i + 1] + w;
    }

    let reach = (settings.truncation_radius * h / step)
        .ceil()
        .to_usize()
        .unwrap_or(bins)
        .min(bins - 1);
    let n = T::of(samples.len() as f64);
    // taps[reach + d] weights counts[j + d] when computing node j
    let taps: Vec<T> = (0..=2 * reach)
        .map(|k| {
            let offset = T::of(k as f64 - reach as f64) * step / h;
            if deriv {
                gaussian_kernel_deriv(-offset) / (n * h * h)
            } else {
                gaussian_kernel(offset) / (n * h)
            }
        })
        .collect();

    let values: Vec<T> = (0..bins)
        .map(|j| {
            let lo = j.saturating_sub(reach);
            let hi = (j + reach).min(bins - 1);
            (lo..=hi)
                .map(|i| counts[i] * taps[i + reach - j])
                .sum::<T>()
        })
        .collect();

    let grid = (0..bins).map(|j| origin + step * T::of(j as f64)).collect();
    Ok(Some(DensityEstimate {
        grid,
        values,
        h,
        shift,
        deriv,
        origin,
        step,
    }))
}

#[derive(Clone, Debug)]
enum Repr<T> {
    Exact(Vec<T>),
    Binned(DensityEstimate<T>),
}

/// A fitted kernel estimate of either the density or its derivative, ready to
/// be queried anywhere.
#[derive(Clone, Debug)]
pub struct KernelEstimator<T> {
    repr: Repr<T>,
    h: T,
    shift: T,
    deriv: bool,
}

impl<T: Real> KernelEstimator<T> {
    /// Fits from raw samples; each sample is centred by `shift` first.
    pub fn fit(raw: &[T], shift: T, settings: &KdeSettings<T>, deriv: bool) -> Result<Self> {
        settings.validate()?;
        let centred: Vec<T> = raw.iter().map(|&s| s - shift).collect();
        let repr = match settings.mode {
            KdeMode::Exact => Repr::Exact(centred),
            KdeMode::Binned => match kde_binned(&centred, shift, settings, deriv)? {
                Some(est) => Repr::Binned(est),
                // all samples coincide; one copy gives the same sum
                None => Repr::Exact(vec![centred[0]]),
            },
        };
        Ok(KernelEstimator {
            repr,
            h: settings.h,
            shift,
            deriv,
        })
    }

    #[inline]
    pub fn eval(&self, x: T) -> T {
        match &self.repr {
            Repr::Exact(samples) => kde_exact(samples, x, self.h, self.deriv),
            Repr::Binned(est) => est.eval(x),
        }
    }

    pub fn is_binned(&self) -> bool {
        matches!(self.repr, Repr::Binned(_))
    }

    pub fn binned(&self) -> Option<&DensityEstimate<T>> {
        match &self.repr {
            Repr::Binned(est) => Some(est),
            Repr::Exact(_) => None,
        }
    }

    pub fn bandwidth(&self) -> T {
        self.h
    }

    pub fn shift(&self) -> T {
        self.shift
    }

    /// Upper bound on `|estimate|` over the real line.
    pub fn sup_bound(&self) -> T {
        match &self.repr {
            Repr::Binned(est) => est.sup_norm(),
            Repr::Exact(_) => {
                let h = self.h;
                if self.deriv {
                    // max |K'| = φ(1)
                    gaussian_kernel(T::one()) / (h * h)
                } else {
                    gaussian_kernel(T::zero()) / h
                }
            }
        }
    }
}
