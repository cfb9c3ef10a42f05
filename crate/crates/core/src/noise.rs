//! Scalar noise distributions with known densities.
//!
//! These back the oracle paths (true score, true Fisher information) and the
//! Monte-Carlo harness. The adaptive estimator never looks at them.

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::quadrature::adaptive_simpson;
use crate::rng::SeededRng;
use crate::scalar::Real;

/// A density tabulated on a strictly increasing grid and linearly
/// interpolated between nodes; zero outside the grid.
#[derive(Clone, Debug, PartialEq)]
pub struct TabulatedDensity<T> {
    grid: Vec<T>,
    values: Vec<T>,
}

impl<T: Real> TabulatedDensity<T> {
    /// Values are rescaled so the interpolated density integrates to one.
    pub fn new(grid: Vec<T>, values: Vec<T>) -> Result<Self> {
        if grid.len() < 2 || grid.len() != values.len() {
            return Err(Error::InvalidParameter(
                "tabulated density needs matching grid/value vectors of length >= 2".into(),
            ));
        }
        if grid.windows(2).any(|w| !(w[1] > w[0])) || grid.iter().any(|g| !g.is_finite()) {
            return Err(Error::InvalidParameter(
                "tabulated grid must be finite and strictly increasing".into(),
            ));
        }
        if values.iter().any(|v| !v.is_finite() || *v < T::zero()) {
            return Err(Error::InvalidParameter(
                "tabulated density values must be finite and non-negative".into(),
            ));
        }
        let mass = trapezoid(&grid, &values);
        if !(mass > T::zero()) {
            return Err(Error::InvalidParameter(
                "tabulated density has zero mass".into(),
            ));
        }
        let values = values.into_iter().map(|v| v / mass).collect();
        Ok(TabulatedDensity { grid, values })
    }

    pub fn grid(&self) -> &[T] {
        &self.grid
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    fn eval(&self, x: T) -> T {
        let g = &self.grid;
        if x < g[0] || x > g[g.len() - 1] {
            return T::zero();
        }
        let hi = g.partition_point(|&t| t <= x).min(g.len() - 1).max(1);
        let lo = hi - 1;
        let w = (x - g[lo]) / (g[hi] - g[lo]);
        self.values[lo] * (T::one() - w) + self.values[hi] * w
    }

    // Exact for the interpolant: on a segment where p is linear with slope s,
    // ∫ s²/p = s·ln(p_hi/p_lo).
    fn fisher_info(&self) -> Result<T> {
        let mut total = T::zero();
        for i in 0..self.grid.len() - 1 {
            let (p0, p1) = (self.values[i], self.values[i + 1]);
            if p0 == p1 {
                continue;
            }
            if p0 <= T::zero() || p1 <= T::zero() {
                return Err(Error::InvalidParameter(
                    "Fisher information diverges where the tabulated density touches zero".into(),
                ));
            }
            let slope = (p1 - p0) / (self.grid[i + 1] - self.grid[i]);
            total = total + slope * (p1.ln() - p0.ln());
        }
        Ok(total)
    }
}

fn trapezoid<T: Real>(x: &[T], y: &[T]) -> T {
    x.windows(2)
        .zip(y.windows(2))
        .map(|(xs, ys)| (xs[1] - xs[0]) * (ys[0] + ys[1]) / T::of(2.0))
        .sum()
}

#[derive(Clone, Debug, PartialEq)]
pub enum NoiseModel<T> {
    /// Centred Gaussian with the given variance.
    Gaussian {
        variance: T,
    },
    /// Equal mixture of `N(−mu, 1)` and `N(mu, 1)`.
    GaussianMixture {
        mu: T,
    },
    Tabulated(TabulatedDensity<T>),
}

impl<T: Real> NoiseModel<T> {
    pub fn gaussian(variance: T) -> Result<Self> {
        if !(variance > T::zero()) || !variance.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "gaussian variance must be positive, got {variance}"
            )));
        }
        Ok(NoiseModel::Gaussian { variance })
    }

    pub fn mixture(mu: T) -> Result<Self> {
        if !(mu >= T::zero()) || !mu.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "mixture offset must be finite and non-negative, got {mu}"
            )));
        }
        Ok(NoiseModel::GaussianMixture { mu })
    }

    pub fn tabulated(grid: Vec<T>, values: Vec<T>) -> Result<Self> {
        TabulatedDensity::new(grid, values).map(NoiseModel::Tabulated)
    }

    pub fn density(&self, x: T) -> T {
        match self {
            NoiseModel::Gaussian { variance } => normal_pdf(x, T::zero(), *variance),
            NoiseModel::GaussianMixture { mu } => {
                let half = T::of(0.5);
                half * (normal_pdf(x, *mu, T::one()) + normal_pdf(x, -*mu, T::one()))
            }
            NoiseModel::Tabulated(t) => t.eval(x),
        }
    }

    pub fn density_deriv(&self, x: T) -> T {
        match self {
            NoiseModel::Gaussian { variance } => -x / *variance * self.density(x),
            NoiseModel::GaussianMixture { mu } => {
                let half = T::of(0.5);
                half * (-(x - *mu) * normal_pdf(x, *mu, T::one())
                    - (x + *mu) * normal_pdf(x, -*mu, T::one()))
            }
            NoiseModel::Tabulated(t) => {
                let step = T::of(1e-5);
                (t.eval(x + step) - t.eval(x - step)) / (step + step)
            }
        }
    }

    /// The score `−p'(x)/p(x)`, evaluated in a form that stays finite in the
    /// tails for the closed-form kinds.
    pub fn score(&self, x: T) -> T {
        match self {
            NoiseModel::Gaussian { variance } => x / *variance,
            // −p'/p = x − mu·tanh(mu·x) for the symmetric two-component mixture
            NoiseModel::GaussianMixture { mu } => x - *mu * (*mu * x).tanh(),
            NoiseModel::Tabulated(_) => -self.density_deriv(x) / self.density(x),
        }
    }

    /// `−p'(x) / (p(x) + eps)`, the regularized oracle denoiser.
    pub fn oracle_score(&self, eps: T, x: T) -> T {
        if eps == T::zero() {
            self.score(x)
        } else {
            -self.density_deriv(x) / (self.density(x) + eps)
        }
    }

    pub fn mean(&self) -> T {
        match self {
            NoiseModel::Gaussian { .. } | NoiseModel::GaussianMixture { .. } => T::zero(),
            NoiseModel::Tabulated(t) => {
                let (a, b) = self.window();
                adaptive_simpson(|x| x * t.eval(x), a, b, quad_tol()).unwrap_or_else(|_| T::nan())
            }
        }
    }

    pub fn variance(&self) -> T {
        match self {
            NoiseModel::Gaussian { variance } => *variance,
            NoiseModel::GaussianMixture { mu } => T::one() + *mu * *mu,
            NoiseModel::Tabulated(t) => {
                let mean = self.mean();
                let (a, b) = self.window();
                adaptive_simpson(|x| (x - mean) * (x - mean) * t.eval(x), a, b, quad_tol())
                    .unwrap_or_else(|_| T::nan())
            }
        }
    }

    pub fn std_dev(&self) -> T {
        self.variance().sqrt()
    }

    /// Integration window `[−L, L]` outside of which the density and the
    /// Fisher-information integrand are negligible.
    pub fn window(&self) -> (T, T) {
        match self {
            NoiseModel::Gaussian { variance } => {
                let l = T::of(12.0) * variance.sqrt();
                (-l, l)
            }
            NoiseModel::GaussianMixture { mu } => {
                let l = *mu + T::of(12.0);
                (-l, l)
            }
            NoiseModel::Tabulated(t) => (t.grid[0], t.grid[t.grid.len() - 1]),
        }
    }

    /// Location Fisher information `∫ p'(x)² / p(x) dx`.
    pub fn fisher_info(&self) -> Result<T> {
        match self {
            NoiseModel::Tabulated(t) => t.fisher_info(),
            _ => {
                let (a, b) = self.window();
                adaptive_simpson(
                    |x| {
                        let s = self.score(x);
                        self.density(x) * s * s
                    },
                    a,
                    b,
                    quad_tol(),
                )
            }
        }
    }

    /// An `m x n` matrix of i.i.d. draws, filled row-major.
    ///
    /// Mixture draws consume a component coin and then a standard normal, in
    /// that order, for each entry.
    pub fn sample(&self, m: usize, n: usize, seed: u64) -> Result<Matrix<T>> {
        if m == 0 || n == 0 {
            return Err(Error::Dimension(format!("cannot sample a {m}x{n} matrix")));
        }
        let mut rng = SeededRng::new(seed);
        let data: Vec<T> = match self {
            NoiseModel::Gaussian { variance } => {
                let sd = variance.as_f64().sqrt();
                (0..m * n)
                    .map(|_| T::of(sd * rng.standard_normal()))
                    .collect()
            }
            NoiseModel::GaussianMixture { mu } => {
                let mu = mu.as_f64();
                (0..m * n)
                    .map(|_| {
                        let centre = if rng.coin() { mu } else { -mu };
                        T::of(centre + rng.standard_normal())
                    })
                    .collect()
            }
            NoiseModel::Tabulated(_) => {
                return Err(Error::Unsupported(
                    "tabulated noise models have no sampler".into(),
                ))
            }
        };
        Ok(Matrix::from_vec_unchecked(m, n, data))
    }
}

fn quad_tol<T: Real>() -> T {
    T::of(1e-10).max(T::epsilon() * T::of(1e2))
}

#[inline]
fn normal_pdf<T: Real>(x: T, mean: T, variance: T) -> T {
    let d = x - mean;
    (-(d * d) / (variance + variance)).exp() / (T::TAU() * variance).sqrt()
}
