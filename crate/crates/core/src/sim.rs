//! Monte-Carlo harness: planted low-rank signals, trial execution and the
//! results CSV.
//!
//! Every trial is a pure function of its seed. The seed of trial `t` in cell
//! `(n, r, σ₁-index)` is `hash_seed(base_seed, [n, r, σ₁-index, t])`; the signal
//! factors and the noise draw from [`sub_seed`]s of that value.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimator::{baseline_estimate, denoise_full, spectral_scale, DenoiserParams};
use crate::kde::{default_bandwidths, KdeMode, KdeSettings, DEFAULT_BINS};
use crate::linalg::{low_rank, op_norm, subspace_overlap, Matrix};
use crate::noise::NoiseModel;
use crate::rng::{hash_seed, role, sub_seed, SeededRng};
use crate::shrinkage::{AspectRatio, DEFAULT_DELTA};

/// A planted signal `X = (mn)^{1/4}·U·diag(sigmas)·Vᵀ`.
#[derive(Clone, Debug, PartialEq)]
pub struct SignalSpec {
    pub m: usize,
    pub n: usize,
    pub sigmas: Vec<f64>,
}

impl SignalSpec {
    pub fn new(m: usize, n: usize, sigmas: Vec<f64>) -> Result<Self> {
        let spec = SignalSpec { m, n, sigmas };
        spec.validate()?;
        Ok(spec)
    }

    pub fn rank(&self) -> usize {
        self.sigmas.len()
    }

    pub fn validate(&self) -> Result<()> {
        let r = self.rank();
        if r == 0 || r > self.m.min(self.n) {
            return Err(Error::InvalidParameter(format!(
                "rank {r} is outside 1..={} for a {}x{} signal",
                self.m.min(self.n),
                self.m,
                self.n
            )));
        }
        if self.sigmas.iter().any(|s| !(*s > 0.0) || !s.is_finite()) {
            return Err(Error::InvalidParameter(
                "signal singular values must be positive".into(),
            ));
        }
        if self.sigmas.windows(2).any(|w| w[1] > w[0]) {
            return Err(Error::InvalidParameter(
                "signal singular values must be descending".into(),
            ));
        }
        Ok(())
    }
}

/// `dim x k` matrix with Haar-distributed orthonormal columns: QR of a
/// standard Gaussian matrix, with each column of `Q` multiplied by the sign of
/// the matching diagonal entry of `R`.
pub fn haar_orthonormal(dim: usize, k: usize, seed: u64) -> Result<Matrix<f64>> {
    if k == 0 || k > dim {
        return Err(Error::InvalidParameter(format!(
            "need 1 <= k <= dim, got k = {k}, dim = {dim}"
        )));
    }
    let mut rng = SeededRng::new(seed);
    let g: Vec<f64> = (0..dim * k).map(|_| rng.standard_normal()).collect();
    let qr = DMatrix::from_row_slice(dim, k, &g).qr();
    let (q, r) = (qr.q(), qr.r());
    Ok(Matrix::from_fn(dim, k, |i, j| {
        if r[(j, j)] < 0.0 {
            -q[(i, j)]
        } else {
            q[(i, j)]
        }
    }))
}

/// Returns `(x, u, v)`.
pub fn make_signal(
    spec: &SignalSpec,
    seed: u64,
) -> Result<(Matrix<f64>, Matrix<f64>, Matrix<f64>)> {
    spec.validate()?;
    let r = spec.rank();
    let u = haar_orthonormal(spec.m, r, sub_seed(seed, role::SIGNAL_U))?;
    let v = haar_orthonormal(spec.n, r, sub_seed(seed, role::SIGNAL_V))?;
    let scale: f64 = spectral_scale(spec.m, spec.n);
    let values: Vec<f64> = spec.sigmas.iter().map(|s| s * scale).collect();
    Ok((low_rank(&u, &values, &v), u, v))
}

/// Metrics of one trial.
#[derive(Clone, Debug, PartialEq)]
pub struct TrialRecord {
    pub n: usize,
    pub m: usize,
    pub r: usize,
    pub sigma1: f64,
    pub trial: usize,
    pub seed: u64,
    pub i_hat: f64,
    pub k_hat: usize,
    /// `σ_min(Û_iᵀU_i)` for `i = 1..=r`.
    pub overlaps_adaptive: Vec<f64>,
    pub overlaps_baseline: Vec<f64>,
    /// `(mn)^{−1/4}‖X̂ − X‖_op`
    pub err_adaptive: f64,
    pub err_baseline: f64,
    /// `(mn)^{−1/4}‖X̂* − X‖_op`
    pub err_star: f64,
    pub wall_ms: f64,
}

/// Runs one trial. `trial` and `wall_ms` are left at 0 for the caller to fill.
pub fn run_trial(
    spec: &SignalSpec,
    model: &NoiseModel<f64>,
    params: &DenoiserParams<f64>,
    gamma: AspectRatio<f64>,
    seed: u64,
) -> Result<TrialRecord> {
    let (x, u, _v) = make_signal(spec, seed)?;
    let w = model.sample(spec.m, spec.n, sub_seed(seed, role::NOISE))?;
    let y = x.add(&w)?;

    let adaptive = denoise_full(&y, params, gamma)?;
    let baseline = baseline_estimate(&y, model.std_dev(), params.delta, gamma)?;

    let r = spec.rank();
    let mut overlaps_adaptive = Vec::with_capacity(r);
    let mut overlaps_baseline = Vec::with_capacity(r);
    for i in 1..=r {
        let ui = u.leading_columns(i);
        overlaps_adaptive.push(subspace_overlap(&adaptive.u_hat.leading_columns(i), &ui)?);
        overlaps_baseline.push(subspace_overlap(&baseline.u_bar.leading_columns(i), &ui)?);
    }

    let scale: f64 = spectral_scale(spec.m, spec.n);
    let err = |est: &Matrix<f64>| -> Result<f64> { Ok(op_norm(&est.sub(&x)?)? / scale) };

    Ok(TrialRecord {
        n: spec.n,
        m: spec.m,
        r,
        sigma1: spec.sigmas[0],
        trial: 0,
        seed,
        i_hat: adaptive.i_hat,
        k_hat: adaptive.k_hat,
        overlaps_adaptive,
        overlaps_baseline,
        err_adaptive: err(&adaptive.x_hat)?,
        err_baseline: err(&baseline.x_bar)?,
        err_star: err(&adaptive.x_star)?,
        wall_ms: 0.0,
    })
}

/// A bandwidth given explicitly or derived from the matrix size.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Bandwidth {
    Auto,
    Fixed(f64),
}

/// Everything `run_grid` needs. See the README for the file format.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    /// Column counts `n`; each cell uses `m = round(gamma·n)` rows.
    pub dims: Vec<usize>,
    pub gamma: f64,
    pub ranks: Vec<usize>,
    /// Strictly increasing top singular values.
    pub sigma1: Vec<f64>,
    /// `σ_i = sigma_ratios[i−1]·σ₁`; the first ratio is 1.
    pub sigma_ratios: Vec<f64>,
    pub noise: NoiseModel<f64>,
    pub eps: f64,
    pub delta: f64,
    pub h: Bandwidth,
    pub h_prime: Bandwidth,
    pub kde_mode: KdeMode,
    pub kde_bins: usize,
    pub trials: usize,
    pub base_seed: u64,
    pub output: PathBuf,
    /// Record per-trial wall time. Off by default so reruns are byte-identical.
    pub timing: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            dims: Vec::new(),
            gamma: 1.0,
            ranks: vec![1],
            sigma1: Vec::new(),
            sigma_ratios: vec![1.0, 0.8, 0.6],
            noise: NoiseModel::GaussianMixture { mu: 2.0 },
            eps: crate::estimator::DEFAULT_EPS,
            delta: DEFAULT_DELTA,
            h: Bandwidth::Auto,
            h_prime: Bandwidth::Auto,
            kde_mode: KdeMode::Binned,
            kde_bins: DEFAULT_BINS,
            trials: 1,
            base_seed: 0,
            output: PathBuf::from("results.csv"),
            timing: false,
        }
    }
}

/// One grid cell: a signal shape and strength, before trials are expanded.
#[derive(Clone, Debug, PartialEq)]
pub struct Cell {
    pub spec: SignalSpec,
    pub sigma_index: usize,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if self.dims.is_empty() || self.dims.contains(&0) {
            return bad("dims must be a non-empty list of positive sizes".into());
        }
        if !(self.gamma > 0.0) || !self.gamma.is_finite() {
            return bad(format!("gamma must be positive, got {}", self.gamma));
        }
        if self.ranks.is_empty() || self.ranks.contains(&0) {
            return bad("ranks must be a non-empty list of positive ranks".into());
        }
        if self.sigma1.is_empty() {
            return bad("sigma1 grid is empty".into());
        }
        if self.sigma1.windows(2).any(|w| !(w[1] > w[0])) {
            return bad("sigma1 grid must be strictly increasing".into());
        }
        let max_rank = self.ranks.iter().copied().max().unwrap_or(0);
        if self.sigma_ratios.len() < max_rank {
            return bad(format!(
                "sigma_ratios has {} entries but rank {max_rank} is requested",
                self.sigma_ratios.len()
            ));
        }
        if self.sigma_ratios.first() != Some(&1.0) {
            return bad("the first entry of sigma_ratios must be 1".into());
        }
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if matches!(self.noise, NoiseModel::Tabulated(_)) {
            return bad("simulation needs a noise model with a sampler".into());
        }
        if let Some(c) = self.cells()?.first() {
            self.params_for(c.spec.m, c.spec.n).validate()?;
        }
        Ok(())
    }

    pub fn aspect_ratio(&self) -> Result<AspectRatio<f64>> {
        AspectRatio::new(self.gamma)
    }

    pub fn rows_for(&self, n: usize) -> usize {
        ((self.gamma * n as f64).round() as usize).max(1)
    }

    /// Cells in emission order: by `n`, then rank, then `σ₁`.
    pub fn cells(&self) -> Result<Vec<Cell>> {
        let mut out = Vec::new();
        for &n in &self.dims {
            let m = self.rows_for(n);
            for &r in &self.ranks {
                for (sigma_index, &s1) in self.sigma1.iter().enumerate() {
                    let sigmas = self.sigma_ratios[..r].iter().map(|q| q * s1).collect();
                    out.push(Cell {
                        spec: SignalSpec::new(m, n, sigmas)?,
                        sigma_index,
                    });
                }
            }
        }
        Ok(out)
    }

    pub fn trial_count(&self) -> usize {
        self.dims.len() * self.ranks.len() * self.sigma1.len() * self.trials
    }

    pub fn params_for(&self, m: usize, n: usize) -> DenoiserParams<f64> {
        let (h_auto, hp_auto) = default_bandwidths::<f64>(m, n);
        let pick = |b: Bandwidth, auto: f64| match b {
            Bandwidth::Auto => auto,
            Bandwidth::Fixed(v) => v,
        };
        let h = pick(self.h, h_auto);
        DenoiserParams {
            h,
            h_prime: pick(self.h_prime, hp_auto),
            eps: self.eps,
            delta: self.delta,
            kde: KdeSettings {
                mode: self.kde_mode,
                bins: self.kde_bins,
                ..KdeSettings::binned(h)
            },
        }
    }

    pub fn trial_seed(&self, cell: &Cell, trial: usize) -> u64 {
        hash_seed(
            self.base_seed,
            &[
                cell.spec.n as u64,
                cell.spec.rank() as u64,
                cell.sigma_index as u64,
                trial as u64,
            ],
        )
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        text.parse()
    }
}

fn parse_list<T: std::str::FromStr>(value: &str, line: usize, key: &str) -> Result<Vec<T>> {
    value
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse().map_err(|_| Error::Parse {
                line,
                msg: format!("bad entry `{s}` for `{key}`"),
            })
        })
        .collect()
}

fn parse_one<T: std::str::FromStr>(value: &str, line: usize, key: &str) -> Result<T> {
    value.parse().map_err(|_| Error::Parse {
        line,
        msg: format!("bad value `{value}` for `{key}`"),
    })
}

/// Parses a list of reals or an inclusive `start:step:stop` range.
pub fn parse_grid(value: &str) -> Result<Vec<f64>> {
    parse_grid_at(value.trim(), 1)
}

fn parse_grid_at(value: &str, line: usize) -> Result<Vec<f64>> {
    if !value.contains(':') {
        return parse_list(value, line, "sigma1");
    }
    let parts: Vec<f64> = value
        .split(':')
        .map(|s| parse_one(s.trim(), line, "sigma1"))
        .collect::<Result<_>>()?;
    let err = |msg: &str| Error::Parse {
        line,
        msg: msg.into(),
    };
    let [start, step, stop] = parts[..] else {
        return Err(err("range must be start:step:stop"));
    };
    if !(step > 0.0) || !(stop >= start) || !start.is_finite() || !stop.is_finite() {
        return Err(err("range needs step > 0 and stop >= start"));
    }
    let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
    Ok((0..count).map(|i| start + i as f64 * step).collect())
}

fn parse_bandwidth(value: &str, line: usize, key: &str) -> Result<Bandwidth> {
    if value == "auto" {
        Ok(Bandwidth::Auto)
    } else {
        parse_one(value, line, key).map(Bandwidth::Fixed)
    }
}

fn parse_noise(value: &str, line: usize) -> Result<NoiseModel<f64>> {
    let (kind, arg) = value.split_once(':').unwrap_or((value, ""));
    let arg: f64 = parse_one(arg.trim(), line, "noise")?;
    let model = match kind.trim() {
        "mixture" => NoiseModel::mixture(arg),
        "gaussian" => NoiseModel::gaussian(arg),
        other => {
            return Err(Error::Parse {
                line,
                msg: format!("unknown noise model `{other}`"),
            })
        }
    };
    model.map_err(|e| Error::Parse {
        line,
        msg: e.to_string(),
    })
}

impl std::str::FromStr for ExperimentConfig {
    type Err = Error;

    /// Flat `key = value` lines; `#` starts a comment.
    fn from_str(text: &str) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        let mut seen = std::collections::HashSet::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let Some((key, value)) = content.split_once('=') else {
                return Err(Error::Parse {
                    line,
                    msg: format!("expected `key = value`, got `{content}`"),
                });
            };
            let (key, value) = (key.trim(), value.trim());
            match key {
                "dims" => cfg.dims = parse_list(value, line, key)?,
                "gamma" => cfg.gamma = parse_one(value, line, key)?,
                "ranks" => cfg.ranks = parse_list(value, line, key)?,
                "sigma1" => cfg.sigma1 = parse_grid_at(value, line)?,
                "sigma_ratios" => cfg.sigma_ratios = parse_list(value, line, key)?,
                "noise" => cfg.noise = parse_noise(value, line)?,
                "eps" => cfg.eps = parse_one(value, line, key)?,
                "delta" => cfg.delta = parse_one(value, line, key)?,
                "h" => cfg.h = parse_bandwidth(value, line, key)?,
                "h_prime" => cfg.h_prime = parse_bandwidth(value, line, key)?,
                "kde_mode" => {
                    cfg.kde_mode = match value {
                        "binned" => KdeMode::Binned,
                        "exact" => KdeMode::Exact,
                        _ => {
                            return Err(Error::Parse {
                                line,
                                msg: format!("kde_mode must be binned or exact, got `{value}`"),
                            })
                        }
                    }
                }
                "kde_bins" => cfg.kde_bins = parse_one(value, line, key)?,
                "trials" => cfg.trials = parse_one(value, line, key)?,
                "base_seed" => cfg.base_seed = parse_one(value, line, key)?,
                "output" => cfg.output = PathBuf::from(value),
                "timing" => cfg.timing = parse_one(value, line, key)?,
                _ => return Err(Error::UnknownKey(key.to_string())),
            }
            if !seen.insert(key.to_string()) {
                return Err(Error::Parse {
                    line,
                    msg: format!("duplicate key `{key}`"),
                });
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Runs every `(cell, trial)` pair, in parallel, and returns the records in
/// emission order.
pub fn run_cells(config: &ExperimentConfig) -> Result<Vec<TrialRecord>> {
    config.validate()?;
    let gamma = config.aspect_ratio()?;
    let cells = config.cells()?;
    let jobs: Vec<(&Cell, usize)> = cells
        .iter()
        .flat_map(|c| (0..config.trials).map(move |t| (c, t)))
        .collect();
    jobs.par_iter()
        .map(|&(cell, trial)| {
            let start = Instant::now();
            let params = config.params_for(cell.spec.m, cell.spec.n);
            let seed = config.trial_seed(cell, trial);
            let mut rec = run_trial(&cell.spec, &config.noise, &params, gamma, seed)?;
            rec.trial = trial;
            if config.timing {
                rec.wall_ms = start.elapsed().as_secs_f64() * 1e3;
            }
            Ok(rec)
        })
        .collect()
}

/// [`run_cells`] followed by writing the CSV to `config.output`.
pub fn run_grid(config: &ExperimentConfig) -> Result<Vec<TrialRecord>> {
    let records = run_cells(config)?;
    let text = results_csv(&records);
    std::fs::write(&config.output, text).map_err(|e| Error::io(&config.output, e))?;
    Ok(records)
}

/// `%.10g`-style rendering.
pub fn fmt_sig(x: f64) -> String {
    const DIGITS: i32 = 10;
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let sci = format!("{:.*e}", (DIGITS - 1) as usize, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-4..DIGITS).contains(&exp) {
        let fixed = format!("{:.*}", (DIGITS - 1 - exp) as usize, x);
        trim_zeros(&fixed).to_string()
    } else {
        format!(
            "{}e{}{:02}",
            trim_zeros(mantissa),
            if exp < 0 { '-' } else { '+' },
            exp.abs()
        )
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Header plus one row per record. Overlap columns run to the largest rank
/// present; lower-rank rows leave the extra fields empty.
pub fn results_csv(records: &[TrialRecord]) -> String {
    let width = records.iter().map(|r| r.r).max().unwrap_or(1);
    let mut out = String::from("n,m,r,sigma1,trial,seed,i_hat,k_hat");
    for prefix in ["ov_a", "ov_b"] {
        for i in 1..=width {
            let _ = write!(out, ",{prefix}_{i}");
        }
    }
    out.push_str(",err_a,err_b,err_star,wall_ms\n");

    for rec in records {
        let _ = write!(
            out,
            "{},{},{},{},{},{},{},{}",
            rec.n,
            rec.m,
            rec.r,
            fmt_sig(rec.sigma1),
            rec.trial,
            rec.seed,
            fmt_sig(rec.i_hat),
            rec.k_hat
        );
        for ov in [&rec.overlaps_adaptive, &rec.overlaps_baseline] {
            for i in 0..width {
                out.push(',');
                if let Some(v) = ov.get(i) {
                    out.push_str(&fmt_sig(*v));
                }
            }
        }
        let _ = writeln!(
            out,
            ",{},{},{},{}",
            fmt_sig(rec.err_adaptive),
            fmt_sig(rec.err_baseline),
            fmt_sig(rec.err_star),
            fmt_sig(rec.wall_ms)
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::singular_values;

    #[test]
    fn haar_trivial_and_orthonormal() {
        let one = haar_orthonormal(1, 1, 3).unwrap();
        assert_eq!(one.as_slice()[0].abs(), 1.0);
        for seed in 0..5 {
            let q = haar_orthonormal(50, 3, seed).unwrap();
            assert_eq!(q.shape(), (50, 3));
            assert!(q.orthonormality_residual().unwrap() < 1e-10);
        }
        assert!(haar_orthonormal(3, 4, 0).is_err());
        assert!(haar_orthonormal(3, 0, 0).is_err());
    }

    #[test]
    fn haar_first_coordinate_moment() {
        let trials = 100_000u64;
        let mean = (0..trials)
            .map(|s| haar_orthonormal(3, 1, s).unwrap().as_slice()[0].powi(2))
            .sum::<f64>()
            / trials as f64;
        assert!((0.32..=0.35).contains(&mean), "mean {mean}");
    }

    #[test]
    fn signal_has_planted_spectrum() {
        let spec = SignalSpec::new(4, 4, vec![2.0]).unwrap();
        let (x, _, _) = make_signal(&spec, 9).unwrap();
        assert!((op_norm(&x).unwrap() / 2.0 - 2.0).abs() < 1e-8);

        let spec = SignalSpec::new(30, 20, vec![3.0, 2.4, 1.8]).unwrap();
        let (x, u, v) = make_signal(&spec, 1).unwrap();
        let scale: f64 = spectral_scale(30, 20);
        let s = singular_values(&x).unwrap();
        for (got, want) in s.iter().zip(&spec.sigmas) {
            assert!((got / scale - want).abs() < 1e-8);
        }
        assert!(s[3] / scale < 1e-8);
        assert_eq!((u.shape(), v.shape()), ((30, 3), (20, 3)));
        assert_eq!(make_signal(&spec, 1).unwrap().0, x);
        assert_ne!(make_signal(&spec, 2).unwrap().0, x);
    }

    #[test]
    fn signal_spec_validation() {
        assert!(SignalSpec::new(5, 5, vec![]).is_err());
        assert!(SignalSpec::new(2, 5, vec![1.0, 0.5, 0.2]).is_err());
        assert!(SignalSpec::new(5, 5, vec![1.0, 2.0]).is_err());
        assert!(SignalSpec::new(5, 5, vec![1.0, 0.0]).is_err());
    }

    fn small_params(n: usize) -> DenoiserParams<f64> {
        DenoiserParams::<f64>::defaults_for(n, n)
    }

    #[test]
    fn trial_is_deterministic() {
        let spec = SignalSpec::new(40, 40, vec![3.0]).unwrap();
        let model = NoiseModel::<f64>::mixture(2.0).unwrap();
        let p = small_params(40);
        let a = run_trial(&spec, &model, &p, AspectRatio::square(), 77).unwrap();
        let b = run_trial(&spec, &model, &p, AspectRatio::square(), 77).unwrap();
        assert_eq!(a, b);
        assert!(a
            .overlaps_adaptive
            .iter()
            .all(|v| (0.0..=1.0 + 1e-10).contains(v)));
        assert!(a.err_adaptive >= 0.0 && a.err_baseline >= 0.0 && a.err_star >= 0.0);
    }

    #[test]
    fn sub_threshold_trial_keeps_nothing() {
        let spec = SignalSpec::new(60, 60, vec![1e-8]).unwrap();
        let model = NoiseModel::<f64>::mixture(2.0).unwrap();
        let rec = run_trial(&spec, &model, &small_params(60), AspectRatio::square(), 5).unwrap();
        assert_eq!(rec.k_hat, 0);
        assert!(rec.err_adaptive < 1e-7);
    }

    #[test]
    fn fmt_sig_matches_printf_g() {
        let cases = [
            (0.0, "0"),
            (1.0, "1"),
            (0.6000000000000001, "0.6"),
            (2.5, "2.5"),
            (-0.125, "-0.125"),
            (123456.789, "123456.789"),
            (1.0 / 3.0, "0.3333333333"),
            (1e-5, "1e-05"),
            (1.5e-7, "1.5e-07"),
            (9.99999999999e9, "1e+10"),
            (12345678901.0, "1.23456789e+10"),
            (0.0001, "0.0001"),
        ];
        for (x, want) in cases {
            assert_eq!(fmt_sig(x), want, "{x}");
        }
    }

    const PAPER_CFG: &str = "\
# the full grid
dims = 200, 400, 800
ranks = 1, 3
sigma1 = 0.2:0.2:4.0
sigma_ratios = 1, 0.8, 0.6
noise = mixture:2
eps = 0.001
delta = 0.01
h = auto
h_prime = auto
trials = 50
base_seed = 1
output = out.csv
";

    #[test]
    fn paper_grid_enumerates_all_trials() {
        let cfg: ExperimentConfig = PAPER_CFG.parse().unwrap();
        assert_eq!(cfg.sigma1.len(), 20);
        assert!((cfg.sigma1[19] - 4.0).abs() < 1e-12);
        assert_eq!(cfg.trial_count(), 6000);
        let cells = cfg.cells().unwrap();
        assert_eq!(cells.len() * cfg.trials, 6000);
        let c = cells.iter().find(|c| c.spec.rank() == 3).unwrap();
        let s = &c.spec.sigmas;
        assert!((s[1] / s[0] - 0.8).abs() < 1e-12 && (s[2] / s[0] - 0.6).abs() < 1e-12);
        let p = cfg.params_for(400, 400);
        assert_eq!(p, DenoiserParams::<f64>::defaults_for(400, 400));
    }

    #[test]
    fn seeds_are_distinct_per_trial() {
        let cfg: ExperimentConfig = PAPER_CFG.parse().unwrap();
        let mut seen = std::collections::HashSet::new();
        for c in cfg.cells().unwrap() {
            for t in 0..cfg.trials {
                assert!(seen.insert(cfg.trial_seed(&c, t)));
            }
        }
    }

    #[test]
    fn grid_syntax() {
        assert_eq!(parse_grid("1, 2.5 3").unwrap(), [1.0, 2.5, 3.0]);
        let g = parse_grid("0.5:0.25:1.5").unwrap();
        assert_eq!(g.len(), 5);
        assert!((g[4] - 1.5).abs() < 1e-12);
        assert_eq!(parse_grid("2:1:2").unwrap(), [2.0]);
        assert!(parse_grid("1:0:2").is_err());
        assert!(parse_grid("2:1:1").is_err());
        assert!(parse_grid("1:2").is_err());
    }

    #[test]
    fn config_errors() {
        let unknown = "dims = 10\nsigma1 = 1\nfoo = 3\n".parse::<ExperimentConfig>();
        assert!(matches!(unknown, Err(Error::UnknownKey(k)) if k == "foo"));
        let bad = "dims = 10\nsigma1 = x\n".parse::<ExperimentConfig>();
        assert!(matches!(bad, Err(Error::Parse { line: 2, .. })));
        let dup = "dims = 10\ndims = 20\nsigma1 = 1\n".parse::<ExperimentConfig>();
        assert!(matches!(dup, Err(Error::Parse { line: 2, .. })));
        let noeq = "dims 10\n".parse::<ExperimentConfig>();
        assert!(matches!(noeq, Err(Error::Parse { line: 1, .. })));
        let decreasing = "dims = 10\nsigma1 = 2, 1\n".parse::<ExperimentConfig>();
        assert!(decreasing.is_err());
        let noise = "dims = 10\nsigma1 = 1\nnoise = cauchy:1\n".parse::<ExperimentConfig>();
        assert!(matches!(noise, Err(Error::Parse { line: 3, .. })));
        let rank = "dims = 10\nsigma1 = 1\nranks = 4\n".parse::<ExperimentConfig>();
        assert!(rank.is_err());
        let trials = "dims = 10\nsigma1 = 1\ntrials = 0\n".parse::<ExperimentConfig>();
        assert!(trials.is_err());
    }

    #[test]
    fn single_cell_emits_one_row_per_trial() {
        let cfg: ExperimentConfig = "dims = 30\nsigma1 = 2\ntrials = 3\nkde_bins = 512\n"
            .parse()
            .unwrap();
        let recs = run_cells(&cfg).unwrap();
        assert_eq!(recs.len(), 3);
        assert_eq!(recs.iter().map(|r| r.trial).collect::<Vec<_>>(), [0, 1, 2]);
        let csv = results_csv(&recs);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 4);
        assert_eq!(
            lines[0],
            "n,m,r,sigma1,trial,seed,i_hat,k_hat,ov_a_1,ov_b_1,err_a,err_b,err_star,wall_ms"
        );
        assert!(lines[1..].iter().all(|l| l.split(',').count() == 14));
        assert!(lines[1].ends_with(",0"));
    }

    #[test]
    fn mixed_ranks_pad_columns() {
        let cfg: ExperimentConfig = "dims = 20\nranks = 1, 2\nsigma1 = 2\nkde_bins = 512\n"
            .parse()
            .unwrap();
        let csv = results_csv(&run_cells(&cfg).unwrap());
        let lines: Vec<&str> = csv.lines().collect();
        assert!(lines[0].contains("ov_a_2,ov_b_1,ov_b_2"));
        let r1: Vec<&str> = lines[1].split(',').collect();
        assert_eq!(r1.len(), 16);
        assert_eq!((r1[9], r1[11]), ("", ""));
        assert!(lines[2].split(',').all(|f| !f.is_empty()));
    }

    #[test]
    fn rectangular_cells_use_gamma() {
        let cfg: ExperimentConfig = "dims = 20\ngamma = 1.5\nsigma1 = 3\nkde_bins = 512\n"
            .parse()
            .unwrap();
        let recs = run_cells(&cfg).unwrap();
        assert_eq!((recs[0].m, recs[0].n), (30, 20));
    }
}
