use std::time::{Duration, Instant};

use scoreshrink::estimator::{denoise_entrywise, spectral_scale};
use scoreshrink::kde::{gaussian_kernel, KdeSettings, KernelEstimator};
use scoreshrink::linalg::singular_values;
use scoreshrink::quadrature::adaptive_simpson;
use scoreshrink::shrinkage::big_h;
use scoreshrink::sim::ExperimentConfig;
use scoreshrink::{AspectRatio, DenoiserParams, NoiseModel};

fn mixture() -> NoiseModel {
    NoiseModel::mixture(2.0).unwrap()
}

/// Mixture of `N(±2, var)` and its derivative.
fn smoothed(x: f64, var: f64) -> (f64, f64) {
    let sd = var.sqrt();
    let (a, b) = ((x - 2.0) / sd, (x + 2.0) / sd);
    let (pa, pb) = (gaussian_kernel(a) / sd, gaussian_kernel(b) / sd);
    (0.5 * (pa + pb), -0.5 * (a * pa + b * pb) / sd)
}

// With infinitely many entries the kernel estimates converge to the noise
// density convolved with the kernel, so Î converges to a deterministic value
// below I_W.
#[test]
fn fisher_estimate_tracks_its_smoothed_limit() {
    let (n, eps) = (400usize, 1e-3);
    let params = DenoiserParams::defaults_for(n, n);
    let (h, hp) = (params.h, params.h_prime);
    let model = mixture();
    let limit = adaptive_simpson(
        |x| {
            let (p, _) = smoothed(x, 1.0 + h * h);
            let (_, dp) = smoothed(x, 1.0 + hp * hp);
            let f = dp / (p + eps);
            f * f * model.density(x)
        },
        -16.0,
        16.0,
        1e-12,
    )
    .unwrap()
        + eps;
    assert!((limit - 0.6497).abs() < 5e-4, "limit {limit}");

    let mean = (0..5)
        .map(|s| {
            denoise_entrywise(&model.sample(n, n, 40 + s).unwrap(), &params)
                .unwrap()
                .i_hat
        })
        .sum::<f64>()
        / 5.0;
    assert!((mean - limit).abs() < 0.01, "mean {mean}, limit {limit}");
}

#[test]
fn gaussian_fisher_estimate_near_one() {
    let y = NoiseModel::gaussian(1.0)
        .unwrap()
        .sample(200, 200, 3)
        .unwrap();
    let r = denoise_entrywise(&y, &DenoiserParams::defaults_for(200, 200)).unwrap();
    assert!((0.90..=1.10).contains(&r.i_hat), "{}", r.i_hat);
}

#[test]
fn mixture_noise_spectral_edge() {
    let n = 400;
    let scale = spectral_scale::<f64>(n, n) * 5f64.sqrt();
    let mean = (0..20)
        .map(|s| singular_values(&mixture().sample(n, n, 900 + s).unwrap()).unwrap()[0] / scale)
        .sum::<f64>()
        / 20.0;
    let edge = big_h(1.0, AspectRatio::square());
    assert!((mean - edge).abs() <= 0.03 * edge, "mean {mean}");
}

#[test]
fn binned_kde_on_large_matrix_is_fast() {
    let y = mixture().sample(800, 800, 5).unwrap();
    let start = Instant::now();
    let settings = KdeSettings::binned(0.1);
    let p = KernelEstimator::fit(y.as_slice(), 0.0, &settings, false).unwrap();
    let dp = KernelEstimator::fit(y.as_slice(), 0.0, &settings.with_bandwidth(0.15), true).unwrap();
    let total: f64 = y.as_slice().iter().map(|&v| p.eval(v) + dp.eval(v)).sum();
    let elapsed = start.elapsed();
    assert!(total.is_finite());
    assert!(elapsed < Duration::from_secs(2), "{elapsed:?}");
}

#[test]
fn shipped_configs_parse() {
    let root = concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs");
    let paper = ExperimentConfig::from_file(format!("{root}/paper_sec5.cfg")).unwrap();
    assert_eq!(paper.trial_count(), 6000);
    assert_eq!(paper.dims, [200, 400, 800]);
    assert_eq!(paper.ranks, [1, 3]);
    assert_eq!(paper.sigma1.len(), 20);
    assert!((paper.sigma1[0] - 0.2).abs() < 1e-12 && (paper.sigma1[19] - 4.0).abs() < 1e-12);
    assert_eq!(
        paper.params_for(800, 800),
        DenoiserParams::defaults_for(800, 800)
    );

    let smoke = ExperimentConfig::from_file(format!("{root}/smoke.cfg")).unwrap();
    assert_eq!(smoke.cells().unwrap().len(), 1);
    assert_eq!((smoke.trials, smoke.dims.as_slice()), (2, &[60][..]));
}

#[test]
fn f32_pipeline_runs() {
    use scoreshrink::estimator::denoise_full;
    use scoreshrink::{DenoiserParams32, Matrix32, NoiseModel32};
    let y: Matrix32 = NoiseModel32::gaussian(1.0)
        .unwrap()
        .sample(60, 50, 2)
        .unwrap();
    let r = denoise_full(
        &y,
        &DenoiserParams32::defaults_for(60, 50),
        AspectRatio32::of_shape(60, 50).unwrap(),
    )
    .unwrap();
    assert!(r.x_hat.check_finite().is_ok());
    assert!(r.i_hat > 0.5 && r.i_hat < 1.5);
}

type AspectRatio32 = scoreshrink::shrinkage::AspectRatio<f32>;
