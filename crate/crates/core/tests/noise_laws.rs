//! Monte Carlo checks of the stochastic convolutions.

use cbf_mild::config::shear_field;
use cbf_mild::field::TorusGrid;
use cbf_mild::noise::{
    fbm_mode_variance, fbm_path, generate, MarkLaw, NoiseModes, NoiseSpec, Part, PhiSpec,
};
use cbf_mild::picard::TimeGrid;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (v / n).sqrt())
}

fn covariance(paths: &[Vec<f64>], a: usize, b: usize) -> (f64, f64) {
    mean_se(&paths.iter().map(|p| p[a] * p[b]).collect::<Vec<_>>())
}

#[test]
fn fbm_is_self_similar() {
    let (h, a) = (0.7, 3.0);
    let draw = |horizon: f64, scale: f64, seed: u64| -> Vec<Vec<f64>> {
        let times = TimeGrid::uniform(horizon, 8).unwrap();
        (0..10_000u64)
            .into_par_iter()
            .map(|i| {
                fbm_path(h, &times, &mut ChaCha8Rng::seed_from_u64(seed + i))
                    .unwrap()
                    .into_iter()
                    .map(|v| v * scale)
                    .collect()
            })
            .collect()
    };
    let base = draw(1.0, 1.0, 0);
    let stretched = draw(a, a.powf(-h), 50_000);
    for i in 1..=8 {
        for j in i..=8 {
            let (m1, s1) = covariance(&base, i, j);
            let (m2, s2) = covariance(&stretched, i, j);
            assert!((m1 - m2).abs() <= 3.0 * (s1 * s1 + s2 * s2).sqrt(), "({i},{j}): {m1} vs {m2}");
        }
    }
}

#[test]
fn fbm_convolution_mode_variance_matches_closed_form() {
    let g = TorusGrid::periodic(2, 8).unwrap();
    let h = 0.75;
    let spec = NoiseSpec::fbm(g, PhiSpec::new(1.0, 0.0, 1), h).unwrap();
    let modes = NoiseModes::new(&spec);
    let slot = modes.find(&[1, 0], 0, Part::Cos).unwrap();
    let times = TimeGrid::uniform(1.0, 256).unwrap();
    let samples: Vec<f64> = (0..4_000u64)
        .into_par_iter()
        .map(|i| {
            let w = generate(&spec, &times, &mut ChaCha8Rng::seed_from_u64(i)).unwrap();
            w.coefficients().unwrap()[256][slot]
        })
        .collect();
    let (emp, se) = mean_se(&samples.iter().map(|x| x * x).collect::<Vec<_>>());
    let want = fbm_mode_variance(h, 1.0, 1.0, 1.0).unwrap();
    assert!((emp - want).abs() <= 3.0 * se + 1e-3 * want, "{emp} vs {want} (se {se})");
}

#[test]
fn every_family_produces_solenoidal_samples() {
    let g = TorusGrid::periodic(2, 16).unwrap();
    let phi = PhiSpec::new(1.0, 1.0, 4);
    let times = TimeGrid::uniform(1.0, 16).unwrap();
    let specs = [
        NoiseSpec::wiener(g, phi).unwrap(),
        NoiseSpec::fbm(g, phi, 0.8).unwrap(),
        NoiseSpec::levy(g, 3.0, MarkLaw::SymmetricPareto { alpha: 3.0, scale: 1.0 }, &shear_field(g, 1.0)).unwrap(),
    ];
    for spec in &specs {
        let w = generate(spec, &times, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert!(w.values().states().iter().all(|s| s.divergence_residual() <= 1e-12));
        assert!(w.left_limits().iter().flatten().all(|s| s.divergence_residual() <= 1e-12));
        assert!(w.values().state(0).max_abs() == 0.0);
    }
}

#[test]
fn compensated_levy_has_zero_mean_for_biased_marks() {
    let g = TorusGrid::periodic(2, 8).unwrap();
    let spec = NoiseSpec::levy(g, 2.0, MarkLaw::Constant { value: 1.5 }, &shear_field(g, 1.0)).unwrap();
    let probe = g.flat_index(&[0, 1]);
    let times = TimeGrid::uniform(1.0, 8).unwrap();
    let values: Vec<f64> = (0..10_000u64)
        .into_par_iter()
        .map(|i| {
            let w = generate(&spec, &times, &mut ChaCha8Rng::seed_from_u64(i)).unwrap();
            let c = w.values().last().component(0)[probe];
            c.re + c.im
        })
        .collect();
    let (m, se) = mean_se(&values);
    assert!(m.abs() <= 3.0 * se, "mean {m} (se {se})");
}
