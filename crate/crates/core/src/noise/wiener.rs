use rand::Rng;
use rand_distr::StandardNormal;

use super::modes::NoiseModes;
use super::path::NoisePath;
use super::spec::{NoiseFamily, NoiseSpec};
use crate::error::Result;
use crate::picard::{TimeGrid, Trajectory};

/// Variance of the exact OU increment over a step `dt`:
/// `φ^2 (1 - e^{-2λ dt}) / (2λ)`, or `φ^2 dt` at `λ = 0`.
pub fn ou_increment_variance(phi: f64, lambda: f64, dt: f64) -> f64 {
    if lambda == 0.0 {
        phi * phi * dt
    } else {
        -phi * phi * (-2.0 * lambda * dt).exp_m1() / (2.0 * lambda)
    }
}

/// `∫_0^t e^{-(t-s)A} Φ dW(s)` sampled exactly at the nodes, mode by mode.
pub fn wiener_convolution<R: Rng + ?Sized>(spec: &NoiseSpec, times: &TimeGrid, rng: &mut R) -> Result<NoisePath> {
    spec.expect_family(NoiseFamily::Wiener)?;
    let modes = NoiseModes::new(spec);
    let mut amps = vec![0.0; modes.len()];
    let mut coefficients = Vec::with_capacity(times.len());
    let mut states = Vec::with_capacity(times.len());
    coefficients.push(amps.clone());
    states.push(modes.synthesize(&amps));
    for j in 0..times.intervals() {
        let dt = times.step(j);
        for (a, slot) in amps.iter_mut().zip(modes.slots()) {
            let z: f64 = rng.sample(StandardNormal);
            let sd = ou_increment_variance(slot.phi, slot.k_squared, dt).sqrt();
            *a = *a * (-slot.k_squared * dt).exp() + sd * z;
        }
        coefficients.push(amps.clone());
        states.push(modes.synthesize(&amps));
    }
    NoisePath::continuous(
        NoiseFamily::Wiener,
        Trajectory::new(times.clone(), states)?,
        Some(coefficients),
    )
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::field::TorusGrid;
    use crate::noise::PhiSpec;

    #[test]
    fn zero_sigma_gives_zero_path() {
        let grid = TorusGrid::periodic(2, 8).unwrap();
        let spec = NoiseSpec::wiener(grid, PhiSpec::new(0.0, 1.0, 3)).unwrap();
        let times = TimeGrid::uniform(1.0, 8).unwrap();
        let w = wiener_convolution(&spec, &times, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert_eq!(w.mu_p(4.0).unwrap(), 0.0);
    }

    #[test]
    fn samples_are_solenoidal_and_start_at_zero() {
        let grid = TorusGrid::periodic(3, 8).unwrap();
        let spec = NoiseSpec::wiener(grid, PhiSpec::new(1.0, 1.0, 3)).unwrap();
        let times = TimeGrid::uniform(0.5, 8).unwrap();
        let w = wiener_convolution(&spec, &times, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        assert_eq!(w.values().state(0).max_abs(), 0.0);
        for s in w.values().states() {
            assert!(s.divergence_residual() < 1e-12);
        }
    }

    #[test]
    fn increment_variance_limits() {
        assert!((ou_increment_variance(1.0, 1.0, 1e3) - 0.5).abs() < 1e-15);
        assert_eq!(ou_increment_variance(2.0, 0.0, 0.25), 1.0);
        let small = ou_increment_variance(1.0, 1e-12, 0.5);
        assert!((small - 0.5).abs() < 1e-11);
    }

    #[test]
    fn wrong_family_is_a_usage_error() {
        let grid = TorusGrid::periodic(2, 8).unwrap();
        let spec = NoiseSpec::fbm(grid, PhiSpec::new(1.0, 1.0, 2), 0.7).unwrap();
        let times = TimeGrid::uniform(1.0, 8).unwrap();
        let err = wiener_convolution(&spec, &times, &mut ChaCha8Rng::seed_from_u64(1)).unwrap_err();
        assert!(matches!(err, crate::error::Error::Usage(_)));
    }
}
