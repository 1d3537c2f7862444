use std::collections::HashMap;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Exp, StandardNormal};

use super::path::NoisePath;
use super::spec::{MarkLaw, NoiseFamily, NoiseSpec};
use crate::error::{Error, Result};
use crate::field::SpectralField;
use crate::picard::{TimeGrid, Trajectory};

fn sample_mark<R: Rng + ?Sized>(law: &MarkLaw, rng: &mut R) -> f64 {
    match *law {
        MarkLaw::Gaussian { mean, std } => {
            let z: f64 = rng.sample(StandardNormal);
            mean + std * z
        }
        MarkLaw::Constant { value } => value,
        MarkLaw::SymmetricPareto { alpha, scale } => {
            let u: f64 = rng.random::<f64>();
            let magnitude = scale * (1.0 - u).powf(-1.0 / alpha);
            if rng.random::<bool>() {
                magnitude
            } else {
                -magnitude
            }
        }
    }
}

/// Jump times of a rate-`λ₀` Poisson process on `(0, T]` with marks.
pub fn draw_jumps<R: Rng + ?Sized>(spec: &NoiseSpec, horizon: f64, rng: &mut R) -> Result<Vec<(f64, f64)>> {
    spec.expect_family(NoiseFamily::Levy)?;
    let levy = spec.levy.as_ref().expect("levy spec");
    let wait = Exp::new(levy.intensity).map_err(|e| Error::Config(format!("bad jump intensity: {e}")))?;
    let mut jumps = Vec::new();
    let mut t = 0.0;
    loop {
        let dt: f64 = rng.sample(wait);
        t += dt;
        if t > horizon {
            break;
        }
        jumps.push((t, sample_mark(&levy.marks, rng)));
    }
    Ok(jumps)
}

/// `Σ_{τ≤t} z e^{-(t-τ)A}ψ - λ₀E[z] ∫_0^t e^{-(t-s)A}ψ ds` at every node of
/// `times` with the jump times inserted; left limits are recorded at jump nodes.
pub fn levy_convolution_with_jumps(spec: &NoiseSpec, times: &TimeGrid, jumps: &[(f64, f64)]) -> Result<NoisePath> {
    spec.expect_family(NoiseFamily::Levy)?;
    let levy = spec.levy.as_ref().expect("levy spec");
    let horizon = times.horizon();
    if let Some((t, _)) = jumps.iter().find(|(t, _)| !(*t > 0.0 && *t <= horizon)) {
        return Err(Error::Input(format!("jump time {t} outside (0, {horizon}]")));
    }
    let jump_times: Vec<f64> = jumps.iter().map(|j| j.0).collect();
    let refined = times.with_inserted(&jump_times);
    let nodes = refined.nodes();
    let psi = &levy.profile;
    let grid = *psi.grid();
    let dim = grid.dim();
    let compensator_rate = levy.intensity * levy.marks.mean();

    // support of ψ, grouped by decay rate
    let support: Vec<usize> = (0..grid.len())
        .filter(|&f| (0..dim).any(|c| psi.component(c)[f] != Complex64::new(0.0, 0.0)))
        .collect();
    let mut rates: Vec<f64> = Vec::new();
    let mut rate_of: HashMap<u64, usize> = HashMap::new();
    let mode_rate: Vec<usize> = support
        .iter()
        .map(|&f| {
            let l = grid.k_squared(f);
            *rate_of.entry(l.to_bits()).or_insert_with(|| {
                rates.push(l);
                rates.len() - 1
            })
        })
        .collect();

    let compensator = |lambda: f64, t: f64| {
        if lambda == 0.0 {
            t
        } else {
            -(-lambda * t).exp_m1() / lambda
        }
    };
    let build = |factors: &[f64]| {
        let mut out = SpectralField::zeros(grid);
        let coeffs = out.coeffs_mut();
        for (&f, &r) in support.iter().zip(&mode_rate) {
            for c in 0..dim {
                coeffs[c][f] = psi.component(c)[f] * factors[r];
            }
        }
        out
    };

    let mut states = Vec::with_capacity(nodes.len());
    let mut left_limits = Vec::with_capacity(nodes.len());
    for &t in nodes {
        let tol = 1e-15 * t.max(1.0);
        let mut before = vec![0.0; rates.len()];
        let mut at = vec![0.0; rates.len()];
        for (r, &lambda) in rates.iter().enumerate() {
            let comp = compensator_rate * compensator(lambda, t);
            let mut strictly = 0.0;
            let mut here = 0.0;
            for &(tau, z) in jumps {
                if tau < t - tol {
                    strictly += z * (-lambda * (t - tau)).exp();
                } else if tau <= t + tol {
                    here += z;
                }
            }
            before[r] = strictly - comp;
            at[r] = strictly + here - comp;
        }
        let jumped = jumps.iter().any(|&(tau, _)| (tau - t).abs() <= tol);
        states.push(build(&at));
        left_limits.push(jumped.then(|| build(&before)));
    }
    NoisePath::new(
        NoiseFamily::Levy,
        Trajectory::new(refined, states)?,
        left_limits,
        None,
        jumps.to_vec(),
    )
}

/// Compensated compound-Poisson convolution with random jumps.
pub fn levy_convolution<R: Rng + ?Sized>(spec: &NoiseSpec, times: &TimeGrid, rng: &mut R) -> Result<NoisePath> {
    let jumps = draw_jumps(spec, times.horizon(), rng)?;
    levy_convolution_with_jumps(spec, times, &jumps)
}
