use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::FftPlanner;
use statrs::function::gamma::{gamma, gamma_lr};

use super::modes::NoiseModes;
use super::path::NoisePath;
use super::spec::{NoiseFamily, NoiseSpec};
use crate::error::{Error, Result};
use crate::picard::{TimeGrid, Trajectory};

/// `R_H(t,s) = (t^{2H} + s^{2H} - |t-s|^{2H}) / 2`.
pub fn fbm_covariance(hurst: f64, t: f64, s: f64) -> f64 {
    let h2 = 2.0 * hurst;
    0.5 * (t.abs().powf(h2) + s.abs().powf(h2) - (t - s).abs().powf(h2))
}

/// Autocovariance of fractional Gaussian noise with step `dt` at lag `k`.
fn fgn_autocovariance(hurst: f64, dt: f64, k: usize) -> f64 {
    let h2 = 2.0 * hurst;
    let k = k as f64;
    0.5 * dt.powf(h2) * ((k + 1.0).powf(h2) - 2.0 * k.powf(h2) + (k - 1.0).abs().powf(h2))
}

/// Square roots of the circulant eigenvalues divided by the embedding size.
fn embedding_roots(hurst: f64, dt: f64, n: usize) -> Result<Vec<f64>> {
    let m = 2 * n;
    let mut row: Vec<Complex64> = (0..m)
        .map(|j| {
            let lag = if j <= n { j } else { m - j };
            Complex64::new(fgn_autocovariance(hurst, dt, lag), 0.0)
        })
        .collect();
    FftPlanner::new().plan_fft_forward(m).process(&mut row);
    let scale = row.iter().map(|c| c.re.abs()).fold(0.0, f64::max);
    row.iter()
        .map(|c| {
            if c.re < -1e-10 * scale {
                Err(Error::Numeric(format!("circulant embedding is not nonnegative ({})", c.re)))
            } else {
                Ok((c.re.max(0.0) / m as f64).sqrt())
            }
        })
        .collect()
}

fn check_grid(hurst: f64, times: &TimeGrid) -> Result<()> {
    if !(hurst > 0.0 && hurst < 1.0) {
        return Err(Error::Domain(format!("Hurst parameter must lie in (0, 1), got {hurst}")));
    }
    if !times.is_uniform() {
        return Err(Error::Input("fractional noise needs a uniform time grid".into()));
    }
    Ok(())
}

/// Two independent fBm paths on the nodes (Davies-Harte embedding: the real
/// and imaginary parts of one complex draw).
pub fn fbm_path_pair<R: Rng + ?Sized>(hurst: f64, times: &TimeGrid, rng: &mut R) -> Result<(Vec<f64>, Vec<f64>)> {
    check_grid(hurst, times)?;
    let n = times.intervals();
    let roots = embedding_roots(hurst, times.step(0), n)?;
    Ok(draw_pair(&roots, n, rng))
}

fn draw_pair<R: Rng + ?Sized>(roots: &[f64], n: usize, rng: &mut R) -> (Vec<f64>, Vec<f64>) {
    let m = roots.len();
    let mut data: Vec<Complex64> = roots
        .iter()
        .map(|r| {
            let a: f64 = rng.sample(StandardNormal);
            let b: f64 = rng.sample(StandardNormal);
            Complex64::new(a, b) * *r
        })
        .collect();
    FftPlanner::new().plan_fft_forward(m).process(&mut data);
    let mut re = vec![0.0; n + 1];
    let mut im = vec![0.0; n + 1];
    for j in 0..n {
        re[j + 1] = re[j] + data[j].re;
        im[j + 1] = im[j] + data[j].im;
    }
    (re, im)
}

/// One fBm sample path `W^H(t_j)` on a uniform grid.
pub fn fbm_path<R: Rng + ?Sized>(hurst: f64, times: &TimeGrid, rng: &mut R) -> Result<Vec<f64>> {
    Ok(fbm_path_pair(hurst, times, rng)?.0)
}

/// `∫_0^t e^{-(t-s)A} Φ dW^H(s)` with one independent fBm per slot, `W^H`
/// interpolated linearly between nodes.
pub fn fbm_convolution<R: Rng + ?Sized>(spec: &NoiseSpec, times: &TimeGrid, rng: &mut R) -> Result<NoisePath> {
    spec.expect_family(NoiseFamily::Fbm)?;
    let hurst = spec.hurst.ok_or_else(|| Error::Config("fractional noise needs H".into()))?;
    check_grid(hurst, times)?;
    let modes = NoiseModes::new(spec);
    let n = times.intervals();
    let roots = embedding_roots(hurst, times.step(0), n)?;
    let mut drivers: Vec<Vec<f64>> = Vec::with_capacity(modes.len() + 1);
    while drivers.len() < modes.len() {
        let (a, b) = draw_pair(&roots, n, rng);
        drivers.push(a);
        drivers.push(b);
    }
    drivers.truncate(modes.len());
    let h = times.step(0);
    let factors: Vec<(f64, f64)> = modes
        .slots()
        .iter()
        .map(|s| {
            let z = s.k_squared * h;
            let phi1 = if z < 1e-8 { 1.0 - z / 2.0 } else { -(-z).exp_m1() / z };
            ((-z).exp(), s.phi * phi1)
        })
        .collect();
    let mut amps = vec![0.0; modes.len()];
    let mut coefficients = Vec::with_capacity(times.len());
    let mut states = Vec::with_capacity(times.len());
    coefficients.push(amps.clone());
    states.push(modes.synthesize(&amps));
    for j in 0..n {
        for ((a, (decay, gain)), w) in amps.iter_mut().zip(&factors).zip(&drivers) {
            *a = *a * decay + gain * (w[j + 1] - w[j]);
        }
        coefficients.push(amps.clone());
        states.push(modes.synthesize(&amps));
    }
    NoisePath::continuous(NoiseFamily::Fbm, Trajectory::new(times.clone(), states)?, Some(coefficients))
}

/// `Var ∫_0^t e^{-λ(t-s)} φ dW^H(s)`, written with the lower incomplete gamma
/// function as `2H(2H-1) φ^2 λ^{1-2H} Γ(2H-1) ∫_0^t e^{-2λ(t-u)} P(2H-1, λu) du`.
pub fn fbm_mode_variance(hurst: f64, lambda: f64, phi: f64, t: f64) -> Result<f64> {
    if !(hurst >= 0.5 && hurst < 1.0) {
        return Err(Error::Domain(format!("mode variance needs 1/2 <= H < 1, got {hurst}")));
    }
    if t <= 0.0 {
        return Ok(0.0);
    }
    if lambda == 0.0 {
        return Ok(phi * phi * t.powf(2.0 * hurst));
    }
    if hurst == 0.5 {
        return Ok(super::wiener::ou_increment_variance(phi, lambda, t));
    }
    let a = 2.0 * hurst - 1.0;
    let integral = super::kernel::tanh_sinh(
        |u| (-2.0 * lambda * (t - u)).exp() * gamma_lr(a, lambda * u),
        0.0,
        t,
        1e-12,
    )?;
    Ok(2.0 * hurst * a * phi * phi * lambda.powf(-a) * gamma(a) * integral)
}
