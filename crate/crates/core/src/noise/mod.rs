//! Driving noises and their convolutions against the heat semigroup.

mod fbm;
mod kernel;
mod levy;
mod modes;
mod path;
mod spec;
mod wiener;

use std::io::Write;

use rand::Rng;

pub use fbm::{fbm_convolution, fbm_covariance, fbm_mode_variance, fbm_path, fbm_path_pair};
pub use kernel::{fbm_kernel_identity_check, kernel_normalization, kernel_value, tanh_sinh, FbmKernelTable};
pub use levy::{draw_jumps, levy_convolution, levy_convolution_with_jumps};
pub use modes::{NoiseModes, Part, Slot};
pub use path::NoisePath;
pub use spec::{LevySpec, MarkLaw, NoiseFamily, NoiseSpec, PhiSpec};
pub use wiener::{ou_increment_variance, wiener_convolution};

use crate::error::{Error, Result};
use crate::picard::{TimeGrid, Trajectory};

/// One path of the noise described by `spec`.
pub fn generate<R: Rng + ?Sized>(spec: &NoiseSpec, times: &TimeGrid, rng: &mut R) -> Result<NoisePath> {
    if spec.is_off() {
        return Ok(NoisePath::zero(spec.family, Trajectory::zeros(spec.grid, times.clone())));
    }
    match spec.family {
        NoiseFamily::Wiener => wiener_convolution(spec, times, rng),
        NoiseFamily::Fbm => fbm_convolution(spec, times, rng),
        NoiseFamily::Levy => levy_convolution(spec, times, rng),
    }
}

/// Least-squares slope `γ` of `log ‖S(t)Φ‖_HS` against `-log t`, where
/// `‖S(t)Φ‖_HS^2 = Σ φ_k^2 e^{-2|k|^2 t}` over the retained slots.
pub fn green_exponent(spec: &NoiseSpec, t_min: f64, t_max: f64, points: usize) -> Result<f64> {
    if !(t_min > 0.0 && t_min < t_max) || points < 2 {
        return Err(Error::Domain("green exponent needs 0 < t_min < t_max and two points".into()));
    }
    let modes = NoiseModes::new(spec);
    if modes.is_empty() {
        return Ok(0.0);
    }
    let samples: Vec<(f64, f64)> = (0..points)
        .map(|i| {
            let x = t_min.ln() + (t_max / t_min).ln() * i as f64 / (points - 1) as f64;
            let t = x.exp();
            let hs: f64 = modes
                .slots()
                .iter()
                .map(|s| s.phi * s.phi * (-2.0 * s.k_squared * t).exp())
                .sum();
            (-x, 0.5 * hs.ln())
        })
        .collect();
    let n = samples.len() as f64;
    let mx = samples.iter().map(|s| s.0).sum::<f64>() / n;
    let my = samples.iter().map(|s| s.1).sum::<f64>() / n;
    let sxy: f64 = samples.iter().map(|s| (s.0 - mx) * (s.1 - my)).sum();
    let sxx: f64 = samples.iter().map(|s| (s.0 - mx).powi(2)).sum();
    Ok(sxy / sxx)
}

/// Header for [`write_path_rows`].
pub fn path_csv_header(modes: Option<&NoiseModes>) -> Vec<String> {
    let mut h: Vec<String> = ["path_id", "t", "norm_p", "norm_2"].iter().map(|s| s.to_string()).collect();
    if let Some(m) = modes {
        let dim = m.grid().dim();
        h.extend(m.slots().iter().map(|s| s.label(dim)));
    }
    h
}

/// One CSV row per node: `path_id, t, ‖w‖_p, ‖w‖_2` and, when `with_modes`,
/// the slot amplitudes.
pub fn write_path_rows<W: Write>(
    out: &mut csv::Writer<W>,
    path_id: usize,
    path: &NoisePath,
    p: f64,
    with_modes: bool,
) -> Result<()> {
    let norms_p = path.values().lp_norms(p)?;
    let norms_2 = path.values().lp_norms(2.0)?;
    for (j, t) in path.times().nodes().iter().enumerate() {
        let mut row = vec![path_id.to_string(), t.to_string(), norms_p[j].to_string(), norms_2[j].to_string()];
        if with_modes {
            if let Some(c) = path.coefficients() {
                row.extend(c[j].iter().map(|a| a.to_string()));
            }
        }
        out.write_record(&row).map_err(csv_error)?;
    }
    Ok(())
}

pub(crate) fn csv_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Numeric(format!("csv: {other:?}")),
    }
}
