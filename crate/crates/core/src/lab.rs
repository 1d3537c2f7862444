//! Empirical constants for the semigroup smoothing estimates.
//!
//! Every measurement is a supremum of a scale-free ratio
//! `t^γ ‖e^{-tA} X‖_q / D` over samples and over `t` in a declared range.

use std::path::Path;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{ModelExponents, SpectralField, TorusGrid};
use crate::ops::{convection, damping, damping_derivative, MultiplierTable};

/// Band of the random sample law (`max|k_i| <= band`).
pub const SAMPLE_BAND: usize = 4;
/// Exponent of the coefficient damping `(1+|k|^2)^{-1}`.
pub const SAMPLE_DECAY: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimate {
    Heat,
    Gradient,
    Convection,
    Damping,
    DampingDerivative,
}

impl Estimate {
    pub fn name(&self) -> &'static str {
        match self {
            Estimate::Heat => "heat",
            Estimate::Gradient => "gradient",
            Estimate::Convection => "convection",
            Estimate::Damping => "damping",
            Estimate::DampingDerivative => "damping_derivative",
        }
    }
}

/// One measured constant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstantReport {
    pub estimate: Estimate,
    pub p: f64,
    /// `q` for the semigroup estimates, `r` for the damping ones, `p` for convection.
    pub q_or_r: f64,
    pub value: f64,
    /// Samples that entered the supremum.
    pub samples: usize,
    /// Samples skipped because the denominator vanished.
    pub skipped: usize,
    pub t_min: f64,
    pub t_max: f64,
    pub argmax_sample: Option<usize>,
    pub argmax_t: Option<f64>,
}

/// The five measured constants for one `(d, p, q, r)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateConstants {
    pub dim: usize,
    pub heat: ConstantReport,
    pub gradient: ConstantReport,
    pub convection: ConstantReport,
    pub damping: ConstantReport,
    pub damping_derivative: ConstantReport,
}

impl EstimateConstants {
    /// `max(C_B, C_C, C_C')`, the single constant used by the budgets.
    pub fn contraction_constant(&self) -> f64 {
        self.convection
            .value
            .max(self.damping.value)
            .max(self.damping_derivative.value)
    }

    pub fn reports(&self) -> [&ConstantReport; 5] {
        [
            &self.heat,
            &self.gradient,
            &self.convection,
            &self.damping,
            &self.damping_derivative,
        ]
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Numeric(format!("cannot serialize constants: {e}")))
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(format!("bad constants file: {e}")))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_toml()?)?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }
}

/// Where samples come from.
#[derive(Debug, Clone, Copy)]
pub enum SampleSource<'a> {
    /// `count` random solenoidal fields (pairs for bilinear estimates).
    Random { count: usize },
    /// Given fields; bilinear estimates use `(u, u)`.
    Fields(&'a [SpectralField]),
    /// Given pairs `(u, v)`; linear estimates use `u`.
    Pairs(&'a [(SpectralField, SpectralField)]),
}

impl SampleSource<'_> {
    pub fn len(&self) -> usize {
        match self {
            SampleSource::Random { count } => *count,
            SampleSource::Fields(f) => f.len(),
            SampleSource::Pairs(p) => p.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabSettings {
    pub grid: TorusGrid,
    pub t_min: f64,
    pub t_max: f64,
    /// Log-uniform points before golden-section refinement.
    pub t_points: usize,
    pub seed: u64,
    pub band: usize,
    pub decay: f64,
}

impl LabSettings {
    pub fn new(grid: TorusGrid, t_min: f64, t_max: f64, seed: u64) -> Self {
        Self {
            grid,
            t_min,
            t_max,
            t_points: 33,
            seed,
            band: SAMPLE_BAND,
            decay: SAMPLE_DECAY,
        }
    }

    fn check(&self) -> Result<()> {
        if !(self.t_min > 0.0 && self.t_min <= self.t_max && self.t_max.is_finite()) {
            return Err(Error::Domain(format!(
                "t range must satisfy 0 < t_min <= t_max, got [{}, {}]",
                self.t_min, self.t_max
            )));
        }
        if self.t_points < 2 {
            return Err(Error::Config("lab needs at least two t points".into()));
        }
        Ok(())
    }

    /// Sample `index`, slot 0 or 1, from its own ChaCha stream.
    pub fn random_sample(&self, index: usize, slot: u64) -> SpectralField {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(2 * index as u64 + slot);
        SpectralField::random_solenoidal(self.grid, self.band, self.decay, &mut rng)
    }

    fn pair(&self, source: &SampleSource<'_>, index: usize) -> (SpectralField, SpectralField) {
        match source {
            SampleSource::Random { .. } => (self.random_sample(index, 0), self.random_sample(index, 1)),
            SampleSource::Fields(f) => (f[index].clone(), f[index].clone()),
            SampleSource::Pairs(p) => p[index].clone(),
        }
    }
}

/// `f(t)` maximized over the log grid, then refined by golden section in
/// `log t` around the best node.
fn sup_over_time(settings: &LabSettings, f: impl Fn(f64) -> f64) -> (f64, f64) {
    let (a, b) = (settings.t_min.ln(), settings.t_max.ln());
    if a == b {
        return (f(settings.t_min), settings.t_min);
    }
    let n = settings.t_points;
    let xs: Vec<f64> = (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect();
    let values: Vec<f64> = xs.iter().map(|x| f(x.exp())).collect();
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    let (mut lo, mut hi) = (xs[best.saturating_sub(1)], xs[(best + 1).min(n - 1)]);
    let mut top = (values[best], xs[best].exp());
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let mut f1 = f(x1.exp());
    let mut f2 = f(x2.exp());
    for _ in 0..80 {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = f(x2.exp());
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = f(x1.exp());
        }
        if hi - lo < 1e-14 {
            break;
        }
    }
    for (v, x) in [(f1, x1), (f2, x2)] {
        if v > top.0 {
            top = (v, x.exp());
        }
    }
    top
}

/// `‖e^{-tA} X‖_q` for fixed `X`, one inverse transform per call.
fn decayed_norm(table: &MultiplierTable, x: &SpectralField, t: f64, q: f64) -> f64 {
    let mut y = x.clone();
    table.heat_in_place(&mut y, t);
    y.lp_norm(q).unwrap_or(f64::NAN)
}

/// `L^q` norm of the Frobenius magnitude of `∇ e^{-tA} g`.
fn gradient_norm(table: &MultiplierTable, g: &SpectralField, t: f64, q: f64) -> f64 {
    let grid = *g.grid();
    let dim = grid.dim();
    let mut y = g.clone();
    table.heat_in_place(&mut y, t);
    let mut squares = vec![0.0; grid.len()];
    for j in 0..dim {
        let coeffs: Vec<Vec<Complex64>> = y
            .coeffs()
            .iter()
            .map(|comp| {
                comp.iter()
                    .enumerate()
                    .map(|(flat, c)| {
                        if grid.is_nyquist(flat) {
                            Complex64::new(0.0, 0.0)
                        } else {
                            c * Complex64::new(0.0, grid.wavevector(flat)[j])
                        }
                    })
                    .collect()
            })
            .collect();
        let phys = SpectralField::from_coeffs(grid, coeffs).expect("shape").inverse();
        for comp in phys.components() {
            for (s, v) in squares.iter_mut().zip(comp) {
                *s += v * v;
            }
        }
    }
    let peak = squares.iter().cloned().fold(0.0, f64::max).sqrt();
    if peak == 0.0 {
        return 0.0;
    }
    let sum: f64 = squares.iter().map(|s| (s.sqrt() / peak).powf(q)).sum();
    peak * (sum * grid.cell_volume()).powf(1.0 / q)
}

/// Fixed per-sample data: the field acted on and the denominator.
struct Prepared {
    x: SpectralField,
    denominator: f64,
}

fn measure(
    estimate: Estimate,
    p: f64,
    q_or_r: f64,
    norm_exponent: f64,
    gamma: f64,
    source: &SampleSource<'_>,
    settings: &LabSettings,
    prepare: impl Fn(SpectralField, SpectralField) -> Result<Prepared> + Sync,
) -> Result<ConstantReport> {
    settings.check()?;
    for u in sample_grids(source) {
        if u != &settings.grid {
            return Err(Error::Input("sample field is not on the lab grid".into()));
        }
    }
    let table = MultiplierTable::new(settings.grid);
    let gradient = estimate == Estimate::Gradient;
    let results: Vec<Option<(f64, f64)>> = (0..source.len())
        .into_par_iter()
        .map(|i| {
            let (u, v) = settings.pair(source, i);
            let prep = prepare(u, v)?;
            if !(prep.denominator > 0.0) {
                return Ok(None);
            }
            let ratio = |t: f64| {
                let num = if gradient {
                    gradient_norm(&table, &prep.x, t, norm_exponent)
                } else {
                    decayed_norm(&table, &prep.x, t, norm_exponent)
                };
                t.powf(gamma) * num / prep.denominator
            };
            Ok(Some(sup_over_time(settings, ratio)))
        })
        .collect::<Result<_>>()?;
    let mut report = ConstantReport {
        estimate,
        p,
        q_or_r,
        value: 0.0,
        samples: 0,
        skipped: 0,
        t_min: settings.t_min,
        t_max: settings.t_max,
        argmax_sample: None,
        argmax_t: None,
    };
    for (i, r) in results.into_iter().enumerate() {
        match r {
            None => report.skipped += 1,
            Some((value, t)) => {
                if !value.is_finite() {
                    return Err(Error::Numeric(format!("{} ratio is not finite", estimate.name())));
                }
                report.samples += 1;
                if report.argmax_sample.is_none() || value > report.value {
                    report.value = value;
                    report.argmax_sample = Some(i);
                    report.argmax_t = Some(t);
                }
            }
        }
    }
    Ok(report)
}

fn sample_grids<'a>(source: &'a SampleSource<'a>) -> Vec<&'a TorusGrid> {
    match source {
        SampleSource::Random { .. } => Vec::new(),
        SampleSource::Fields(f) => f.iter().map(|u| u.grid()).collect(),
        SampleSource::Pairs(p) => p.iter().flat_map(|(u, v)| [u.grid(), v.grid()]).collect(),
    }
}

fn check_pq(p: f64, q: f64) -> Result<()> {
    if !(p > 1.0 && p.is_finite() && q.is_finite()) {
        return Err(Error::Domain(format!("need 1 < p < inf, got p = {p}")));
    }
    if q < p {
        return Err(Error::Domain(format!("need p <= q, got p = {p}, q = {q}")));
    }
    Ok(())
}

/// Sup of `t^{(d/2)(1/p-1/q)} ‖e^{-tA}g‖_q / ‖g‖_p`.
pub fn measure_heat_constant(
    p: f64,
    q: f64,
    source: &SampleSource<'_>,
    settings: &LabSettings,
) -> Result<ConstantReport> {
    check_pq(p, q)?;
    let d = settings.grid.dim() as f64;
    let gamma = d / 2.0 * (1.0 / p - 1.0 / q);
    measure(Estimate::Heat, p, q, q, gamma, source, settings, |g, _| {
        Ok(Prepared {
            denominator: g.lp_norm(p)?,
            x: g,
        })
    })
}

/// Sup of `t^{1/2+(d/2)(1/p-1/q)} ‖∇e^{-tA}g‖_q / ‖g‖_p`.
pub fn measure_gradient_constant(
    p: f64,
    q: f64,
    source: &SampleSource<'_>,
    settings: &LabSettings,
) -> Result<ConstantReport> {
    check_pq(p, q)?;
    let d = settings.grid.dim() as f64;
    let gamma = 0.5 + d / 2.0 * (1.0 / p - 1.0 / q);
    measure(Estimate::Gradient, p, q, q, gamma, source, settings, |g, _| {
        Ok(Prepared {
            denominator: g.lp_norm(p)?,
            x: g,
        })
    })
}

/// Sup of `t^{1/2+d/(2p)} ‖e^{-tA}B(u,v)‖_p / (‖u‖_p ‖v‖_p)`.
#[allow(non_snake_case)]
pub fn measure_B_constant(p: f64, source: &SampleSource<'_>, settings: &LabSettings) -> Result<ConstantReport> {
    let d = settings.grid.dim() as f64;
    if !(p > d && p.is_finite()) {
        return Err(Error::Domain(format!("convection estimate needs p > d, got p = {p}")));
    }
    let gamma = 0.5 + d / (2.0 * p);
    measure(Estimate::Convection, p, p, p, gamma, source, settings, |u, v| {
        Ok(Prepared {
            denominator: u.lp_norm(p)? * v.lp_norm(p)?,
            x: convection(&u, &v)?,
        })
    })
}

/// Sups for `e^{-tA}C(u)` and `e^{-tA}C'(u)v`, both with exponent `d(r-1)/(2p)`.
#[allow(non_snake_case)]
pub fn measure_C_constants(
    p: f64,
    r: f64,
    source: &SampleSource<'_>,
    settings: &LabSettings,
) -> Result<(ConstantReport, ConstantReport)> {
    let d = settings.grid.dim();
    if !(r >= 1.0 && r.is_finite()) {
        return Err(Error::Domain(format!("damping estimate needs r >= 1, got {r}")));
    }
    if !(p > d as f64 * (r - 1.0) / 2.0 && p > 1.0 && p.is_finite()) {
        return Err(Error::Domain(format!("damping estimate needs p > d(r-1)/2, got p = {p}")));
    }
    let gamma = d as f64 * (r - 1.0) / (2.0 * p);
    let c = measure(Estimate::Damping, p, r, p, gamma, source, settings, |u, _| {
        Ok(Prepared {
            denominator: u.lp_norm(p)?.powf(r),
            x: damping(&u, r)?,
        })
    })?;
    let cp = measure(Estimate::DampingDerivative, p, r, p, gamma, source, settings, |u, v| {
        Ok(Prepared {
            denominator: u.lp_norm(p)?.powf(r - 1.0) * v.lp_norm(p)?,
            x: damping_derivative(&u, &v, r)?,
        })
    })?;
    Ok((c, cp))
}

/// All five constants, with `q` for the semigroup estimates.
pub fn measure_all(
    exponents: &ModelExponents,
    q: f64,
    source: &SampleSource<'_>,
    settings: &LabSettings,
) -> Result<EstimateConstants> {
    if settings.grid.dim() != exponents.dim {
        return Err(Error::Input("lab grid dimension differs from the model".into()));
    }
    let (p, r) = (exponents.p, exponents.r);
    let heat = measure_heat_constant(p, q, source, settings)?;
    let gradient = measure_gradient_constant(p, q, source, settings)?;
    let convection = measure_B_constant(p, source, settings)?;
    let (damping, damping_derivative) = measure_C_constants(p, r, source, settings)?;
    Ok(EstimateConstants {
        dim: exponents.dim,
        heat,
        gradient,
        convection,
        damping,
        damping_derivative,
    })
}
