use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use super::fft;
use super::grid::TorusGrid;
use crate::error::{Error, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Real vector field sampled on the collocation grid, one array per component.
#[derive(Debug, Clone, PartialEq)]
pub struct PhysicalField {
    grid: TorusGrid,
    components: Vec<Vec<f64>>,
}

impl PhysicalField {
    pub fn new(grid: TorusGrid, components: Vec<Vec<f64>>) -> Result<Self> {
        if components.len() != grid.dim() {
            return Err(Error::Input(format!(
                "expected {} components, got {}",
                grid.dim(),
                components.len()
            )));
        }
        if let Some(bad) = components.iter().find(|c| c.len() != grid.len()) {
            return Err(Error::Input(format!(
                "expected {} samples per component, got {}",
                grid.len(),
                bad.len()
            )));
        }
        Ok(Self { grid, components })
    }

    /// Samples `f(x)` at every collocation point.
    pub fn from_fn(grid: TorusGrid, f: impl Fn(&[f64]) -> Vec<f64>) -> Self {
        let dim = grid.dim();
        let mut components = vec![vec![0.0; grid.len()]; dim];
        for j in 0..grid.len() {
            let x = grid.point(j);
            let v = f(&x[..dim]);
            for (c, comp) in components.iter_mut().enumerate() {
                comp[j] = v[c];
            }
        }
        Self { grid, components }
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn components(&self) -> &[Vec<f64>] {
        &self.components
    }

    pub fn component(&self, c: usize) -> &[f64] {
        &self.components[c]
    }

    /// Euclidean magnitude of the vector at every point.
    pub fn magnitudes(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.grid.len()];
        for comp in &self.components {
            for (o, v) in out.iter_mut().zip(comp) {
                *o += v * v;
            }
        }
        out.iter_mut().for_each(|o| *o = o.sqrt());
        out
    }

    /// Rectangle-rule `L^p` norm of the pointwise Euclidean magnitude.
    pub fn lp_norm(&self, p: f64) -> Result<f64> {
        if !(p >= 1.0 && p.is_finite()) {
            return Err(Error::Domain(format!("L^p exponent must lie in [1, inf), got {p}")));
        }
        let mags = self.magnitudes();
        if mags.iter().any(|m| !m.is_finite()) {
            return Err(Error::Numeric("non-finite sample in L^p norm".into()));
        }
        let peak = mags.iter().cloned().fold(0.0, f64::max);
        if peak == 0.0 {
            return Ok(0.0);
        }
        // scale by the peak so large p does not overflow
        let sum: f64 = mags.iter().map(|m| (m / peak).powf(p)).sum();
        Ok(peak * (sum * self.grid.cell_volume()).powf(1.0 / p))
    }
}

/// Truncated Fourier representation of a real `d`-component field.
///
/// Coefficients use the unnormalized forward DFT, `û(k) = Σ_j u(x_j) e^{-ik·x_j}`,
/// stored in FFT order along each axis; the inverse carries `1/N^d`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField {
    grid: TorusGrid,
    coeffs: Vec<Vec<Complex64>>,
}

impl SpectralField {
    pub fn zeros(grid: TorusGrid) -> Self {
        Self {
            grid,
            coeffs: vec![vec![ZERO; grid.len()]; grid.dim()],
        }
    }

    pub fn from_coeffs(grid: TorusGrid, coeffs: Vec<Vec<Complex64>>) -> Result<Self> {
        if coeffs.len() != grid.dim() || coeffs.iter().any(|c| c.len() != grid.len()) {
            return Err(Error::Input("coefficient array does not match the grid".into()));
        }
        Ok(Self { grid, coeffs })
    }

    /// Forward transform of physical samples.
    pub fn forward(field: &PhysicalField) -> Self {
        let grid = *field.grid();
        let coeffs = field
            .components()
            .iter()
            .map(|comp| {
                let mut buf: Vec<Complex64> = comp.iter().map(|&v| Complex64::new(v, 0.0)).collect();
                fft::transform(&mut buf, grid.n(), grid.dim(), false);
                buf
            })
            .collect();
        Self { grid, coeffs }
    }

    /// Inverse transform; imaginary round-off is discarded.
    pub fn inverse(&self) -> PhysicalField {
        let components = self
            .coeffs
            .iter()
            .map(|comp| {
                let mut buf = comp.clone();
                fft::transform(&mut buf, self.grid.n(), self.grid.dim(), true);
                buf.into_iter().map(|c| c.re).collect()
            })
            .collect();
        PhysicalField {
            grid: self.grid,
            components,
        }
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn coeffs(&self) -> &[Vec<Complex64>] {
        &self.coeffs
    }

    pub fn component(&self, c: usize) -> &[Complex64] {
        &self.coeffs[c]
    }

    pub(crate) fn coeffs_mut(&mut self) -> &mut [Vec<Complex64>] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<Vec<Complex64>> {
        self.coeffs
    }

    /// Vector coefficient at signed mode index `k`.
    pub fn mode(&self, k: &[i64]) -> Vec<Complex64> {
        let flat = self.grid.flat_index(k);
        self.coeffs.iter().map(|c| c[flat]).collect()
    }

    /// Sets the coefficient at `k` and its conjugate at `-k`.
    pub fn set_mode(&mut self, k: &[i64], value: &[Complex64]) {
        let flat = self.grid.flat_index(k);
        let neg = self.grid.negated(flat);
        for (c, comp) in self.coeffs.iter_mut().enumerate() {
            comp[flat] = value[c];
            comp[neg] = value[c].conj();
        }
    }

    pub fn check_same_grid(&self, other: &SpectralField) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::Input("fields live on different grids".into()));
        }
        Ok(())
    }

    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        out.scale_in_place(factor);
        out
    }

    pub fn scale_in_place(&mut self, factor: f64) {
        for comp in &mut self.coeffs {
            comp.iter_mut().for_each(|c| *c *= factor);
        }
    }

    /// `self + a * other`.
    pub fn axpy(&self, a: f64, other: &SpectralField) -> Self {
        let mut out = self.clone();
        out.axpy_in_place(a, other);
        out
    }

    pub fn axpy_in_place(&mut self, a: f64, other: &SpectralField) {
        debug_assert_eq!(self.grid, other.grid);
        for (mine, theirs) in self.coeffs.iter_mut().zip(&other.coeffs) {
            for (m, t) in mine.iter_mut().zip(theirs) {
                *m += *t * a;
            }
        }
    }

    pub fn add(&self, other: &SpectralField) -> Self {
        self.axpy(1.0, other)
    }

    pub fn sub(&self, other: &SpectralField) -> Self {
        self.axpy(-1.0, other)
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs
            .iter()
            .all(|c| c.iter().all(|z| z.re.is_finite() && z.im.is_finite()))
    }

    pub fn lp_norm(&self, p: f64) -> Result<f64> {
        lp_norm(self, p)
    }

    /// Parseval `L^2` norm, without a transform.
    pub fn l2_norm(&self) -> f64 {
        let energy: f64 = self
            .coeffs
            .iter()
            .flat_map(|c| c.iter())
            .map(|z| z.norm_sqr())
            .sum();
        let npts = self.grid.len() as f64;
        (energy * self.grid.volume() / (npts * npts)).sqrt()
    }

    /// Largest coefficient magnitude over all components.
    pub fn max_abs(&self) -> f64 {
        self.coeffs
            .iter()
            .flat_map(|c| c.iter())
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }

    /// `max_k |k·û(k)| / |k|`, relative to the largest coefficient.
    pub fn divergence_residual(&self) -> f64 {
        let scale = self.max_abs();
        if scale == 0.0 {
            return 0.0;
        }
        let dim = self.grid.dim();
        let mut worst: f64 = 0.0;
        for flat in 0..self.grid.len() {
            let k = self.grid.wavevector(flat);
            let k2 = k[..dim].iter().map(|v| v * v).sum::<f64>();
            if k2 == 0.0 {
                continue;
            }
            let mut dot = ZERO;
            for c in 0..dim {
                dot += self.coeffs[c][flat] * k[c];
            }
            worst = worst.max(dot.norm() / k2.sqrt());
        }
        worst / scale
    }

    /// `max_k |û(-k) - conj(û(k))|`, relative to the largest coefficient.
    pub fn conjugate_symmetry_defect(&self) -> f64 {
        let scale = self.max_abs();
        if scale == 0.0 {
            return 0.0;
        }
        let mut worst: f64 = 0.0;
        for comp in &self.coeffs {
            for flat in 0..self.grid.len() {
                let neg = self.grid.negated(flat);
                worst = worst.max((comp[neg] - comp[flat].conj()).norm());
            }
        }
        worst / scale
    }

    /// Zeroes every coefficient for which `keep` is false.
    pub fn filtered(&self, keep: impl Fn(&TorusGrid, usize) -> bool) -> Self {
        let mut out = self.clone();
        for flat in 0..self.grid.len() {
            if !keep(&self.grid, flat) {
                for comp in out.coeffs.iter_mut() {
                    comp[flat] = ZERO;
                }
            }
        }
        out
    }

    /// Re-expresses the field on a grid with `m` modes per axis, zero-padding
    /// or truncating. The Nyquist plane of the source is dropped when padding
    /// and the target Nyquist plane is zeroed when truncating, so the result
    /// stays conjugate symmetric.
    pub fn resampled(&self, m: usize) -> Result<Self> {
        let target = self.grid.with_modes(m)?;
        let n = self.grid.n();
        let dim = self.grid.dim();
        let scale = (m as f64 / n as f64).powi(dim as i32);
        let src_half = (n / 2) as i64;
        let dst_half = (m / 2) as i64;
        let mut out = SpectralField::zeros(target);
        for flat in 0..self.grid.len() {
            let idx = self.grid.mode_index(flat);
            let keep = idx[..dim]
                .iter()
                .all(|&k| k != -src_half && k > -dst_half && k < dst_half);
            if !keep {
                continue;
            }
            let dst = target.flat_index(&idx);
            for c in 0..dim {
                out.coeffs[c][dst] = self.coeffs[c][flat] * scale;
            }
        }
        Ok(out)
    }

    /// Random solenoidal field: independent Gaussian coefficients on the modes
    /// with `0 < max|k_i| <= band`, damped by `(1+|k|^2)^{-decay}`, projected.
    pub fn random_solenoidal<R: Rng + ?Sized>(
        grid: TorusGrid,
        band: usize,
        decay: f64,
        rng: &mut R,
    ) -> Self {
        let dim = grid.dim();
        let band = band.min(grid.n() / 2 - 1) as i64;
        let mut field = SpectralField::zeros(grid);
        let npts = grid.len() as f64;
        for flat in 0..grid.len() {
            let idx = grid.mode_index(flat);
            let m = grid.max_abs_index(flat);
            if m == 0 || m > band || !is_upper_half(&idx[..dim]) {
                continue;
            }
            let amp = npts * (1.0 + grid.k_squared(flat)).powf(-decay);
            let value: Vec<Complex64> = (0..dim)
                .map(|_| {
                    let re: f64 = rng.sample(StandardNormal);
                    let im: f64 = rng.sample(StandardNormal);
                    Complex64::new(re, im) * amp
                })
                .collect();
            field.set_mode(&idx[..dim], &value);
        }
        crate::ops::leray_project(&field)
    }
}

/// True for the representative of each `±k` pair (first nonzero index positive).
pub(crate) fn is_upper_half(idx: &[i64]) -> bool {
    idx.iter().find(|&&k| k != 0).is_some_and(|&k| k > 0)
}

/// Forward transform of real samples.
pub fn forward_transform(field: &PhysicalField) -> SpectralField {
    SpectralField::forward(field)
}

/// Forward transform from raw component arrays, checking the shape.
pub fn forward_transform_samples(grid: TorusGrid, samples: Vec<Vec<f64>>) -> Result<SpectralField> {
    Ok(SpectralField::forward(&PhysicalField::new(grid, samples)?))
}

pub fn inverse_transform(field: &SpectralField) -> PhysicalField {
    field.inverse()
}

/// `(Σ_j |u(x_j)|^p (L/N)^d)^{1/p}` with `|·|` the Euclidean magnitude.
pub fn lp_norm(field: &SpectralField, p: f64) -> Result<f64> {
    if !field.is_finite() {
        return Err(Error::Numeric("non-finite coefficient in L^p norm".into()));
    }
    field.inverse().lp_norm(p)
}
