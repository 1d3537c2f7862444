use rayon::prelude::*;

use super::spec::NoiseFamily;
use crate::error::{Error, Result};
use crate::field::{lp_norm, SpectralField};
use crate::picard::{Shift, TimeGrid, Trajectory};

/// Samples of a stochastic convolution `w` on a time grid.
///
/// Jump paths are càdlàg: `values` holds `w(t_j)` with jumps included and
/// `left_limits[j]` holds `w(t_j-)` at jump nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct NoisePath {
    family: NoiseFamily,
    values: Trajectory,
    left_limits: Vec<Option<SpectralField>>,
    /// Slot amplitudes per node, for mode-wise generators.
    coefficients: Option<Vec<Vec<f64>>>,
    /// `(τ, z)` for every jump.
    jumps: Vec<(f64, f64)>,
}

impl NoisePath {
    pub fn new(
        family: NoiseFamily,
        values: Trajectory,
        left_limits: Vec<Option<SpectralField>>,
        coefficients: Option<Vec<Vec<f64>>>,
        jumps: Vec<(f64, f64)>,
    ) -> Result<Self> {
        if left_limits.len() != values.times().len() {
            return Err(Error::Input("left limits do not match the time grid".into()));
        }
        if let Some(c) = &coefficients {
            if c.len() != values.times().len() {
                return Err(Error::Input("coefficients do not match the time grid".into()));
            }
        }
        Ok(Self {
            family,
            values,
            left_limits,
            coefficients,
            jumps,
        })
    }

    /// Continuous path from node values.
    pub fn continuous(family: NoiseFamily, values: Trajectory, coefficients: Option<Vec<Vec<f64>>>) -> Result<Self> {
        let n = values.times().len();
        Self::new(family, values, vec![None; n], coefficients, Vec::new())
    }

    pub fn zero(family: NoiseFamily, values: Trajectory) -> Self {
        let n = values.times().len();
        Self {
            family,
            values,
            left_limits: vec![None; n],
            coefficients: None,
            jumps: Vec::new(),
        }
    }

    pub fn family(&self) -> NoiseFamily {
        self.family
    }

    pub fn times(&self) -> &TimeGrid {
        self.values.times()
    }

    pub fn values(&self) -> &Trajectory {
        &self.values
    }

    pub fn left_limits(&self) -> &[Option<SpectralField>] {
        &self.left_limits
    }

    pub fn coefficients(&self) -> Option<&[Vec<f64>]> {
        self.coefficients.as_deref()
    }

    pub fn jumps(&self) -> &[(f64, f64)] {
        &self.jumps
    }

    pub fn shift(&self) -> Shift<'_> {
        Shift {
            values: &self.values,
            left_limits: &self.left_limits,
        }
    }

    /// `μ_p = sup_t ‖w(t)‖_p`, including left limits.
    pub fn mu_p(&self, p: f64) -> Result<f64> {
        let fields: Vec<&SpectralField> = self
            .values
            .states()
            .iter()
            .chain(self.left_limits.iter().flatten())
            .collect();
        let norms: Vec<f64> = fields.par_iter().map(|w| lp_norm(w, p)).collect::<Result<_>>()?;
        Ok(norms.into_iter().fold(0.0, f64::max))
    }

    /// The path restricted to `times`, a prefix of its own grid.
    pub fn prefix(&self, times: &TimeGrid) -> Result<NoisePath> {
        let n = times.len();
        let values = self.values.prefix(times)?;
        let horizon = times.horizon();
        Ok(NoisePath {
            family: self.family,
            values,
            left_limits: self.left_limits[..n].to_vec(),
            coefficients: self.coefficients.as_ref().map(|c| c[..n].to_vec()),
            jumps: self.jumps.iter().copied().filter(|(t, _)| *t <= horizon).collect(),
        })
    }
}
