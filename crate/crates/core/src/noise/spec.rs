use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{SpectralField, TorusGrid};
use crate::ops::leray_project;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseFamily {
    Wiener,
    Levy,
    Fbm,
}

impl NoiseFamily {
    pub fn name(&self) -> &'static str {
        match self {
            NoiseFamily::Wiener => "wiener",
            NoiseFamily::Levy => "levy",
            NoiseFamily::Fbm => "fbm",
        }
    }
}

/// Diagonal coefficients `φ_k = σ (1+|k|^2)^{-s_Φ}` on `0 < max|k_i| <= kmax`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhiSpec {
    pub sigma: f64,
    pub decay: f64,
    pub kmax: usize,
    /// Also drive the spatial mean (which is solenoidal).
    #[serde(default)]
    pub include_mean: bool,
}

impl PhiSpec {
    pub fn new(sigma: f64, decay: f64, kmax: usize) -> Self {
        Self {
            sigma,
            decay,
            kmax,
            include_mean: false,
        }
    }

    pub fn coefficient(&self, k_squared: f64) -> f64 {
        self.sigma * (1.0 + k_squared).powf(-self.decay)
    }

    fn check(&self) -> Result<()> {
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(Error::Config(format!("noise amplitude sigma must be >= 0, got {}", self.sigma)));
        }
        if !self.decay.is_finite() {
            return Err(Error::Config("noise decay s_phi must be finite".into()));
        }
        Ok(())
    }
}

/// Law of the scalar jump marks `z`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum MarkLaw {
    Gaussian { mean: f64, std: f64 },
    Constant { value: f64 },
    /// `P(|z| > x) = (scale/x)^alpha` for `x >= scale`, symmetric sign.
    SymmetricPareto { alpha: f64, scale: f64 },
}

impl MarkLaw {
    pub fn mean(&self) -> f64 {
        match *self {
            MarkLaw::Gaussian { mean, .. } => mean,
            MarkLaw::Constant { value } => value,
            MarkLaw::SymmetricPareto { .. } => 0.0,
        }
    }

    pub fn second_moment(&self) -> f64 {
        match *self {
            MarkLaw::Gaussian { mean, std } => mean * mean + std * std,
            MarkLaw::Constant { value } => value * value,
            MarkLaw::SymmetricPareto { alpha, scale } => {
                if alpha > 2.0 {
                    alpha * scale * scale / (alpha - 2.0)
                } else {
                    f64::INFINITY
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LevySpec {
    /// Jump rate `λ₀`.
    pub intensity: f64,
    pub marks: MarkLaw,
    /// Jump profile `ψ`; stored projected onto solenoidal fields.
    pub profile: SpectralField,
}

/// Description of the driving noise on a spatial grid.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSpec {
    pub family: NoiseFamily,
    pub grid: TorusGrid,
    pub phi: PhiSpec,
    pub hurst: Option<f64>,
    pub levy: Option<LevySpec>,
}

impl NoiseSpec {
    pub fn wiener(grid: TorusGrid, phi: PhiSpec) -> Result<Self> {
        phi.check()?;
        Ok(Self {
            family: NoiseFamily::Wiener,
            grid,
            phi,
            hurst: None,
            levy: None,
        })
    }

    /// Zero noise.
    pub fn off(grid: TorusGrid) -> Self {
        Self::wiener(grid, PhiSpec::new(0.0, 0.0, 0)).expect("zero noise is valid")
    }

    /// Fractional noise with `max{1/2, d/4} < H < 1` enforced.
    pub fn fbm(grid: TorusGrid, phi: PhiSpec, hurst: f64) -> Result<Self> {
        let lower = 0.5f64.max(grid.dim() as f64 / 4.0);
        if !(hurst > lower) {
            return Err(Error::Config(format!(
                "H > max{{1/2, d/4}} = {lower} violated: H = {hurst}"
            )));
        }
        if !(hurst < 1.0) {
            return Err(Error::Config(format!("H < 1 violated: H = {hurst}")));
        }
        Self::fbm_unchecked(grid, phi, hurst)
    }

    /// Fractional noise for any `0 < H < 1`, skipping the existence gate.
    pub fn fbm_unchecked(grid: TorusGrid, phi: PhiSpec, hurst: f64) -> Result<Self> {
        phi.check()?;
        if !(hurst > 0.0 && hurst < 1.0) {
            return Err(Error::Domain(format!("Hurst parameter must lie in (0, 1), got {hurst}")));
        }
        Ok(Self {
            family: NoiseFamily::Fbm,
            grid,
            phi,
            hurst: Some(hurst),
            levy: None,
        })
    }

    pub fn levy(grid: TorusGrid, intensity: f64, marks: MarkLaw, profile: &SpectralField) -> Result<Self> {
        if !(intensity > 0.0 && intensity.is_finite()) {
            return Err(Error::Config(format!("jump intensity must be positive and finite, got {intensity}")));
        }
        if !marks.second_moment().is_finite() {
            return Err(Error::Config("jump marks need E[z^2] < inf".into()));
        }
        if profile.grid() != &grid {
            return Err(Error::Input("jump profile is not on the noise grid".into()));
        }
        Ok(Self {
            family: NoiseFamily::Levy,
            grid,
            phi: PhiSpec::new(0.0, 0.0, 0),
            hurst: None,
            levy: Some(LevySpec {
                intensity,
                marks,
                profile: leray_project(profile),
            }),
        })
    }

    /// True when every path is identically zero.
    pub fn is_off(&self) -> bool {
        match self.family {
            NoiseFamily::Levy => false,
            _ => self.phi.sigma == 0.0,
        }
    }

    pub(crate) fn expect_family(&self, family: NoiseFamily) -> Result<()> {
        if self.family != family {
            return Err(Error::Usage(format!(
                "{} generator called with a {} spec",
                family.name(),
                self.family.name()
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hurst_gate_in_three_dimensions() {
        let grid = TorusGrid::periodic(3, 8).unwrap();
        let phi = PhiSpec::new(1.0, 1.0, 2);
        for h in [0.5, 0.6, 0.75] {
            let err = NoiseSpec::fbm(grid, phi, h).unwrap_err();
            assert!(err.to_string().contains("d/4"), "{err}");
        }
        assert!(NoiseSpec::fbm(grid, phi, 0.76).is_ok());
        assert!(NoiseSpec::fbm(grid, phi, 1.0).is_err());
    }

    #[test]
    fn hurst_gate_in_two_dimensions() {
        let grid = TorusGrid::periodic(2, 8).unwrap();
        let phi = PhiSpec::new(1.0, 1.0, 2);
        assert!(NoiseSpec::fbm(grid, phi, 0.5).is_err());
        assert!(NoiseSpec::fbm(grid, phi, 0.55).is_ok());
        assert!(NoiseSpec::fbm_unchecked(grid, phi, 0.5).is_ok());
        assert!(NoiseSpec::fbm_unchecked(grid, phi, 0.0).is_err());
    }

    #[test]
    fn levy_needs_square_integrable_marks() {
        let grid = TorusGrid::periodic(2, 8).unwrap();
        let psi = SpectralField::zeros(grid);
        let heavy = MarkLaw::SymmetricPareto { alpha: 1.5, scale: 1.0 };
        assert!(NoiseSpec::levy(grid, 1.0, heavy, &psi).is_err());
        let light = MarkLaw::SymmetricPareto { alpha: 3.0, scale: 1.0 };
        assert!(NoiseSpec::levy(grid, 1.0, light, &psi).is_ok());
        let normal = MarkLaw::Gaussian { mean: 0.0, std: 1.0 };
        assert!(NoiseSpec::levy(grid, 0.0, normal, &psi).is_err());
    }
}
