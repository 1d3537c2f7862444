use serde::{Deserialize, Serialize};

use super::grid::TorusGrid;
use crate::error::{Error, Result};
use crate::lab::EstimateConstants;

/// Exponents of the lower-order terms in the contraction estimate.
///
/// For `max{d, d(r-1)/2} < p`, both `1/2 - d/(2p)` (convection) and
/// `1 - d(r-1)/(2p)` (damping) are positive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelExponents {
    pub dim: usize,
    pub p: f64,
    pub r: f64,
}

impl ModelExponents {
    pub fn new(dim: usize, p: f64, r: f64) -> Result<Self> {
        let e = Self { dim, p, r };
        e.check()?;
        Ok(e)
    }

    fn check(&self) -> Result<()> {
        let d = self.dim as f64;
        if self.dim != 2 && self.dim != 3 {
            return Err(Error::Config(format!("dimension must be 2 or 3, got {}", self.dim)));
        }
        if !(self.r >= 1.0 && self.r.is_finite()) {
            return Err(Error::Config(format!("absorption exponent r must be >= 1, got {}", self.r)));
        }
        if !self.p.is_finite() {
            return Err(Error::Config("Lebesgue exponent p must be finite".into()));
        }
        if self.p <= d {
            return Err(Error::Config(format!(
                "p > d violated: p = {} <= d = {}",
                self.p, self.dim
            )));
        }
        let damping_bound = d * (self.r - 1.0) / 2.0;
        if self.p <= damping_bound {
            return Err(Error::Config(format!(
                "p > d(r-1)/2 violated: p = {} <= {}",
                self.p, damping_bound
            )));
        }
        if self.convection() <= 0.0 {
            return Err(Error::Config(format!(
                "1/2 - d/(2p) > 0 violated: {}",
                self.convection()
            )));
        }
        if self.damping() <= 0.0 {
            return Err(Error::Config(format!(
                "1 - d(r-1)/(2p) > 0 violated: {}",
                self.damping()
            )));
        }
        Ok(())
    }

    /// `1/2 - d/(2p)`.
    pub fn convection(&self) -> f64 {
        0.5 - self.dim as f64 / (2.0 * self.p)
    }

    /// `1 - d(r-1)/(2p)`.
    pub fn damping(&self) -> f64 {
        1.0 - self.dim as f64 * (self.r - 1.0) / (2.0 * self.p)
    }
}

/// Which nonlinear terms enter the mild equation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NonlinearTerms {
    pub convection: bool,
    pub damping: bool,
}

impl NonlinearTerms {
    pub const FULL: Self = Self {
        convection: true,
        damping: true,
    };
    pub const LINEAR: Self = Self {
        convection: false,
        damping: false,
    };

    pub fn is_linear(&self) -> bool {
        !self.convection && !self.damping
    }
}

impl Default for NonlinearTerms {
    fn default() -> Self {
        Self::FULL
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverParams {
    pub grid: TorusGrid,
    pub r: f64,
    pub p: f64,
    /// Time horizon `T`.
    pub horizon: f64,
    /// Number of uniform time intervals.
    pub nt: usize,
    pub terms: NonlinearTerms,
    /// Explicit estimate constant; overrides `constants`.
    pub constant: Option<f64>,
    pub constants: Option<EstimateConstants>,
}

impl SolverParams {
    pub fn new(grid: TorusGrid, r: f64, p: f64, horizon: f64, nt: usize) -> Self {
        Self {
            grid,
            r,
            p,
            horizon,
            nt,
            terms: NonlinearTerms::FULL,
            constant: None,
            constants: None,
        }
    }

    pub fn with_terms(mut self, terms: NonlinearTerms) -> Self {
        self.terms = terms;
        self
    }

    pub fn with_constant(mut self, c: f64) -> Self {
        self.constant = Some(c);
        self
    }

    pub fn with_horizon(mut self, horizon: f64) -> Self {
        self.horizon = horizon;
        self
    }

    pub fn with_nt(mut self, nt: usize) -> Self {
        self.nt = nt;
        self
    }

    pub fn exponents(&self) -> Result<ModelExponents> {
        ModelExponents::new(self.grid.dim(), self.p, self.r)
    }

    /// Constant `C` used by the existence-time calculators.
    pub fn estimate_constant(&self) -> Result<f64> {
        match (self.constant, &self.constants) {
            (Some(c), _) => Ok(c),
            (None, Some(k)) => Ok(k.contraction_constant()),
            (None, None) => Err(Error::Config(
                "no estimate constant: set one explicitly or supply measured constants".into(),
            )),
        }
    }

    pub fn validate(self) -> Result<Self> {
        validate_params(&self)?;
        Ok(self)
    }
}

/// Checks `p > max{d, d(r-1)/2}` and the time-grid description.
pub fn validate_params(params: &SolverParams) -> Result<()> {
    params.exponents()?;
    if !(params.horizon > 0.0 && params.horizon.is_finite()) {
        return Err(Error::Config(format!("horizon T must be positive, got {}", params.horizon)));
    }
    if params.nt < 8 {
        return Err(Error::Config(format!("nt must be at least 8, got {}", params.nt)));
    }
    if let Some(c) = params.constant {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::Config(format!("estimate constant must be positive, got {c}")));
        }
    }
    Ok(())
}
