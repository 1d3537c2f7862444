//! TOML run configuration. Unknown keys are errors; cross-field constraints
//! are checked at load.

use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{NonlinearTerms, PhysicalField, SolverParams, SpectralField, TorusGrid};
use crate::lab::{EstimateConstants, LabSettings, SAMPLE_BAND, SAMPLE_DECAY};
use crate::noise::{MarkLaw, NoiseSpec, PhiSpec};
use crate::picard::PicardOptions;
use crate::stochastic::{StochasticOptions, MAX_RETRIES};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub dim: usize,
    pub n: usize,
    #[serde(default = "two_pi")]
    pub length: f64,
}

fn two_pi() -> f64 {
    std::f64::consts::TAU
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub r: f64,
    pub p: f64,
    #[serde(default = "yes")]
    pub convection: bool,
    #[serde(default = "yes")]
    pub damping: bool,
    /// Explicit estimate constant `C`.
    #[serde(default)]
    pub constant: Option<f64>,
    /// Constants file written by `estimates`, relative to the config file.
    #[serde(default)]
    pub constants_file: Option<PathBuf>,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialKind {
    Zero,
    TaylorGreen,
    Shear,
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialConfig {
    pub kind: InitialKind,
    #[serde(default = "one")]
    pub amplitude: f64,
    /// Band of the random datum.
    #[serde(default = "three")]
    pub band: usize,
}

fn one() -> f64 {
    1.0
}

fn three() -> usize {
    3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeConfig {
    #[serde(rename = "T")]
    pub horizon: f64,
    pub nt: usize,
    /// Solve on the certified `T*` instead of `T`.
    #[serde(default)]
    pub certify: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FamilyConfig {
    Off,
    Wiener,
    Levy,
    Fbm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileKind {
    Shear,
    TaylorGreen,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    pub family: FamilyConfig,
    #[serde(default)]
    pub sigma: f64,
    #[serde(default = "one")]
    pub s_phi: f64,
    #[serde(default = "four")]
    pub kmax: usize,
    #[serde(default)]
    pub include_mean: bool,
    #[serde(rename = "H", default)]
    pub hurst: Option<f64>,
    /// Accept any `0 < H < 1` for fractional noise.
    #[serde(default)]
    pub hurst_override: bool,
    #[serde(default)]
    pub lambda0: Option<f64>,
    #[serde(default)]
    pub marks: Option<MarkLaw>,
    #[serde(default = "shear")]
    pub profile: ProfileKind,
    #[serde(default = "one")]
    pub profile_amplitude: f64,
    /// Noise time nodes over `[0, T]`; the solver uses those below `T̃`.
    #[serde(default = "noise_nt")]
    pub nt: usize,
    #[serde(default = "hundred")]
    pub paths: usize,
}

fn four() -> usize {
    4
}

fn shear() -> ProfileKind {
    ProfileKind::Shear
}

fn noise_nt() -> usize {
    256
}

fn hundred() -> usize {
    100
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            family: FamilyConfig::Off,
            sigma: 0.0,
            s_phi: 1.0,
            kmax: 4,
            include_mean: false,
            hurst: None,
            hurst_override: false,
            lambda0: None,
            marks: None,
            profile: ProfileKind::Shear,
            profile_amplitude: 1.0,
            nt: noise_nt(),
            paths: hundred(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PicardConfig {
    #[serde(default = "tol")]
    pub tol: f64,
    #[serde(default = "max_iter")]
    pub max_iter: usize,
    /// Ball radius for pathwise solves.
    #[serde(rename = "M", default)]
    pub radius: Option<f64>,
}

fn tol() -> f64 {
    1e-10
}

fn max_iter() -> usize {
    200
}

impl Default for PicardConfig {
    fn default() -> Self {
        Self {
            tol: tol(),
            max_iter: max_iter(),
            radius: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabConfig {
    #[serde(default = "samples")]
    pub samples: usize,
    #[serde(default = "t_min")]
    pub t_min: f64,
    /// Defaults to `T`.
    #[serde(default)]
    pub t_max: Option<f64>,
    /// Target exponent of the `L^p -> L^q` estimates; defaults to `2p`.
    #[serde(default)]
    pub q: Option<f64>,
    #[serde(default = "t_points")]
    pub t_points: usize,
    #[serde(default = "band")]
    pub band: usize,
    /// Repeat the measurements on boxes of side 2π, 4π and 8π.
    #[serde(default)]
    pub box_sweep: bool,
}

fn samples() -> usize {
    200
}

fn t_min() -> f64 {
    1e-3
}

fn t_points() -> usize {
    33
}

fn band() -> usize {
    SAMPLE_BAND
}

impl Default for LabConfig {
    fn default() -> Self {
        Self {
            samples: samples(),
            t_min: t_min(),
            t_max: None,
            q: None,
            t_points: t_points(),
            band: band(),
            box_sweep: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "out_dir")]
    pub dir: PathBuf,
    #[serde(default = "yes")]
    pub trajectory: bool,
    #[serde(default = "yes")]
    pub trace: bool,
    #[serde(default = "yes")]
    pub ensemble: bool,
    #[serde(default = "yes")]
    pub noise: bool,
    /// Write slot amplitudes in the noise CSV.
    #[serde(default)]
    pub noise_modes: bool,
    /// Paths written to the noise CSV.
    #[serde(default = "ten")]
    pub noise_paths: usize,
}

fn out_dir() -> PathBuf {
    PathBuf::from("out")
}

fn ten() -> usize {
    10
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: out_dir(),
            trajectory: true,
            trace: true,
            ensemble: true,
            noise: true,
            noise_modes: false,
            noise_paths: ten(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RngConfig {
    pub seed: u64,
}

impl Default for RngConfig {
    fn default() -> Self {
        Self { seed: 20260101 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub grid: GridConfig,
    pub model: ModelConfig,
    pub initial: InitialConfig,
    pub time: TimeConfig,
    #[serde(default)]
    pub noise: NoiseConfig,
    #[serde(default)]
    pub picard: PicardConfig,
    #[serde(default)]
    pub lab: LabConfig,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub rng: RngConfig,
    /// Directory relative paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            grid: GridConfig {
                dim: 2,
                n: 32,
                length: two_pi(),
            },
            model: ModelConfig {
                r: 3.0,
                p: 6.0,
                convection: true,
                damping: true,
                constant: Some(1.0),
                constants_file: None,
            },
            initial: InitialConfig {
                kind: InitialKind::TaylorGreen,
                amplitude: 0.1,
                band: 3,
            },
            time: TimeConfig {
                horizon: 0.1,
                nt: 16,
                certify: false,
            },
            noise: NoiseConfig::default(),
            picard: PicardConfig::default(),
            lab: LabConfig::default(),
            output: OutputConfig::default(),
            rng: RngConfig::default(),
            base_dir: PathBuf::new(),
        }
    }
}

impl RunConfig {
    /// Parses and validates; errors name the offending key path.
    pub fn from_toml(text: &str) -> Result<Self> {
        let de = toml::Deserializer::parse(text).map_err(|e| Error::Config(e.to_string()))?;
        let cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let msg = e.into_inner().message().to_owned();
            if path == "." {
                Error::Config(msg)
            } else {
                Error::Config(format!("at `{path}`: {msg}"))
            }
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let params = self.solver_params_without_constants()?;
        crate::field::validate_params(&params)?;
        if self.picard.tol <= 0.0 || self.picard.max_iter == 0 {
            return Err(Error::Config("at `picard`: tol must be positive and max_iter at least 1".into()));
        }
        if let Some(m) = self.picard.radius {
            if !(m > 0.0) {
                return Err(Error::Config("at `picard.M`: radius must be positive".into()));
            }
        }
        if self.noise.nt < 8 {
            return Err(Error::Config("at `noise.nt`: need at least 8 noise intervals".into()));
        }
        if self.lab.samples == 0 {
            return Err(Error::Config("at `lab.samples`: need at least one sample".into()));
        }
        self.noise_spec()?;
        Ok(())
    }

    pub fn grid(&self) -> Result<TorusGrid> {
        TorusGrid::new(self.grid.dim, self.grid.n, self.grid.length)
    }

    fn solver_params_without_constants(&self) -> Result<SolverParams> {
        let mut params = SolverParams::new(self.grid()?, self.model.r, self.model.p, self.time.horizon, self.time.nt)
            .with_terms(NonlinearTerms {
                convection: self.model.convection,
                damping: self.model.damping,
            });
        params.constant = self.model.constant;
        Ok(params)
    }

    /// Solver parameters on `[0, T]` with `nt` intervals, with the constants
    /// file loaded if one is named.
    pub fn solver_params(&self) -> Result<SolverParams> {
        let mut params = self.solver_params_without_constants()?;
        if let Some(file) = &self.model.constants_file {
            params.constants = Some(EstimateConstants::read(&self.base_dir.join(file))?);
        }
        Ok(params)
    }

    /// Parameters for pathwise solves: the noise grid replaces `nt`.
    pub fn stochastic_params(&self) -> Result<SolverParams> {
        Ok(self.solver_params()?.with_nt(self.noise.nt))
    }

    pub fn initial_datum(&self) -> Result<SpectralField> {
        let grid = self.grid()?;
        let a = self.initial.amplitude;
        let field = match self.initial.kind {
            InitialKind::Zero => SpectralField::zeros(grid),
            InitialKind::TaylorGreen => taylor_green(grid, a),
            InitialKind::Shear => shear_field(grid, a),
            InitialKind::Random => {
                let mut rng = ChaCha8Rng::seed_from_u64(self.rng.seed);
                rng.set_stream(u64::MAX);
                let g = SpectralField::random_solenoidal(grid, self.initial.band, SAMPLE_DECAY, &mut rng);
                let norm = g.lp_norm(self.model.p)?;
                if norm == 0.0 {
                    g
                } else {
                    g.scaled(a / norm)
                }
            }
        };
        Ok(field)
    }

    pub fn noise_spec(&self) -> Result<NoiseSpec> {
        let grid = self.grid()?;
        let n = &self.noise;
        let phi = PhiSpec {
            sigma: n.sigma,
            decay: n.s_phi,
            kmax: n.kmax,
            include_mean: n.include_mean,
        };
        let at = |key: &str, e: Error| Error::Config(format!("at `noise.{key}`: {e}"));
        match n.family {
            FamilyConfig::Off => Ok(NoiseSpec::off(grid)),
            FamilyConfig::Wiener => NoiseSpec::wiener(grid, phi).map_err(|e| at("sigma", e)),
            FamilyConfig::Fbm => {
                let h = n
                    .hurst
                    .ok_or_else(|| Error::Config("at `noise.H`: fractional noise needs H".into()))?;
                if n.hurst_override {
                    NoiseSpec::fbm_unchecked(grid, phi, h)
                } else {
                    NoiseSpec::fbm(grid, phi, h)
                }
                .map_err(|e| at("H", e))
            }
            FamilyConfig::Levy => {
                let lambda0 = n
                    .lambda0
                    .ok_or_else(|| Error::Config("at `noise.lambda0`: jump noise needs an intensity".into()))?;
                let marks = n.marks.unwrap_or(MarkLaw::Gaussian { mean: 0.0, std: 1.0 });
                let profile = match n.profile {
                    ProfileKind::Shear => shear_field(grid, n.profile_amplitude),
                    ProfileKind::TaylorGreen => taylor_green(grid, n.profile_amplitude),
                };
                NoiseSpec::levy(grid, lambda0, marks, &profile).map_err(|e| at("lambda0", e))
            }
        }
    }

    pub fn picard_options(&self) -> PicardOptions {
        PicardOptions {
            tol: self.picard.tol,
            max_iter: self.picard.max_iter,
            min_iter: 1,
            ball_radius: None,
        }
    }

    pub fn stochastic_options(&self) -> StochasticOptions {
        StochasticOptions {
            radius: self.picard.radius,
            tol: self.picard.tol,
            max_iter: self.picard.max_iter,
            max_retries: MAX_RETRIES,
            keep_trajectories: false,
        }
    }

    pub fn lab_q(&self) -> f64 {
        self.lab.q.unwrap_or(2.0 * self.model.p)
    }

    pub fn lab_settings(&self, grid: TorusGrid) -> LabSettings {
        LabSettings {
            grid,
            t_min: self.lab.t_min,
            t_max: self.lab.t_max.unwrap_or(self.time.horizon),
            t_points: self.lab.t_points,
            seed: self.rng.seed,
            band: self.lab.band,
            decay: SAMPLE_DECAY,
        }
    }

    pub fn output_dir(&self, override_dir: Option<&Path>) -> PathBuf {
        match override_dir {
            Some(d) => d.to_path_buf(),
            None if self.output.dir.is_absolute() => self.output.dir.clone(),
            None => self.base_dir.join(&self.output.dir),
        }
    }
}

/// `(sin x cos y, -cos x sin y)` in 2D and `(sin x cos y cos z, -cos x sin y cos z, 0)` in 3D,
/// in units of the box wavenumber.
pub fn taylor_green(grid: TorusGrid, amplitude: f64) -> SpectralField {
    let k = grid.wavenumber_unit();
    SpectralField::forward(&PhysicalField::from_fn(grid, |x| {
        let (sx, cx) = (k * x[0]).sin_cos();
        let (sy, cy) = (k * x[1]).sin_cos();
        if x.len() == 2 {
            vec![amplitude * sx * cy, -amplitude * cx * sy]
        } else {
            let cz = (k * x[2]).cos();
            vec![amplitude * sx * cy * cz, -amplitude * cx * sy * cz, 0.0]
        }
    }))
}

/// `(sin y, 0, ...)` scaled by `amplitude`.
pub fn shear_field(grid: TorusGrid, amplitude: f64) -> SpectralField {
    let k = grid.wavenumber_unit();
    SpectralField::forward(&PhysicalField::from_fn(grid, |x| {
        let mut v = vec![0.0; x.len()];
        v[0] = amplitude * (k * x[1]).sin();
        v
    }))
}
