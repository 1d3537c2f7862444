//! Pathwise mild solutions: subtract the stochastic convolution `w` and run
//! the fixed point for `v = u - w` inside a ball of radius `M`.

use std::io::Write;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::{validate_params, ModelExponents, SolverParams, SpectralField};
use crate::noise::{csv_error, generate, NoiseFamily, NoisePath, NoiseSpec};
use crate::picard::{
    iterate, largest_feasible_time, time_powers, ExitReason, MildMap, PicardOptions, PicardRun, PicardTrace,
    TimeGrid, Trajectory, MIN_HORIZON,
};

/// Ball-exit retries, each halving `T̃`.
pub const MAX_RETRIES: usize = 5;

/// The ball `Σ(M, T̃)` for one path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BallSpec {
    pub radius: f64,
    pub ttilde: f64,
    pub mu_p: f64,
}

/// `C (T^a (M + μ) + T^b (M^{r-1} + μ^{r-1}))`.
pub fn predicted_contraction(exp: &ModelExponents, constant: f64, radius: f64, mu_p: f64, t: f64) -> f64 {
    let (ta, tb) = time_powers(exp, t);
    let r1 = exp.r - 1.0;
    constant * (ta * (radius + mu_p) + tb * (radius.powf(r1) + mu_p.powf(r1)))
}

/// Largest `T̃ <= t_max` with contraction factor below one and
/// `‖x‖ + C T^a (M^2 + μ^2) + C T^b (M^r + μ^r) <= M`.
pub fn random_time_budget(
    x_norm: f64,
    radius: f64,
    mu_p: f64,
    constant: f64,
    exp: &ModelExponents,
    t_max: f64,
) -> Result<f64> {
    if !(x_norm >= 0.0 && mu_p >= 0.0 && x_norm.is_finite() && mu_p.is_finite()) {
        return Err(Error::Domain("norms must be finite and nonnegative".into()));
    }
    if !(constant > 0.0 && constant.is_finite()) {
        return Err(Error::Domain(format!("estimate constant must be positive, got {constant}")));
    }
    if !(t_max >= MIN_HORIZON) {
        return Err(Error::Domain(format!("T must be at least {MIN_HORIZON}, got {t_max}")));
    }
    if !(radius > x_norm) {
        return Err(Error::Infeasible(format!(
            "M > ‖x‖_p violated: M = {radius}, ‖x‖_p = {x_norm}"
        )));
    }
    let r = exp.r;
    let feasible = |t: f64| {
        let (ta, tb) = time_powers(exp, t);
        predicted_contraction(exp, constant, radius, mu_p, t) < 1.0
            && x_norm
                + constant * ta * (radius * radius + mu_p * mu_p)
                + constant * tb * (radius.powf(r) + mu_p.powf(r))
                <= radius
    };
    largest_feasible_time(feasible, MIN_HORIZON, t_max).ok_or_else(|| {
        Error::Infeasible(format!(
            "no T̃ >= {MIN_HORIZON} satisfies the ball and contraction conditions (M = {radius}, μ_p = {mu_p})"
        ))
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PathExit {
    Converged,
    BallExit,
    NonContraction,
    /// No admissible `T̃` for the realized noise.
    Infeasible,
    /// `T̃` leaves fewer than eight noise intervals.
    UnderResolved,
}

impl PathExit {
    pub fn name(&self) -> &'static str {
        match self {
            PathExit::Converged => "converged",
            PathExit::BallExit => "ball_exit",
            PathExit::NonContraction => "non_contraction",
            PathExit::Infeasible => "infeasible",
            PathExit::UnderResolved => "under_resolved",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StochasticOptions {
    /// Ball radius `M`; defaults to `2 max(‖x‖_p, 1)`.
    pub radius: Option<f64>,
    pub tol: f64,
    pub max_iter: usize,
    pub max_retries: usize,
    /// Keep `v`, `w` and `u` in the result.
    pub keep_trajectories: bool,
}

impl Default for StochasticOptions {
    fn default() -> Self {
        Self {
            radius: None,
            tol: 1e-10,
            max_iter: 200,
            max_retries: MAX_RETRIES,
            keep_trajectories: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PathResult {
    pub path_id: usize,
    pub seed: u64,
    pub family: NoiseFamily,
    pub hurst: Option<f64>,
    pub radius: f64,
    pub mu_p: f64,
    /// Certified `T̃` after any halving.
    pub ttilde: Option<f64>,
    /// Last node of the solve grid.
    pub ttilde_realized: Option<f64>,
    pub exit: PathExit,
    pub attempts: usize,
    pub contraction_predicted: Option<f64>,
    pub trace: PicardTrace,
    pub v: Option<Trajectory>,
    pub w: Option<NoisePath>,
    pub u: Option<Trajectory>,
}

impl PathResult {
    pub fn converged(&self) -> bool {
        self.exit == PathExit::Converged
    }

    pub fn iterations(&self) -> usize {
        self.trace.iterations()
    }

    pub fn contraction_measured(&self) -> Option<f64> {
        self.trace.measured_contraction()
    }
}

/// Fixed point of `v ↦ e^{-tA}x - ∫ e^{-(t-s)A}[B + C](v + w) ds` on the grid of
/// `noise`, exiting when an iterate leaves the ball of radius `radius`.
pub fn solve_on_path(
    x: &SpectralField,
    noise: &NoisePath,
    params: &SolverParams,
    radius: f64,
    opts: &PicardOptions,
    seed: Option<Trajectory>,
) -> Result<PicardRun> {
    let map = MildMap::new(x, None, params, noise.times().clone())?.with_shift(noise.shift())?;
    let seed = seed.unwrap_or_else(|| map.free_flow().clone());
    let opts = PicardOptions {
        ball_radius: Some(radius),
        ..*opts
    };
    iterate(&map, seed, &opts)
}

fn check_datum(x: &SpectralField, params: &SolverParams) -> Result<f64> {
    validate_params(params)?;
    if x.grid() != &params.grid {
        return Err(Error::Input("initial datum is not on the parameter grid".into()));
    }
    if x.divergence_residual() > crate::picard::SOLENOIDAL_TOL {
        return Err(Error::Input("initial datum is not solenoidal".into()));
    }
    x.lp_norm(params.p)
}

/// Generates one noise path from `rng` and solves the pathwise problem.
///
/// The noise is sampled on the uniform grid of `params` over `[0, T]`;
/// the solve uses the nodes up to `T̃`.
pub fn pathwise_solve<R: Rng + ?Sized>(
    x: &SpectralField,
    spec: &NoiseSpec,
    params: &SolverParams,
    opts: &StochasticOptions,
    rng: &mut R,
) -> Result<PathResult> {
    let x_norm = check_datum(x, params)?;
    if spec.grid != params.grid {
        return Err(Error::Input("noise grid differs from the solver grid".into()));
    }
    let radius = opts.radius.unwrap_or(2.0 * x_norm.max(1.0));
    if !(radius > x_norm) {
        return Err(Error::Domain(format!("M > ‖x‖_p violated: M = {radius}, ‖x‖_p = {x_norm}")));
    }
    let constant = params.estimate_constant()?;
    let exp = params.exponents()?;
    let base = TimeGrid::uniform(params.horizon, params.nt)?;
    let noise = generate(spec, &base, rng)?;
    let mu_p = noise.mu_p(params.p)?;
    let mut result = PathResult {
        path_id: 0,
        seed: 0,
        family: spec.family,
        hurst: spec.hurst,
        radius,
        mu_p,
        ttilde: None,
        ttilde_realized: None,
        exit: PathExit::Infeasible,
        attempts: 0,
        contraction_predicted: None,
        trace: PicardTrace::default(),
        v: None,
        w: None,
        u: None,
    };
    let mut ttilde = match random_time_budget(x_norm, radius, mu_p, constant, &exp, params.horizon) {
        Ok(t) => t,
        Err(Error::Infeasible(_)) => return Ok(result),
        Err(e) => return Err(e),
    };
    let picard = PicardOptions {
        tol: opts.tol,
        max_iter: opts.max_iter,
        min_iter: 1,
        ball_radius: Some(radius),
    };
    for attempt in 0..=opts.max_retries {
        result.attempts = attempt + 1;
        result.ttilde = Some(ttilde);
        let Some(grid) = noise.times().truncated(ttilde) else {
            result.exit = PathExit::UnderResolved;
            return Ok(result);
        };
        let prefix = noise.prefix(&grid)?;
        let realized = grid.horizon();
        result.ttilde_realized = Some(realized);
        result.contraction_predicted = Some(predicted_contraction(&exp, constant, radius, mu_p, realized));
        let run = solve_on_path(x, &prefix, params, radius, &picard, None)?;
        result.trace = run.trace;
        match run.exit {
            ExitReason::BallExit => {
                result.exit = PathExit::BallExit;
                ttilde *= 0.5;
                continue;
            }
            ExitReason::NonContraction => {
                result.exit = PathExit::NonContraction;
            }
            ExitReason::Converged => {
                result.exit = PathExit::Converged;
            }
        }
        if opts.keep_trajectories {
            result.u = Some(run.solution.add(prefix.values())?);
            result.v = Some(run.solution);
            result.w = Some(prefix);
        }
        return Ok(result);
    }
    Ok(result)
}

/// Seed of path `index`: the first word of the ChaCha8 stream `index`
/// keyed by `master`. The path itself is drawn from `ChaCha8Rng::seed_from_u64(seed)`.
pub fn path_seed(master: u64, index: usize) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(index as u64);
    rng.next_u64()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Quantiles {
    pub min: f64,
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
    pub max: f64,
}

impl Quantiles {
    /// Linear-interpolation quantiles; `None` for an empty sample.
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mut v = values.to_vec();
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let at = |q: f64| {
            let pos = q * (v.len() - 1) as f64;
            let i = pos.floor() as usize;
            let frac = pos - i as f64;
            if i + 1 < v.len() {
                v[i] + frac * (v[i + 1] - v[i])
            } else {
                v[i]
            }
        };
        Some(Self {
            min: v[0],
            q25: at(0.25),
            median: at(0.5),
            q75: at(0.75),
            max: v[v.len() - 1],
        })
    }
}

#[derive(Debug, Clone)]
pub struct EnsembleSummary {
    pub master_seed: u64,
    pub paths: Vec<PathResult>,
    pub converged_fraction: f64,
    /// Quantiles of the certified `T̃` over paths where one exists.
    pub ttilde: Option<Quantiles>,
    pub mu_mean: f64,
    pub mu_max: f64,
}

/// Runs [`pathwise_solve`] over `n_paths` seeds derived from `master_seed`.
/// Per-path failures are recorded in the results.
pub fn ensemble_run(
    x: &SpectralField,
    spec: &NoiseSpec,
    params: &SolverParams,
    opts: &StochasticOptions,
    n_paths: usize,
    master_seed: u64,
) -> Result<EnsembleSummary> {
    if n_paths == 0 {
        return Err(Error::Config("ensemble needs at least one path".into()));
    }
    let paths: Vec<PathResult> = (0..n_paths)
        .into_par_iter()
        .map(|i| {
            let seed = path_seed(master_seed, i);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut r = pathwise_solve(x, spec, params, opts, &mut rng)?;
            r.path_id = i;
            r.seed = seed;
            Ok(r)
        })
        .collect::<Result<_>>()?;
    let converged = paths.iter().filter(|p| p.converged()).count();
    let ttildes: Vec<f64> = paths.iter().filter_map(|p| p.ttilde).collect();
    let mu_mean = paths.iter().map(|p| p.mu_p).sum::<f64>() / n_paths as f64;
    let mu_max = paths.iter().map(|p| p.mu_p).fold(0.0, f64::max);
    Ok(EnsembleSummary {
        master_seed,
        converged_fraction: converged as f64 / n_paths as f64,
        ttilde: Quantiles::of(&ttildes),
        mu_mean,
        mu_max,
        paths,
    })
}

pub const ENSEMBLE_HEADER: [&str; 11] = [
    "path_id",
    "seed",
    "family",
    "H",
    "mu_p",
    "Ttilde",
    "converged",
    "iters",
    "contraction_measured",
    "contraction_predicted",
    "residual",
];

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Per-path CSV with [`ENSEMBLE_HEADER`].
pub fn write_ensemble_csv<W: Write>(out: W, summary: &EnsembleSummary) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(ENSEMBLE_HEADER).map_err(csv_error)?;
    for p in &summary.paths {
        w.write_record([
            p.path_id.to_string(),
            p.seed.to_string(),
            p.family.name().to_string(),
            opt(p.hurst),
            p.mu_p.to_string(),
            opt(p.ttilde),
            p.converged().to_string(),
            p.iterations().to_string(),
            opt(p.contraction_measured()),
            opt(p.contraction_predicted),
            opt(p.trace.residual),
        ])
        .map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}
