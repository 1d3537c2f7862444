use rayon::prelude::*;
use serde::Serialize;

use super::budget::{existence_time, BoundChoice, ExistenceBudget};
use super::quadrature::DuhamelQuadrature;
use super::time::{TimeGrid, Trajectory};
use crate::error::{Error, Result};
use crate::field::{lp_norm, validate_params, SolverParams, SpectralField};
use crate::ops::{convection, damping, leray_project};

/// Divergence tolerance for initial data (relative, per mode).
pub const SOLENOIDAL_TOL: f64 = 1e-10;
/// Difference norms below `RATIO_FLOOR * max(1, sup‖u‖)` are round-off and
/// are not used as denominators of measured ratios.
pub const RATIO_FLOOR: f64 = 1e-12;

/// A known additive path `w` entering the nonlinearity as `N(u + w)`.
///
/// `left_limits[j]`, when present, is `w(t_j-)` and replaces `w(t_j)` as the
/// right end of interval `[t_{j-1}, t_j]`.
#[derive(Debug, Clone, Copy)]
pub struct Shift<'a> {
    pub values: &'a Trajectory,
    pub left_limits: &'a [Option<SpectralField>],
}

/// The map `u ↦ e^{-tA}x + G(u)` on a fixed time grid.
#[derive(Debug, Clone)]
pub struct MildMap<'a> {
    params: &'a SolverParams,
    quadrature: DuhamelQuadrature,
    free: Trajectory,
    forcing_integral: Option<Vec<SpectralField>>,
    shift: Option<Shift<'a>>,
}

impl<'a> MildMap<'a> {
    pub fn new(
        x: &SpectralField,
        forcing: Option<&Trajectory>,
        params: &'a SolverParams,
        times: TimeGrid,
    ) -> Result<Self> {
        validate_params(params)?;
        if x.grid() != &params.grid {
            return Err(Error::Input("initial datum is not on the parameter grid".into()));
        }
        let quadrature = DuhamelQuadrature::new(params.grid, times.clone());
        let forcing_integral = match forcing {
            None => None,
            Some(f) => {
                if f.times() != &times || f.grid() != &params.grid {
                    return Err(Error::Input("forcing is not sampled on the solve grid".into()));
                }
                let projected: Vec<SpectralField> = f.states().par_iter().map(leray_project).collect();
                Some(quadrature.integrate(&projected))
            }
        };
        Ok(Self {
            params,
            quadrature,
            free: Trajectory::heat_flow(x, times),
            forcing_integral,
            shift: None,
        })
    }

    pub fn with_shift(mut self, shift: Shift<'a>) -> Result<Self> {
        if shift.values.times() != self.times() || shift.values.grid() != &self.params.grid {
            return Err(Error::Input("shift path is not sampled on the solve grid".into()));
        }
        if shift.left_limits.len() != self.times().len() {
            return Err(Error::Input("shift left limits do not match the solve grid".into()));
        }
        self.shift = Some(shift);
        Ok(self)
    }

    pub fn times(&self) -> &TimeGrid {
        self.quadrature.times()
    }

    pub fn params(&self) -> &SolverParams {
        self.params
    }

    /// `e^{-tA} x` on the nodes.
    pub fn free_flow(&self) -> &Trajectory {
        &self.free
    }

    fn nonlinearity(&self, u: &SpectralField) -> Result<SpectralField> {
        let terms = self.params.terms;
        let mut out = SpectralField::zeros(*u.grid());
        if terms.convection {
            out = out.add(&convection(u, u)?);
        }
        if terms.damping {
            out = out.add(&damping(u, self.params.r)?);
        }
        Ok(out)
    }

    /// `G(u)(t_j)` on every node.
    pub fn g(&self, u: &Trajectory) -> Result<Trajectory> {
        if u.times() != self.times() || u.grid() != &self.params.grid {
            return Err(Error::Input("iterate is not sampled on the solve grid".into()));
        }
        let times = self.times().clone();
        let nint = times.intervals();
        let mut integral = if self.params.terms.is_linear() {
            vec![SpectralField::zeros(self.params.grid); times.len()]
        } else {
            let at = |j: usize, use_left_limit: bool| -> Result<SpectralField> {
                match &self.shift {
                    None => self.nonlinearity(u.state(j)),
                    Some(s) => {
                        let w = match (&s.left_limits[j], use_left_limit) {
                            (Some(lim), true) => lim,
                            _ => s.values.state(j),
                        };
                        self.nonlinearity(&u.state(j).add(w))
                    }
                }
            };
            let values: Vec<SpectralField> = (0..times.len())
                .into_par_iter()
                .map(|j| at(j, false))
                .collect::<Result<_>>()?;
            let limits: Vec<Option<SpectralField>> = match &self.shift {
                None => vec![None; times.len()],
                Some(s) => (0..times.len())
                    .into_par_iter()
                    .map(|j| s.left_limits[j].as_ref().map(|_| at(j, true)).transpose())
                    .collect::<Result<_>>()?,
            };
            let left: Vec<&SpectralField> = values[..nint].iter().collect();
            let right: Vec<&SpectralField> = (1..=nint)
                .map(|j| limits[j].as_ref().unwrap_or(&values[j]))
                .collect();
            let mut out = self.quadrature.integrate_intervals(&left, &right);
            out.iter_mut().for_each(|s| s.scale_in_place(-1.0));
            out
        };
        if let Some(forced) = &self.forcing_integral {
            for (i, f) in integral.iter_mut().zip(forced) {
                i.axpy_in_place(1.0, f);
            }
        }
        Trajectory::new(times, integral)
    }

    /// `e^{-tA}x + G(u)`.
    pub fn apply(&self, u: &Trajectory) -> Result<Trajectory> {
        self.free.add(&self.g(u)?)
    }

    /// `sup_j ‖u - e^{-tA}x - G(u)‖_p`.
    pub fn residual(&self, u: &Trajectory) -> Result<f64> {
        self.apply(u)?.sup_lp_distance(u, self.params.p)
    }
}

/// `G(u)` for a trajectory `u`, forcing `f` and validated parameters.
pub fn mild_rhs_g(u: &Trajectory, f: Option<&Trajectory>, params: &SolverParams) -> Result<Trajectory> {
    let zero = SpectralField::zeros(params.grid);
    MildMap::new(&zero, f, params, u.times().clone())?.g(u)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PicardOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Iterations performed before the stopping rule is consulted.
    pub min_iter: usize,
    /// Exit as soon as an iterate leaves `{sup_j ‖u(t_j)‖_p <= M}`.
    pub ball_radius: Option<f64>,
}

impl Default for PicardOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 200,
            min_iter: 1,
            ball_radius: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ExitReason {
    Converged,
    BallExit,
    NonContraction,
}

/// History of one Picard run.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct PicardTrace {
    /// `f_n = sup_t ‖u_n(t)‖_p`, starting with the seed.
    pub sup_norms: Vec<f64>,
    /// `D_n = sup_t ‖u_{n+1}(t) - u_n(t)‖_p`.
    pub differences: Vec<f64>,
    pub budget: Option<ExistenceBudget>,
    /// True when the horizon exceeds the certified `T*`.
    pub beyond_budget: bool,
    pub residual: Option<f64>,
    pub converged: bool,
}

impl PicardTrace {
    pub fn iterations(&self) -> usize {
        self.differences.len()
    }

    /// `D_{n+1} / D_n` for consecutive differences.
    pub fn ratios(&self) -> Vec<f64> {
        self.differences
            .windows(2)
            .map(|w| if w[0] > 0.0 { w[1] / w[0] } else { 0.0 })
            .collect()
    }

    /// Largest ratio whose denominator sits above the round-off floor.
    pub fn measured_contraction(&self) -> Option<f64> {
        let scale = self.sup_norms.iter().cloned().fold(1.0, f64::max);
        self.differences
            .windows(2)
            .filter(|w| w[0] > RATIO_FLOOR * scale)
            .map(|w| w[1] / w[0])
            .reduce(f64::max)
    }

    pub fn predicted_ratio(&self) -> Option<f64> {
        self.budget.map(|b| b.rho)
    }
}

#[derive(Debug, Clone)]
pub struct PicardRun {
    pub solution: Trajectory,
    pub trace: PicardTrace,
    pub exit: ExitReason,
}

/// Successive substitution `u_{n+1} = e^{-tA}x + G(u_n)` from `seed`.
///
/// Non-convergence and ball exits are reported through [`ExitReason`];
/// non-finite iterates are an error.
pub fn iterate(map: &MildMap<'_>, seed: Trajectory, opts: &PicardOptions) -> Result<PicardRun> {
    let p = map.params().p;
    let mut trace = PicardTrace::default();
    trace.sup_norms.push(seed.sup_lp(p)?);
    let mut current = seed;
    for n in 0..opts.max_iter {
        let next = map.apply(&current)?;
        if !next.is_finite() {
            return Err(Error::BlowUp {
                iteration: n + 1,
                last_finite: Box::new(current),
            });
        }
        let (norm, diff) = norms_and_distance(&next, &current, p)?;
        trace.sup_norms.push(norm);
        trace.differences.push(diff);
        if let Some(m) = opts.ball_radius {
            if norm > m {
                return Ok(PicardRun {
                    solution: next,
                    trace,
                    exit: ExitReason::BallExit,
                });
            }
        }
        current = next;
        if diff < opts.tol && n + 1 >= opts.min_iter {
            trace.converged = true;
            trace.residual = Some(map.residual(&current)?);
            return Ok(PicardRun {
                solution: current,
                trace,
                exit: ExitReason::Converged,
            });
        }
    }
    Ok(PicardRun {
        solution: current,
        trace,
        exit: ExitReason::NonContraction,
    })
}

fn norms_and_distance(next: &Trajectory, current: &Trajectory, p: f64) -> Result<(f64, f64)> {
    let pairs: Vec<(f64, f64)> = next
        .states()
        .par_iter()
        .zip(current.states().par_iter())
        .map(|(a, b)| Ok((lp_norm(a, p)?, lp_norm(&a.sub(b), p)?)))
        .collect::<Result<_>>()?;
    Ok(pairs
        .into_iter()
        .fold((0.0, 0.0), |(n, d), (a, b)| (n.max(a), d.max(b))))
}

fn check_solenoidal(x: &SpectralField) -> Result<()> {
    let div = x.divergence_residual();
    if div > SOLENOIDAL_TOL {
        return Err(Error::Input(format!(
            "initial datum is not solenoidal (relative divergence {div:e})"
        )));
    }
    Ok(())
}

/// `‖x‖_p + C ∫_0^T ‖f(s)‖_p ds` (trapezoid rule over the nodes).
pub fn seed_norm(x: &SpectralField, f: Option<&Trajectory>, p: f64, constant: f64) -> Result<f64> {
    let mut f0 = x.lp_norm(p)?;
    if let Some(f) = f {
        let norms = f.lp_norms(p)?;
        let t = f.times();
        let integral: f64 = (0..t.intervals())
            .map(|j| 0.5 * t.step(j) * (norms[j] + norms[j + 1]))
            .sum();
        f0 += constant * integral;
    }
    Ok(f0)
}

fn budget_for(x: &SpectralField, f: Option<&Trajectory>, params: &SolverParams) -> Result<Option<ExistenceBudget>> {
    let Ok(constant) = params.estimate_constant() else {
        return Ok(None);
    };
    let f0 = seed_norm(x, f, params.p, constant)?;
    match existence_time(f0, constant, &params.exponents()?, params.horizon, BoundChoice::Recurrence) {
        Ok(b) => Ok(Some(b)),
        Err(Error::Infeasible(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

fn finish(run: PicardRun, max_iter: usize) -> Result<(Trajectory, PicardTrace)> {
    match run.exit {
        ExitReason::Converged => Ok((run.solution, run.trace)),
        _ => {
            let last = run.trace.differences.last().copied().unwrap_or(f64::NAN);
            Err(Error::NonConvergence {
                iterations: max_iter,
                last_difference: last,
                trace: Box::new(run.trace),
            })
        }
    }
}

/// Picard iteration from a given seed on the uniform grid of `params`.
pub fn picard_solve_from(
    x: &SpectralField,
    f: Option<&Trajectory>,
    params: &SolverParams,
    seed: Trajectory,
    opts: &PicardOptions,
) -> Result<(Trajectory, PicardTrace)> {
    let times = TimeGrid::uniform(params.horizon, params.nt)?;
    check_solenoidal(x)?;
    let map = MildMap::new(x, f, params, times)?;
    if seed.times() != map.times() || seed.grid() != &params.grid {
        return Err(Error::Input("seed iterate is not sampled on the solve grid".into()));
    }
    let budget = budget_for(x, f, params)?;
    let mut run = iterate(&map, seed, opts)?;
    run.trace.beyond_budget = match budget {
        Some(b) => b.t_star < params.horizon,
        None => params.estimate_constant().is_ok(),
    };
    run.trace.budget = budget;
    finish(run, opts.max_iter)
}

/// Picard iteration seeded with `u_0(t) = e^{-tA}x` over `[0, params.horizon]`.
///
/// The horizon is used as given; when an estimate constant is available the
/// trace records the existence budget and flags horizons beyond it.
pub fn picard_solve(
    x: &SpectralField,
    f: Option<&Trajectory>,
    params: &SolverParams,
    opts: &PicardOptions,
) -> Result<(Trajectory, PicardTrace)> {
    let times = TimeGrid::uniform(params.horizon, params.nt)?;
    let seed = Trajectory::heat_flow(x, times);
    picard_solve_from(x, f, params, seed, opts)
}

/// Like [`picard_solve`], with the horizon reduced to the certified `T*`.
pub fn picard_solve_certified(
    x: &SpectralField,
    f: Option<&Trajectory>,
    params: &SolverParams,
    opts: &PicardOptions,
) -> Result<(Trajectory, PicardTrace)> {
    validate_params(params)?;
    let constant = params.estimate_constant()?;
    if f.is_some() {
        return Err(Error::Usage(
            "certified solves resample the horizon; sample forcing on the certified grid and call picard_solve".into(),
        ));
    }
    let f0 = seed_norm(x, None, params.p, constant)?;
    let budget = existence_time(f0, constant, &params.exponents()?, params.horizon, BoundChoice::Recurrence)?;
    let certified = params.clone().with_horizon(budget.t_star);
    picard_solve(x, None, &certified, opts)
}

#[derive(Debug, Clone, Serialize)]
pub struct UniquenessReport {
    pub distance: f64,
    pub tol: f64,
    /// `distance < 10 tol`.
    pub agrees: bool,
    pub traces: [PicardTrace; 2],
}

/// Runs the iteration from two seeds and compares the fixed points.
pub fn uniqueness_check(
    x: &SpectralField,
    f: Option<&Trajectory>,
    params: &SolverParams,
    seeds: [Trajectory; 2],
    opts: &PicardOptions,
    admissible_radius: Option<f64>,
) -> Result<UniquenessReport> {
    if let Some(k) = admissible_radius {
        for seed in &seeds {
            let norm = seed.sup_lp(params.p)?;
            if norm > k {
                return Err(Error::Domain(format!(
                    "seed sup-norm {norm} lies outside the admissible ball K = {k}"
                )));
            }
        }
    }
    let [a, b] = seeds;
    let (ua, ta) = picard_solve_from(x, f, params, a, opts)?;
    let (ub, tb) = picard_solve_from(x, f, params, b, opts)?;
    let distance = ua.sup_lp_distance(&ub, params.p)?;
    Ok(UniquenessReport {
        distance,
        tol: opts.tol,
        agrees: distance < 10.0 * opts.tol,
        traces: [ta, tb],
    })
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::field::{NonlinearTerms, PhysicalField, TorusGrid};
    use crate::ops::heat_semigroup;

    fn datum(grid: TorusGrid, amp: f64, seed: u64) -> SpectralField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = SpectralField::random_solenoidal(grid, 3, 1.0, &mut rng);
        let norm = g.lp_norm(6.0).unwrap();
        g.scaled(amp / norm)
    }

    fn params(grid: TorusGrid) -> SolverParams {
        SolverParams::new(grid, 3.0, 6.0, 0.1, 16)
    }

    #[test]
    fn zero_data_gives_zero_in_one_iteration() {
        let grid = TorusGrid::periodic(2, 8).unwrap();
        let x = SpectralField::zeros(grid);
        let (u, trace) = picard_solve(&x, None, &params(grid), &PicardOptions::default()).unwrap();
        assert_eq!(trace.iterations(), 1);
        assert!(u.states().iter().all(|s| s.max_abs() == 0.0));
    }

    #[test]
    fn g_vanishes_on_zero() {
        let grid = TorusGrid::periodic(2, 8).unwrap();
        let p = params(grid);
        let times = TimeGrid::uniform(0.1, 16).unwrap();
        let g = mild_rhs_g(&Trajectory::zeros(grid, times), None, &p).unwrap();
        assert!(g.states().iter().all(|s| s.max_abs() == 0.0));
    }

    #[test]
    fn linear_mode_reduces_to_heat_flow() {
        let grid = TorusGrid::periodic(2, 16).unwrap();
        let x = datum(grid, 1.0, 3);
        let p = params(grid).with_terms(NonlinearTerms::LINEAR);
        let (u, _) = picard_solve(&x, None, &p, &PicardOptions::default()).unwrap();
        for (t, s) in u.times().nodes().iter().zip(u.states()) {
            assert_eq!(s, &heat_semigroup(*t, &x).unwrap());
        }
    }

    #[test]
    fn fixed_point_residual_and_solenoidality() {
        let grid = TorusGrid::periodic(2, 16).unwrap();
        let x = datum(grid, 0.3, 5);
        let p = params(grid);
        let opts = PicardOptions::default();
        let (u, trace) = picard_solve(&x, None, &p, &opts).unwrap();
        assert!(trace.converged);
        assert!(trace.residual.unwrap() < 2.0 * opts.tol);
        for s in u.states() {
            assert!(s.divergence_residual() < 1e-12);
        }
        assert!(trace.measured_contraction().unwrap() < 1.0);
    }

    #[test]
    fn forcing_enters_linearly() {
        let grid = TorusGrid::periodic(2, 8).unwrap();
        let p = params(grid).with_terms(NonlinearTerms::LINEAR);
        let times = TimeGrid::uniform(0.1, 16).unwrap();
        let g = PhysicalField::from_fn(grid, |x| vec![x[1].sin(), 0.0]);
        let g = SpectralField::forward(&g);
        let f = Trajectory::new(times.clone(), vec![g.clone(); times.len()]).unwrap();
        let out = mild_rhs_g(&Trajectory::zeros(grid, times.clone()), Some(&f), &p).unwrap();
        // constant forcing on a |k|=1 mode: (1 - e^{-t}) g
        for (t, s) in times.nodes().iter().zip(out.states()) {
            let want = g.scaled(1.0 - (-t).exp());
            assert!(s.sub(&want).max_abs() < 1e-12 * g.max_abs());
        }
    }

    #[test]
    fn rejects_divergent_datum() {
        let grid = TorusGrid::periodic(2, 8).unwrap();
        let x = SpectralField::forward(&PhysicalField::from_fn(grid, |x| vec![x[0].sin(), 0.0]));
        let err = picard_solve(&x, None, &params(grid), &PicardOptions::default()).unwrap_err();
        assert!(matches!(err, Error::Input(_)), "{err}");
    }

    #[test]
    fn non_convergence_carries_trace() {
        let grid = TorusGrid::periodic(2, 8).unwrap();
        let x = datum(grid, 0.5, 7);
        let opts = PicardOptions {
            tol: 1e-30,
            max_iter: 3,
            ..PicardOptions::default()
        };
        match picard_solve(&x, None, &params(grid), &opts).unwrap_err() {
            Error::NonConvergence { iterations, trace, .. } => {
                assert_eq!(iterations, 3);
                assert_eq!(trace.differences.len(), 3);
            }
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn identical_seeds_have_zero_distance() {
        let grid = TorusGrid::periodic(2, 8).unwrap();
        let x = datum(grid, 0.2, 9);
        let p = params(grid);
        let seed = Trajectory::heat_flow(&x, TimeGrid::uniform(0.1, 16).unwrap());
        let report =
            uniqueness_check(&x, None, &p, [seed.clone(), seed], &PicardOptions::default(), None).unwrap();
        assert_eq!(report.distance, 0.0);
        assert!(report.agrees);
    }

    #[test]
    fn budget_flag_for_long_horizons() {
        let grid = TorusGrid::periodic(2, 8).unwrap();
        let x = datum(grid, 0.2, 11);
        let short = params(grid).with_constant(1.0).with_horizon(1e-3);
        let (_, t) = picard_solve(&x, None, &short, &PicardOptions::default()).unwrap();
        assert!(!t.beyond_budget);
        assert!(t.predicted_ratio().unwrap() <= 0.5);
        let long = params(grid).with_constant(1.0).with_horizon(5.0);
        let (_, t) = picard_solve(&x, None, &long, &PicardOptions::default()).unwrap();
        assert!(t.beyond_budget);
    }

    #[test]
    fn bounded_iterates_inside_budget() {
        let grid = TorusGrid::periodic(2, 8).unwrap();
        let x = datum(grid, 0.2, 13);
        let p = params(grid).with_constant(1.0);
        let (_, t) = picard_solve_certified(&x, None, &p, &PicardOptions::default()).unwrap();
        let k = t.budget.unwrap().k_bound;
        assert!(t.sup_norms.iter().all(|f| *f <= k));
    }
}
