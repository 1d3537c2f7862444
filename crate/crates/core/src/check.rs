//! Quick self-test of the suite's invariants, run by the `check` subcommand.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::{shear_field, taylor_green, RunConfig};
use crate::error::Result;
use crate::field::{NonlinearTerms, PhysicalField, SolverParams, SpectralField, TorusGrid};
use crate::lab::{measure_gradient_constant, measure_heat_constant, EstimateConstants, LabSettings, SampleSource};
use crate::noise::{
    fbm_kernel_identity_check, generate, levy_convolution_with_jumps, MarkLaw, NoiseSpec, PhiSpec,
};
use crate::ops::{convection, damping, damping_derivative, heat_semigroup, leray_project};
use crate::picard::{existence_time, picard_solve, uniqueness_check, BoundChoice, PicardOptions, TimeGrid, Trajectory};
use crate::stochastic::{pathwise_solve, StochasticOptions};

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn outcome(name: &'static str, value: Result<(bool, String)>) -> CheckOutcome {
    match value {
        Ok((passed, detail)) => CheckOutcome { name, passed, detail },
        Err(e) => CheckOutcome {
            name,
            passed: false,
            detail: format!("error: {e}"),
        },
    }
}

fn within(value: f64, bound: f64) -> (bool, String) {
    (value <= bound, format!("{value:e} <= {bound:e}"))
}

fn field(grid: TorusGrid, f: impl Fn(&[f64]) -> Vec<f64>) -> SpectralField {
    SpectralField::forward(&PhysicalField::from_fn(grid, f))
}

/// Runs every check with the grid exponents of `cfg` where they matter.
pub fn run_checks(cfg: &RunConfig) -> Vec<CheckOutcome> {
    let g2 = TorusGrid::periodic(2, 16).expect("grid");
    let mut out = Vec::new();

    out.push(outcome("heat eigenmode decay", (|| {
        let u = shear_field(g2, 1.0);
        let got = heat_semigroup(0.7, &u)?;
        Ok(within(got.sub(&u.scaled((-0.7f64).exp())).max_abs() / u.max_abs(), 1e-12))
    })()));

    out.push(outcome("leray annihilates gradients", (|| {
        let grad = field(g2, |x| vec![x[0].cos() * x[1].cos(), -x[0].sin() * x[1].sin()]);
        Ok(within(leray_project(&grad).max_abs() / grad.max_abs(), 1e-12))
    })()));

    out.push(outcome("taylor-green self convection vanishes", (|| {
        let tg = taylor_green(g2, 1.0);
        Ok(within(convection(&tg, &tg)?.l2_norm(), 1e-10))
    })()));

    out.push(outcome("cubic damping of a shear", (|| {
        let u = shear_field(g2, 1.0);
        let want = field(g2, |x| vec![0.75 * x[1].sin() - 0.25 * (3.0 * x[1]).sin(), 0.0]);
        Ok(within(damping(&u, 3.0)?.sub(&want).l2_norm(), 1e-10))
    })()));

    out.push(outcome("damping derivative vs central differences", (|| {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let u = SpectralField::random_solenoidal(g2, 3, 1.0, &mut rng);
        let v = SpectralField::random_solenoidal(g2, 3, 1.0, &mut rng);
        let (u, v) = (u.scaled(1.0 / u.max_abs()), v.scaled(1.0 / v.max_abs()));
        let eps = 1e-5;
        let fd = damping(&u.axpy(eps, &v), 3.0)?
            .sub(&damping(&u.axpy(-eps, &v), 3.0)?)
            .scaled(0.5 / eps);
        let exact = damping_derivative(&u, &v, 3.0)?;
        Ok(within(fd.sub(&exact).max_abs() / exact.max_abs(), 1e-8))
    })()));

    out.push(outcome("existence time closed form", (|| {
        let e = crate::field::ModelExponents::new(3, 6.0, 3.0)?;
        let b = existence_time(0.0, 1.0, &e, 1.0, BoundChoice::Pinned(1.0))?;
        Ok(within((b.t_star - ((5f64.sqrt() - 1.0) / 2.0).powi(4)).abs(), 1e-9))
    })()));

    let small = taylor_green(g2, cfg.initial.amplitude.min(0.1));
    let params = SolverParams::new(g2, 3.0, 6.0, 0.05, 16);

    out.push(outcome("linear picard is heat flow", (|| {
        let p = params.clone().with_terms(NonlinearTerms::LINEAR);
        let (u, _) = picard_solve(&small, None, &p, &PicardOptions::default())?;
        let heat = Trajectory::heat_flow(&small, u.times().clone());
        Ok(within(u.sup_lp_distance(&heat, 6.0)?, 1e-12))
    })()));

    out.push(outcome("picard fixed point residual and contraction", (|| {
        let opts = PicardOptions::default();
        let (u, t) = picard_solve(&small, None, &params, &opts)?;
        let div = u.states().iter().map(|s| s.divergence_residual()).fold(0.0, f64::max);
        let rho = t.measured_contraction().unwrap_or(0.0);
        let res = t.residual.unwrap_or(f64::INFINITY);
        Ok((
            res < 2.0 * opts.tol && rho < 1.0 && div < 1e-12,
            format!("residual {res:e}, ratio {rho:e}, divergence {div:e}"),
        ))
    })()));

    out.push(outcome("two-seed uniqueness", (|| {
        let times = TimeGrid::uniform(params.horizon, params.nt)?;
        let seeds = [Trajectory::zeros(g2, times.clone()), Trajectory::heat_flow(&small, times)];
        let r = uniqueness_check(&small, None, &params, seeds, &PicardOptions::default(), None)?;
        Ok(within(r.distance, 1e-8))
    })()));

    out.push(outcome("noise-off stochastic solve is deterministic", (|| {
        let p = params.clone().with_constant(1.0).with_horizon(0.01).with_nt(16);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let r = pathwise_solve(&small, &NoiseSpec::off(g2), &p, &StochasticOptions::default(), &mut rng)?;
        let v = r.v.as_ref().expect("trajectory");
        let det = p.with_horizon(r.ttilde_realized.unwrap_or(0.0)).with_nt(v.times().intervals());
        let (u, _) = picard_solve(&small, None, &det, &PicardOptions::default())?;
        Ok(within(r.u.as_ref().expect("trajectory").sup_lp_distance(&u, 6.0)?, 1e-12))
    })()));

    out.push(outcome("zero wiener noise", (|| {
        let spec = NoiseSpec::wiener(g2, PhiSpec::new(0.0, 1.0, 3))?;
        let times = TimeGrid::uniform(1.0, 8)?;
        let w = generate(&spec, &times, &mut ChaCha8Rng::seed_from_u64(4))?;
        Ok(within(w.mu_p(6.0)?, 0.0))
    })()));

    out.push(outcome("forced jump decays by the semigroup", (|| {
        let psi = shear_field(g2, 1.0);
        let spec = NoiseSpec::levy(g2, 1.0, MarkLaw::Gaussian { mean: 0.0, std: 1.0 }, &psi)?;
        let times = TimeGrid::uniform(1.0, 8)?;
        let w = levy_convolution_with_jumps(&spec, &times, &[(0.5, 1.0)])?;
        let want = heat_semigroup(0.5, &psi)?;
        Ok(within(w.values().last().sub(&want).max_abs() / psi.max_abs(), 1e-12))
    })()));

    out.push(outcome("fbm kernel identity", (|| {
        let a = fbm_kernel_identity_check(0.75, 1.0, 1.0, 1e-10)?;
        let b = fbm_kernel_identity_check(0.6, 2.0, 1.0, 1e-10)?;
        Ok(within(a.max(b), 1e-6))
    })()));

    out.push(outcome("fractional hurst gate", (|| {
        let g3 = TorusGrid::periodic(3, 8)?;
        let phi = PhiSpec::new(1.0, 1.0, 2);
        let rejected = [0.5, 0.75].iter().all(|&h| NoiseSpec::fbm(g3, phi, h).is_err());
        let accepted = NoiseSpec::fbm(g3, phi, 0.8).is_ok();
        Ok((rejected && accepted, format!("rejects H <= 3/4: {rejected}, accepts 0.8: {accepted}")))
    })()));

    out.push(outcome("hypothesis gates", (|| {
        let a = SolverParams::new(TorusGrid::periodic(3, 8)?, 5.0, 5.0, 0.1, 8);
        let b = SolverParams::new(TorusGrid::periodic(2, 8)?, 1.0, 2.0, 0.1, 8);
        let ok = crate::field::validate_params(&a).is_err() && crate::field::validate_params(&b).is_err();
        Ok((ok, "rejects (3,5,5) and (2,1,2)".into()))
    })()));

    out.push(outcome("heat ratio at equal exponents", (|| {
        let s = LabSettings::new(g2, 1e-3, 1.0, 5);
        let r = measure_heat_constant(4.0, 4.0, &SampleSource::Random { count: 16 }, &s)?;
        Ok(within(r.value, 1.0 + 1e-12))
    })()));

    out.push(outcome("gradient single-mode peak", (|| {
        let s = LabSettings::new(g2, 1e-3, 1.0, 5);
        let g = [shear_field(g2, 1.0)];
        let r = measure_gradient_constant(2.0, 2.0, &SampleSource::Fields(&g), &s)?;
        Ok(within((r.value - 0.5f64.sqrt() * (-0.5f64).exp()).abs(), 1e-6))
    })()));

    out.push(outcome("constants file round trip", (|| {
        let s = LabSettings::new(TorusGrid::periodic(2, 8)?, 1e-2, 0.1, 6);
        let e = crate::field::ModelExponents::new(2, 4.0, 2.0)?;
        let k = crate::lab::measure_all(&e, 4.0, &SampleSource::Random { count: 2 }, &s)?;
        let back = EstimateConstants::from_toml(&k.to_toml()?)?;
        Ok((back == k, "write then read".into()))
    })()));

    out
}
