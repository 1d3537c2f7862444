//! Command-line front end.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::check::run_checks;
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::field::{ModelExponents, TorusGrid};
use crate::lab::{measure_all, EstimateConstants, SampleSource};
use crate::noise::{
    csv_error, fbm_mode_variance, generate, ou_increment_variance, path_csv_header, write_path_rows, NoiseFamily,
    NoiseModes, NoisePath,
};
use crate::picard::{
    existence_time, picard_solve, picard_solve_certified, seed_norm, BoundChoice, PicardTrace, TimeGrid, Trajectory,
};
use crate::stochastic::{ensemble_run, path_seed, random_time_budget, write_ensemble_csv, EnsembleSummary};

#[derive(Debug, Parser)]
#[command(name = "cbf-mild", version, about = "Mild solutions of the convective Brinkman-Forchheimer equations on the torus")]
pub struct Cli {
    /// TOML run configuration (defaults are used without one).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Master seed, overriding `[rng] seed`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory, overriding `[output] dir`.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Suppress progress and summary output.
    #[arg(long, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Existence budget and Picard solve; writes trajectory.csv and trace.csv.
    Deterministic,
    /// Pathwise ensemble; writes ensemble.csv and summary.toml.
    Stochastic,
    /// Noise paths and covariance diagnostics; writes noise.csv and noise_diagnostics.csv.
    Noise,
    /// Measures the estimate constants; writes constants.toml and constants.csv.
    Estimates,
    /// Existence-time tables; writes budget.csv.
    Budget(BudgetArgs),
    /// Runs the invariant suite.
    Check,
}

#[derive(Debug, Args)]
pub struct BudgetArgs {
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long)]
    pub r: Option<f64>,
    #[arg(long)]
    pub p: Option<f64>,
    /// Estimate constant; swept as C, 2C, 4C.
    #[arg(long)]
    pub c: Option<f64>,
    /// Pin the iterate bound K instead of using the recurrence bound.
    #[arg(long)]
    pub k: Option<f64>,
    /// Seed norm; defaults to the configured datum's norm, or 0 with explicit exponents.
    #[arg(long)]
    pub f0: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    pub tmax: f64,
    /// Ball radius M for the random-time table.
    #[arg(long)]
    pub radius: Option<f64>,
    /// Noise sup-norms for the random-time table.
    #[arg(long, value_delimiter = ',')]
    pub mu: Vec<f64>,
}

/// Parses `argv` and runs; returns the process exit code.
pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

/// 1 for configuration and usage errors, 2 for numerical failures.
pub fn exit_code(e: &Error) -> i32 {
    if e.is_configuration() || matches!(e, Error::Io(_)) {
        1
    } else {
        2
    }
}

fn load_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.rng.seed = seed;
    }
    Ok(cfg)
}

fn output_dir(cli: &Cli, cfg: &RunConfig) -> Result<PathBuf> {
    let dir = cfg.output_dir(cli.out.as_deref());
    std::fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn csv_file(dir: &Path, name: &str) -> Result<csv::Writer<BufWriter<File>>> {
    Ok(csv::Writer::from_writer(BufWriter::new(File::create(dir.join(name))?)))
}

pub fn run(cli: &Cli) -> Result<i32> {
    let cfg = load_config(cli)?;
    match &cli.command {
        Command::Deterministic => deterministic(cli, &cfg),
        Command::Stochastic => stochastic(cli, &cfg),
        Command::Noise => noise(cli, &cfg),
        Command::Estimates => estimates(cli, &cfg),
        Command::Budget(args) => budget(cli, &cfg, args),
        Command::Check => check(cli, &cfg),
    }
}

fn say(cli: &Cli, line: impl AsRef<str>) {
    if !cli.quiet {
        println!("{}", line.as_ref());
    }
}

/// `t, norm_p, norm_2, div_residual`.
pub fn write_trajectory_csv<W: Write>(out: W, u: &Trajectory, p: f64) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t", "norm_p", "norm_2", "div_residual"]).map_err(csv_error)?;
    let norms = u.lp_norms(p)?;
    for ((t, s), n) in u.times().nodes().iter().zip(u.states()).zip(norms) {
        w.write_record([t.to_string(), n.to_string(), s.l2_norm().to_string(), s.divergence_residual().to_string()])
            .map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

/// `n, f_n, D_n, ratio` with `ratio = D_n / D_{n-1}`.
pub fn write_trace_csv<W: Write>(out: W, trace: &PicardTrace) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["n", "f_n", "D_n", "ratio"]).map_err(csv_error)?;
    for (n, f) in trace.sup_norms.iter().enumerate() {
        let d = trace.differences.get(n).map(|d| d.to_string()).unwrap_or_default();
        let ratio = match (n.checked_sub(1).and_then(|m| trace.differences.get(m)), trace.differences.get(n)) {
            (Some(prev), Some(cur)) if *prev > 0.0 => (cur / prev).to_string(),
            _ => String::new(),
        };
        w.write_record([n.to_string(), f.to_string(), d, ratio]).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

fn deterministic(cli: &Cli, cfg: &RunConfig) -> Result<i32> {
    let params = cfg.solver_params()?;
    let x = cfg.initial_datum()?;
    let opts = cfg.picard_options();
    let dir = output_dir(cli, cfg)?;
    let solved = if cfg.time.certify {
        picard_solve_certified(&x, None, &params, &opts)
    } else {
        picard_solve(&x, None, &params, &opts)
    };
    let (u, trace) = match solved {
        Ok(v) => v,
        Err(Error::NonConvergence {
            iterations,
            last_difference,
            trace,
        }) => {
            if cfg.output.trace {
                write_trace_csv(BufWriter::new(File::create(dir.join("trace.csv"))?), &trace)?;
            }
            return Err(Error::NonConvergence {
                iterations,
                last_difference,
                trace,
            });
        }
        Err(e) => return Err(e),
    };
    if let Some(b) = trace.budget {
        say(cli, format!("budget: C = {}, K = {}, f0 = {}, T* = {}, rho = {}", b.constant, b.k_bound, b.f0, b.t_star, b.rho));
    }
    if trace.beyond_budget && !cli.quiet {
        eprintln!(
            "warning: horizon T = {} exceeds the certified existence time; the bound is sufficient, not necessary",
            u.times().horizon()
        );
    }
    if cfg.output.trajectory {
        write_trajectory_csv(BufWriter::new(File::create(dir.join("trajectory.csv"))?), &u, params.p)?;
    }
    if cfg.output.trace {
        write_trace_csv(BufWriter::new(File::create(dir.join("trace.csv"))?), &trace)?;
    }
    say(
        cli,
        format!(
            "converged in {} iterations; residual {}; measured contraction {}",
            trace.iterations(),
            trace.residual.unwrap_or(f64::NAN),
            trace.measured_contraction().map(|r| r.to_string()).unwrap_or_else(|| "n/a".into())
        ),
    );
    Ok(0)
}

fn summary_toml(summary: &EnsembleSummary) -> Result<String> {
    #[derive(serde::Serialize)]
    struct Summary<'a> {
        master_seed: u64,
        n_paths: usize,
        converged_fraction: f64,
        mu_mean: f64,
        mu_max: f64,
        exits: std::collections::BTreeMap<&'a str, usize>,
        ttilde: Option<crate::stochastic::Quantiles>,
    }
    let mut exits = std::collections::BTreeMap::new();
    for p in &summary.paths {
        *exits.entry(p.exit.name()).or_insert(0) += 1;
    }
    toml::to_string(&Summary {
        master_seed: summary.master_seed,
        n_paths: summary.paths.len(),
        converged_fraction: summary.converged_fraction,
        mu_mean: summary.mu_mean,
        mu_max: summary.mu_max,
        exits,
        ttilde: summary.ttilde,
    })
    .map_err(|e| Error::Numeric(format!("cannot serialize summary: {e}")))
}

fn stochastic(cli: &Cli, cfg: &RunConfig) -> Result<i32> {
    let params = cfg.stochastic_params()?;
    let x = cfg.initial_datum()?;
    let spec = cfg.noise_spec()?;
    let summary = ensemble_run(&x, &spec, &params, &cfg.stochastic_options(), cfg.noise.paths, cfg.rng.seed)?;
    let dir = output_dir(cli, cfg)?;
    if cfg.output.ensemble {
        write_ensemble_csv(BufWriter::new(File::create(dir.join("ensemble.csv"))?), &summary)?;
    }
    std::fs::write(dir.join("summary.toml"), summary_toml(&summary)?)?;
    say(
        cli,
        format!(
            "{} paths, converged fraction {}, median T̃ {}",
            summary.paths.len(),
            summary.converged_fraction,
            summary.ttilde.map(|q| q.median.to_string()).unwrap_or_else(|| "n/a".into())
        ),
    );
    Ok(0)
}

fn noise(cli: &Cli, cfg: &RunConfig) -> Result<i32> {
    let spec = cfg.noise_spec()?;
    let times = TimeGrid::uniform(cfg.time.horizon, cfg.noise.nt)?;
    let n_paths = cfg.noise.paths;
    let paths: Vec<NoisePath> = (0..n_paths)
        .map(|i| generate(&spec, &times, &mut ChaCha8Rng::seed_from_u64(path_seed(cfg.rng.seed, i))))
        .collect::<Result<_>>()?;
    let dir = output_dir(cli, cfg)?;
    let modes = NoiseModes::new(&spec);
    let with_modes = cfg.output.noise_modes && spec.family != NoiseFamily::Levy && !spec.is_off();
    if cfg.output.noise {
        let mut w = csv_file(&dir, "noise.csv")?;
        w.write_record(path_csv_header(with_modes.then_some(&modes))).map_err(csv_error)?;
        for (i, path) in paths.iter().enumerate().take(cfg.output.noise_paths) {
            write_path_rows(&mut w, i, path, cfg.model.p, with_modes)?;
        }
        w.flush()?;
    }
    let mut w = csv_file(&dir, "noise_diagnostics.csv")?;
    w.write_record(["family", "quantity", "t", "empirical", "expected", "std_error", "z"])
        .map_err(csv_error)?;
    let mut worst: f64 = 0.0;
    let mut emit = |w: &mut csv::Writer<_>, quantity: String, t: f64, samples: &[f64], expected: f64, second: bool| -> Result<()> {
        let n = samples.len() as f64;
        let (emp, se) = if second {
            let m2 = samples.iter().map(|a| a * a).sum::<f64>() / n;
            let m4 = samples.iter().map(|a| a.powi(4)).sum::<f64>() / n;
            (m2, ((m4 - m2 * m2) / n).sqrt())
        } else {
            let m = samples.iter().sum::<f64>() / n;
            let v = samples.iter().map(|a| (a - m).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
            (m, (v / n).sqrt())
        };
        let z = if se > 0.0 { (emp - expected) / se } else { 0.0 };
        worst = worst.max(z.abs());
        w.write_record([
            spec.family.name().to_string(),
            quantity,
            t.to_string(),
            emp.to_string(),
            expected.to_string(),
            se.to_string(),
            z.to_string(),
        ])
        .map_err(csv_error)
    };
    if n_paths >= 2 {
        match spec.family {
            NoiseFamily::Wiener | NoiseFamily::Fbm if !spec.is_off() => {
                let dim = spec.grid.dim();
                for (s, slot) in modes.slots().iter().enumerate().take(5) {
                    for j in [times.len() / 2, times.len() - 1] {
                        let t = times.nodes()[j];
                        let samples: Vec<f64> =
                            paths.iter().map(|p| p.coefficients().expect("mode amplitudes")[j][s]).collect();
                        let expected = match spec.family {
                            NoiseFamily::Fbm => fbm_mode_variance(spec.hurst.unwrap_or(0.5).max(0.5), slot.k_squared, slot.phi, t)?,
                            _ => ou_increment_variance(slot.phi, slot.k_squared, t),
                        };
                        emit(&mut w, format!("var_{}", slot.label(dim)), t, &samples, expected, true)?;
                    }
                }
            }
            NoiseFamily::Levy => {
                let psi = &spec.levy.as_ref().expect("levy spec").profile;
                let grid = *psi.grid();
                let flat = (0..grid.len())
                    .max_by(|&a, &b| psi.component(0)[a].norm().partial_cmp(&psi.component(0)[b].norm()).unwrap())
                    .unwrap_or(0);
                for &j in &[times.len() / 2, times.len() - 1] {
                    let t = times.nodes()[j];
                    let samples: Vec<f64> = paths
                        .iter()
                        .map(|p| {
                            let k = p.times().nodes().partition_point(|&s| s <= t) - 1;
                            let dir = psi.component(0)[flat] / psi.component(0)[flat].norm();
                            (dir.conj() * p.values().state(k).component(0)[flat]).re / grid.len() as f64
                        })
                        .collect();
                    emit(&mut w, "mean_profile_mode".into(), t, &samples, 0.0, false)?;
                }
            }
            _ => {}
        }
    }
    w.flush()?;
    say(cli, format!("{n_paths} {} paths; largest diagnostic |z| = {worst}", spec.family.name()));
    Ok(0)
}

fn write_constants_rows<W: Write>(w: &mut csv::Writer<W>, k: &EstimateConstants, prefix: Option<f64>) -> Result<()> {
    for r in k.reports() {
        let mut row = Vec::new();
        if let Some(l) = prefix {
            row.push(l.to_string());
        }
        row.extend([
            r.estimate.name().to_string(),
            r.p.to_string(),
            r.q_or_r.to_string(),
            r.value.to_string(),
            r.samples.to_string(),
            r.t_min.to_string(),
            r.t_max.to_string(),
        ]);
        w.write_record(row).map_err(csv_error)?;
    }
    Ok(())
}

const CONSTANTS_HEADER: [&str; 7] = ["estimate", "p", "q_or_r", "C_measured", "samples", "t_min", "t_max"];

fn estimates(cli: &Cli, cfg: &RunConfig) -> Result<i32> {
    let exp = ModelExponents::new(cfg.grid.dim, cfg.model.p, cfg.model.r)?;
    let source = SampleSource::Random { count: cfg.lab.samples };
    let grid = cfg.grid()?;
    let k = measure_all(&exp, cfg.lab_q(), &source, &cfg.lab_settings(grid))?;
    let dir = output_dir(cli, cfg)?;
    k.write(&dir.join("constants.toml"))?;
    let mut w = csv_file(&dir, "constants.csv")?;
    w.write_record(CONSTANTS_HEADER).map_err(csv_error)?;
    write_constants_rows(&mut w, &k, None)?;
    w.flush()?;
    if cfg.lab.box_sweep {
        let mut w = csv_file(&dir, "constants_box_sweep.csv")?;
        let mut header = vec!["L"];
        header.extend(CONSTANTS_HEADER);
        w.write_record(header).map_err(csv_error)?;
        for factor in [1.0, 2.0, 4.0] {
            let l = std::f64::consts::TAU * factor;
            let g = TorusGrid::new(cfg.grid.dim, cfg.grid.n, l)?;
            let kb = measure_all(&exp, cfg.lab_q(), &source, &cfg.lab_settings(g))?;
            write_constants_rows(&mut w, &kb, Some(l))?;
        }
        w.flush()?;
    }
    for r in k.reports() {
        say(cli, format!("{:<20} C = {} ({} samples, {} skipped)", r.estimate.name(), r.value, r.samples, r.skipped));
    }
    say(cli, format!("contraction constant max(C_B, C_C, C_C') = {}", k.contraction_constant()));
    Ok(0)
}

fn budget(cli: &Cli, cfg: &RunConfig, args: &BudgetArgs) -> Result<i32> {
    let explicit = args.dim.is_some() || args.r.is_some() || args.p.is_some();
    let exp = ModelExponents::new(
        args.dim.unwrap_or(cfg.grid.dim),
        args.p.unwrap_or(cfg.model.p),
        args.r.unwrap_or(cfg.model.r),
    )?;
    let constant = match args.c {
        Some(c) => c,
        None => cfg.solver_params()?.estimate_constant()?,
    };
    let x_norm = if explicit { 0.0 } else { cfg.initial_datum()?.lp_norm(exp.p)? };
    let f0 = match args.f0 {
        Some(f) => f,
        None if explicit => 0.0,
        None => seed_norm(&cfg.initial_datum()?, None, exp.p, constant)?,
    };
    let choice = match args.k {
        Some(k) => BoundChoice::Pinned(k),
        None => BoundChoice::Recurrence,
    };
    let dir = output_dir(cli, cfg)?;
    let mut w = csv_file(&dir, "budget.csv")?;
    w.write_record(["d", "r", "p", "C", "bound", "K", "f0", "rho", "T_star"]).map_err(csv_error)?;
    say(cli, "d,r,p,C,bound,K,f0,rho,T_star");
    let mut code = 0;
    for factor in [1.0, 2.0, 4.0] {
        let c = factor * constant;
        let mode = if args.k.is_some() { "pinned" } else { "recurrence" };
        let row = match existence_time(f0, c, &exp, args.tmax, choice) {
            Ok(b) => vec![
                exp.dim.to_string(),
                exp.r.to_string(),
                exp.p.to_string(),
                c.to_string(),
                mode.to_string(),
                b.k_bound.to_string(),
                b.f0.to_string(),
                b.rho.to_string(),
                b.t_star.to_string(),
            ],
            Err(Error::Infeasible(msg)) => {
                if !cli.quiet {
                    eprintln!("C = {c}: {msg}");
                }
                code = 2;
                vec![
                    exp.dim.to_string(),
                    exp.r.to_string(),
                    exp.p.to_string(),
                    c.to_string(),
                    mode.to_string(),
                    String::new(),
                    f0.to_string(),
                    String::new(),
                    String::new(),
                ]
            }
            Err(e) => return Err(e),
        };
        say(cli, row.join(","));
        w.write_record(&row).map_err(csv_error)?;
    }
    w.flush()?;
    if let Some(m) = args.radius {
        let mus = if args.mu.is_empty() { vec![0.0] } else { args.mu.clone() };
        let mut w = csv_file(&dir, "random_budget.csv")?;
        w.write_record(["C", "M", "x_norm", "mu_p", "Ttilde"]).map_err(csv_error)?;
        say(cli, "C,M,x_norm,mu_p,Ttilde");
        for mu in mus {
            let t = match random_time_budget(x_norm, m, mu, constant, &exp, args.tmax) {
                Ok(t) => t.to_string(),
                Err(Error::Infeasible(msg)) => {
                    if !cli.quiet {
                        eprintln!("μ_p = {mu}: {msg}");
                    }
                    String::new()
                }
                Err(e) => return Err(e),
            };
            let row = [constant.to_string(), m.to_string(), x_norm.to_string(), mu.to_string(), t];
            say(cli, row.join(","));
            w.write_record(&row).map_err(csv_error)?;
        }
        w.flush()?;
    }
    Ok(code)
}

fn check(cli: &Cli, cfg: &RunConfig) -> Result<i32> {
    let results = run_checks(cfg);
    let failed = results.iter().filter(|r| !r.passed).count();
    for r in &results {
        let tag = if r.passed { "PASS" } else { "FAIL" };
        if !cli.quiet || !r.passed {
            println!("{tag} {} ({})", r.name, r.detail);
        }
    }
    say(cli, format!("{} of {} checks passed", results.len() - failed, results.len()));
    Ok(if failed == 0 { 0 } else { 2 })
}
