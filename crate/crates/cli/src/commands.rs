//! The subcommands. Each writes its artifacts under the output directory
//! and returns a summary; wall-clock timings live in one `timings` field.

use std::path::Path;
use std::time::Instant;

use burgers_fbsde::diagnostics::{
    bsde_residual, composition_law, determinism_check, flow_consistency, flow_regularity_mc, log_log_slope, pde_residual,
    CheckReport, DiagnosticsReport, ProbeTimes,
};
use burgers_fbsde::oracle::{solve_backward_burgers, solve_backward_burgers_on, OracleConfig};
use burgers_fbsde::picard::{horizon_bound, martingale_integrand, picard_solve, ContractionBudget, McConfig};
use burgers_fbsde::sde::{integrate_forward, sample_brownian, NoiseMode, NoiseSpec};
use burgers_fbsde::torus::{sobolev_norm, PeriodicField, SpaceTimeField};
use burgers_fbsde::{Problem, Solution};
use serde::Serialize;

use crate::config::{ExperimentConfig, SweepParameter};
use crate::error::{CliError, CliResult};
use crate::output::Artifacts;

#[derive(Debug, Clone, Serialize)]
pub struct Timings {
    pub total_seconds: f64,
    pub iteration_seconds: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SobolevNorms {
    pub alpha: f64,
    /// Whether `α > n/2 + 2`, the regularity the existence result needs.
    pub admissible: bool,
    pub terminal: f64,
    pub initial: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveReport {
    pub budget: ContractionBudget,
    pub iterations: usize,
    pub converged: bool,
    pub diff_history: Vec<f64>,
    pub diff_ratios: Vec<f64>,
    pub max_standard_error: f64,
    pub norms: SobolevNorms,
    pub warnings: Vec<String>,
    pub timings: Timings,
}

fn artifacts(config: &ExperimentConfig, out: &Path) -> CliResult<Artifacts> {
    let a = Artifacts::create(out, &config.outputs.formats)?;
    a.write_text("config.toml", &config.to_toml())?;
    Ok(a)
}

/// Budget line and the horizon warning, as printed by every solving command.
pub fn budget_lines(budget: &ContractionBudget) -> Vec<String> {
    let t0 = budget.t0.map_or("unbounded".to_string(), |t| format!("{t:.6}"));
    let mut lines = vec![format!(
        "K = {:.6}  gamma(T) = {:.6}  T0 = {t0}",
        budget.k, budget.gamma
    )];
    if !budget.is_contraction() {
        lines.push(format!(
            "warning: T = {} is not below T0 = {t0}; the contraction estimate does not apply",
            budget.horizon
        ));
    }
    lines
}

pub fn run_budget(config: &ExperimentConfig) -> CliResult<ContractionBudget> {
    let problem = config.problem()?;
    let budget = ContractionBudget::for_problem(problem.terminal(), problem.forcing())?;
    // Reject a zero-budget edge case early.
    horizon_bound(budget.k)?;
    Ok(budget)
}

fn norms(config: &ExperimentConfig, problem: &Problem, y: &SpaceTimeField<f64>) -> CliResult<SobolevNorms> {
    let alpha = config.problem.alpha;
    Ok(SobolevNorms {
        alpha,
        admissible: alpha > config.problem.n as f64 / 2.0 + 2.0,
        terminal: sobolev_norm(problem.terminal(), alpha)?,
        initial: sobolev_norm(y.initial(), alpha)?,
    })
}

fn solve(config: &ExperimentConfig, problem: &Problem) -> CliResult<(Solution, f64)> {
    let started = Instant::now();
    let solution = picard_solve(problem, &config.mc_config(), &config.picard)?;
    Ok((solution, started.elapsed().as_secs_f64()))
}

fn solve_report(config: &ExperimentConfig, problem: &Problem, solution: &Solution, seconds: f64) -> CliResult<SolveReport> {
    let norms = norms(config, problem, &solution.field)?;
    let mut warnings = solution.state.warnings.clone();
    if !norms.admissible {
        warnings.push(format!(
            "alpha = {} is not above n/2 + 2 = {}; norms are reported but the existence result does not apply",
            norms.alpha,
            config.problem.n as f64 / 2.0 + 2.0
        ));
    }
    Ok(SolveReport {
        budget: solution.budget,
        iterations: solution.state.iterations,
        converged: solution.state.converged,
        diff_history: solution.state.diff_history.clone(),
        diff_ratios: solution.state.diff_ratios(),
        max_standard_error: solution.state.standard_error.sup_norm(),
        norms,
        warnings,
        timings: Timings {
            total_seconds: seconds,
            iteration_seconds: solution.state.timings.clone(),
        },
    })
}

pub fn run_solve(config: &ExperimentConfig, out: &Path) -> CliResult<SolveReport> {
    let problem = config.problem()?;
    let a = artifacts(config, out)?;
    let (solution, seconds) = solve(config, &problem)?;
    a.write_field("field", &solution.field)?;
    a.write_field("standard_error", &solution.state.standard_error)?;
    let report = solve_report(config, &problem, &solution, seconds)?;
    a.write_json("solver_report.json", &report)?;
    if config.diagnostics.enabled {
        let suite = diagnostics_suite(config, &problem, &solution)?;
        write_diagnostics(&a, &suite)?;
    }
    Ok(report)
}

#[derive(Debug, Clone, Serialize)]
pub struct OracleReport {
    pub dt: f64,
    pub dealias: bool,
    pub steps: usize,
    /// Normalized L₂ norm of `y(s)` per output time.
    pub energy: Vec<f64>,
    pub pde_residual_max: f64,
    pub terminal_mismatch: f64,
    pub timings: Timings,
}

pub fn run_oracle(config: &ExperimentConfig, out: &Path) -> CliResult<OracleReport> {
    let problem = config.problem()?;
    let a = artifacts(config, out)?;
    let started = Instant::now();
    let y = solve_backward_burgers(&problem, &config.oracle)?;
    let seconds = started.elapsed().as_secs_f64();
    let residual = pde_residual(&y, &problem.with_steps(y.times().len() - 1)?)?;
    a.write_field("oracle_field", &y)?;
    let report = OracleReport {
        dt: config.oracle.dt,
        dealias: config.oracle.dealias,
        steps: y.times().len() - 1,
        energy: y.slices().iter().map(|s| s.l2_norm()).collect(),
        pde_residual_max: residual.max_l2,
        terminal_mismatch: residual.terminal_mismatch,
        timings: Timings {
            total_seconds: seconds,
            iteration_seconds: Vec::new(),
        },
    };
    a.write_json("oracle_report.json", &report)?;
    Ok(report)
}

#[derive(Debug, Clone, Serialize)]
pub struct CompareReport {
    pub relative_l2_at_start: f64,
    pub max_l2_error: f64,
    pub max_linf_error: f64,
    pub budget: ContractionBudget,
    pub picard_iterations: usize,
    pub converged: bool,
    pub timings: Timings,
}

fn l2_distance(a: &PeriodicField<f64>, b: &PeriodicField<f64>) -> CliResult<f64> {
    Ok(a.zip_with(b, |x, y| x - y)?.l2_norm())
}

fn compare_on(config: &ExperimentConfig, problem: &Problem) -> CliResult<(CompareReport, Vec<Vec<f64>>)> {
    let (solution, seconds) = solve(config, problem)?;
    let oracle = solve_backward_burgers_on(problem, &config.oracle, problem.times())?;
    let mut rows = Vec::with_capacity(problem.times().len());
    for (j, &t) in problem.times().iter().enumerate() {
        let (p, o) = (solution.field.slice(j), oracle.slice(j));
        rows.push(vec![t, l2_distance(p, o)?, p.sup_distance(o)?]);
    }
    let reference = oracle.initial().l2_norm();
    let err0 = l2_distance(solution.field.initial(), oracle.initial())?;
    let relative = if reference > 0.0 { err0 / reference } else { err0 };
    let report = CompareReport {
        relative_l2_at_start: relative,
        max_l2_error: rows.iter().map(|r| r[1]).fold(0.0, f64::max),
        max_linf_error: rows.iter().map(|r| r[2]).fold(0.0, f64::max),
        budget: solution.budget,
        picard_iterations: solution.state.iterations,
        converged: solution.state.converged,
        timings: Timings {
            total_seconds: seconds,
            iteration_seconds: solution.state.timings.clone(),
        },
    };
    Ok((report, rows))
}

pub fn run_compare(config: &ExperimentConfig, out: &Path) -> CliResult<CompareReport> {
    let problem = config.problem()?;
    let a = artifacts(config, out)?;
    let (report, rows) = compare_on(config, &problem)?;
    a.write_table("compare.csv", &["time", "l2_error", "linf_error"], &rows)?;
    a.write_json("compare.json", &report)?;
    Ok(report)
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceReport {
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
    pub errors: Vec<f64>,
    pub slope: Option<f64>,
    pub timings: Timings,
}

fn as_count(v: f64, key: &str) -> CliResult<usize> {
    if v.fract() != 0.0 || v < 1.0 {
        return Err(CliError::Config(format!("sweep.values: {key} must be a positive integer, got {v}")));
    }
    Ok(v as usize)
}

pub fn run_convergence(config: &ExperimentConfig, out: &Path) -> CliResult<ConvergenceReport> {
    let sweep = config
        .sweep
        .as_ref()
        .ok_or_else(|| CliError::Config("sweep: the converge command needs a [sweep] table".into()))?;
    if sweep.values.len() < 3 {
        return Err(CliError::Config(format!(
            "sweep.values: need at least 3 points, got {}",
            sweep.values.len()
        )));
    }
    let a = artifacts(config, out)?;
    let started = Instant::now();
    let mut errors = Vec::with_capacity(sweep.values.len());
    match sweep.parameter {
        SweepParameter::Paths | SweepParameter::Points => {
            for &v in &sweep.values {
                let mut c = config.clone();
                match sweep.parameter {
                    SweepParameter::Paths => c.mc.paths = as_count(v, "M")?,
                    _ => c.grid.points = as_count(v, "N")?,
                }
                c.validate()?;
                let (report, _) = compare_on(&c, &c.problem()?)?;
                errors.push(report.relative_l2_at_start);
            }
        }
        SweepParameter::OracleDt => {
            let problem = config.problem()?;
            let finest = sweep.values.iter().copied().fold(f64::INFINITY, f64::min);
            let reference_cfg = OracleConfig {
                dt: finest / 4.0,
                ..config.oracle
            };
            let reference = solve_backward_burgers_on(&problem, &reference_cfg, problem.times())?;
            for &dt in &sweep.values {
                let y = solve_backward_burgers_on(&problem, &OracleConfig { dt, ..config.oracle }, problem.times())?;
                errors.push(y.sup_distance(&reference)?);
            }
        }
    }
    let slope = log_log_slope(&sweep.values, &errors);
    let rows: Vec<Vec<f64>> = sweep.values.iter().zip(&errors).map(|(v, e)| vec![*v, *e]).collect();
    a.write_table("convergence.csv", &["value", "error"], &rows)?;
    let report = ConvergenceReport {
        parameter: sweep.parameter,
        values: sweep.values.clone(),
        errors,
        slope,
        timings: Timings {
            total_seconds: started.elapsed().as_secs_f64(),
            iteration_seconds: Vec::new(),
        },
    };
    a.write_json("convergence.json", &report)?;
    Ok(report)
}

/// Points `θ_a = 2π(k + 1/2)/count` on the diagonal.
fn diagonal_points(count: usize, dim: usize) -> Vec<f64> {
    (0..count)
        .flat_map(|k| std::iter::repeat(std::f64::consts::TAU * (k as f64 + 0.5) / count as f64).take(dim))
        .collect()
}

/// The checks of the diagnostics module on a solved problem.
pub fn diagnostics_suite(config: &ExperimentConfig, problem: &Problem, solution: &Solution) -> CliResult<DiagnosticsReport> {
    let d = &config.diagnostics;
    let y = &solution.field;
    let se = &solution.state.standard_error;
    let grid = problem.grid();
    let dim = grid.dim();
    let steps = problem.steps();
    let mc = config.mc_config();
    let mut suite = DiagnosticsReport::default();

    suite.push(CheckReport::at_most(
        "terminal_mismatch",
        y.terminal().sup_distance(problem.terminal())?,
        d.terminal_tol,
    ));

    let oracle = solve_backward_burgers(problem, &config.oracle)?;
    let residual = pde_residual(&oracle, &problem.with_steps(oracle.times().len() - 1)?)?;
    suite.push(
        CheckReport::at_most("oracle_pde_residual", residual.max_l2, 1e-5).with_meta("dt", config.oracle.dt),
    );

    // Probe on a restart slice near the middle.
    let stride = mc.restart_stride;
    let probe = ((steps / 2) / stride * stride).max(if stride <= steps { stride.min(steps) } else { steps });
    let restart = McConfig::new(d.restart_paths, mc.seed);
    suite.push(flow_consistency(
        y,
        Some(se),
        problem,
        ProbeTimes { start: 0, probe },
        &diagonal_points(d.probes, dim),
        &restart,
    )?);

    let shift = PeriodicField::from_fn(grid, dim, |x: &[f64], o: &mut [f64]| {
        for (oa, xa) in o.iter_mut().zip(x) {
            *oa = 0.3 * xa.sin();
        }
    })?;
    suite.push(composition_law(y, &shift, problem.nu(), 0, &McConfig::new(d.composition_paths, mc.seed), d.composition_tol)?);

    let noise = sample_brownian(problem.times(), 0..d.bsde_paths, dim, 1, NoiseSpec::new(mc.seed, NoiseMode::Common))?;
    let chars = integrate_forward(y, 0.0, &diagonal_points(d.bsde_starts, dim), &noise, problem.nu())?;
    let x = martingale_integrand(y, &chars)?;
    suite.extend(bsde_residual(y, problem, &chars, &noise, &x, Some(se))?.reports(d.bsde_rms_tol));

    let seeds: Vec<u64> = (0..d.determinism_seeds as u64).map(|s| mc.seed.wrapping_add(s)).collect();
    let probes = [0, grid.node_count() / 3];
    suite.push(determinism_check(problem, Some(y), 0, &probes, &d.determinism_paths, &seeds)?.report(0.3));

    let stats = flow_regularity_mc(y, problem.nu(), 0, &McConfig::new(d.regularity_paths, mc.seed), &[2.0, 4.0], 500)?;
    suite.push(stats.report(d.regularity_max_failure));
    Ok(suite)
}

fn write_diagnostics(a: &Artifacts, suite: &DiagnosticsReport) -> CliResult<()> {
    a.write_json("diagnostics.json", suite)?;
    a.write_text("diagnostics.txt", &suite.table())?;
    Ok(())
}

/// Solves, runs the suite, and fails with exit code 1 if any check fails.
pub fn run_diagnose(config: &ExperimentConfig, out: &Path) -> CliResult<DiagnosticsReport> {
    let problem = config.problem()?;
    let a = artifacts(config, out)?;
    let (solution, seconds) = solve(config, &problem)?;
    a.write_field("field", &solution.field)?;
    a.write_json("solver_report.json", &solve_report(config, &problem, &solution, seconds)?)?;
    let suite = diagnostics_suite(config, &problem, &solution)?;
    write_diagnostics(&a, &suite)?;
    Ok(suite)
}
