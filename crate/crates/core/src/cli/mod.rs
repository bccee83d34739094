//! Command-line front end: strict JSON configs, preset dispatch, and report
//! files (JSON for reports and controls, CSV for profiles).
//!
//! Every report file has the shape `{"payload": ..., "metadata": ...}`. The
//! payload is a pure function of the resolved config; timings, the crate
//! version and output locations go into the metadata.

pub mod checks;

use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::control_space::{build_dictionary, make_grid, ControlDictionary, DictionaryStrategy, Grid, GridSpec};
use crate::error::{Error, Result};
use crate::optimizer::{solve_relaxed, solve_young, Solution, SolveOptions, SolveReport};
use crate::pde::{reduced_cost, ParabolicProblem, Trajectory};
use crate::presets::{build_preset, default_step_rule, list_presets, preset_info, resolve_params, PresetParams};
use crate::young_measures::{chatter_time, refine_time, RelaxedControl};

use checks::CheckResult;

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_NOT_CONVERGED: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "relaxctrl", version, about = "Relaxed optimal control of semilinear parabolic equations")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve the relaxed problem and write report, control and trajectories.
    Solve {
        #[arg(long)]
        config: PathBuf,
        /// Output directory; overrides `output_dir` in the config.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run the verification bundle and write verify.json.
    Verify {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Chatter the relaxed optimum over a refinement ladder.
    Chatter {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated refinement factors; overrides `chatter.levels`.
        #[arg(long, value_delimiter = ',')]
        levels: Option<Vec<usize>>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List built-in presets and their structural flags.
    Presets {
        #[arg(long)]
        json: bool,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relaxation {
    /// Probability weights over dictionary atoms per time step.
    #[default]
    Fine,
    /// Probability weights over control values per space-time cell.
    Coarse,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cells: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub extents: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nt: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
}

fn default_strategy() -> DictionaryStrategy {
    DictionaryStrategy::Constants
}

fn three() -> usize {
    3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DictionaryConfig {
    #[serde(default = "default_strategy")]
    pub strategy: DictionaryStrategy,
    /// Atom count for generated dictionaries.
    #[serde(default = "three")]
    pub atoms: usize,
    /// Support size of the coarse relaxation.
    #[serde(default = "three")]
    pub support_points: usize,
}

impl Default for DictionaryConfig {
    fn default() -> Self {
        DictionaryConfig {
            strategy: default_strategy(),
            atoms: 3,
            support_points: 3,
        }
    }
}

fn default_levels() -> Vec<usize> {
    vec![2, 4, 8, 16]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChatterConfig {
    #[serde(default = "default_levels")]
    pub levels: Vec<usize>,
}

impl Default for ChatterConfig {
    fn default() -> Self {
        ChatterConfig {
            levels: default_levels(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyConfig {
    pub gradient: bool,
    pub gradient_step: f64,
    pub gradient_tolerance: f64,
    pub mp_residual: bool,
    pub hamiltonian: bool,
    /// Required dispersion reduction under one refinement (space ×2, time ×4).
    pub hamiltonian_reduction: f64,
    pub choquet: bool,
    pub witness: bool,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            gradient: true,
            gradient_step: 1e-5,
            gradient_tolerance: 1e-6,
            mp_residual: true,
            hamiltonian: true,
            hamiltonian_reduction: 2.0,
            choquet: true,
            witness: true,
        }
    }
}

/// A config file as written.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub preset: String,
    #[serde(default)]
    pub params: PresetParams,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub relaxation: Relaxation,
    #[serde(default)]
    pub dictionary: DictionaryConfig,
    /// Defaults to the preset's step rule when absent.
    #[serde(default)]
    pub solver: Option<SolveOptions>,
    /// Seeds restarts and random dictionaries; overrides `solver.seed`.
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub chatter: ChatterConfig,
    #[serde(default)]
    pub verify: VerifyConfig,
}

/// A config with every default filled in. The output location is not part
/// of it, so it can be echoed into reproducible payloads.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResolvedConfig {
    pub preset: String,
    pub params: PresetParams,
    pub grid: GridSpec,
    pub relaxation: Relaxation,
    pub dictionary: DictionaryConfig,
    pub solver: SolveOptions,
    pub seed: u64,
    pub chatter: ChatterConfig,
    pub verify: VerifyConfig,
}

pub fn parse_config_str(text: &str) -> Result<RunConfig> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| Error::Config {
        path: e.path().to_string(),
        message: e.inner().to_string(),
    })
}

pub fn parse_config(path: &Path) -> Result<RunConfig> {
    let text = fs::read_to_string(path).map_err(|e| Error::Config {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    parse_config_str(&text)
}

fn positive(name: &'static str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::OutOfRange {
            name,
            value: v,
            reason: "must be positive and finite",
        })
    }
}

fn at_least_one(name: &'static str, v: usize) -> Result<()> {
    if v >= 1 {
        Ok(())
    } else {
        Err(Error::OutOfRange {
            name,
            value: v as f64,
            reason: "must be at least 1",
        })
    }
}

impl RunConfig {
    pub fn resolve(&self, seed_override: Option<u64>) -> Result<ResolvedConfig> {
        let info = preset_info(&self.preset)?;
        let params = resolve_params(&self.preset, &self.params)?;
        let cells = self.grid.cells.clone().unwrap_or_else(|| vec![info.default_cells]);
        let extents = self.grid.extents.clone().unwrap_or_else(|| vec![1.0; cells.len()]);
        let nt = self.grid.nt.unwrap_or(info.default_nt);
        let horizon = self.grid.horizon.unwrap_or(1.0);
        at_least_one("grid.nt", nt)?;
        for &c in &cells {
            if c < 2 {
                return Err(Error::OutOfRange {
                    name: "grid.cells",
                    value: c as f64,
                    reason: "must be at least 2",
                });
            }
        }
        positive("grid.horizon", horizon)?;
        for &e in &extents {
            positive("grid.extents", e)?;
        }
        let grid = make_grid(&cells, &extents, nt, horizon)?.spec();
        at_least_one("dictionary.atoms", self.dictionary.atoms)?;
        at_least_one("dictionary.support_points", self.dictionary.support_points)?;
        if self.chatter.levels.is_empty() {
            return Err(Error::Config {
                path: "chatter.levels".into(),
                message: "at least one level is required".into(),
            });
        }
        for &k in &self.chatter.levels {
            at_least_one("chatter.levels", k)?;
        }
        positive("verify.gradient_step", self.verify.gradient_step)?;
        positive("verify.gradient_tolerance", self.verify.gradient_tolerance)?;
        positive("verify.hamiltonian_reduction", self.verify.hamiltonian_reduction)?;
        let mut solver = match &self.solver {
            Some(s) => s.clone(),
            None => SolveOptions {
                step_rule: default_step_rule(&self.preset)?,
                ..SolveOptions::default()
            },
        };
        let seed = seed_override.or(self.seed).unwrap_or(solver.seed);
        solver.seed = seed;
        solver.validate()?;
        Ok(ResolvedConfig {
            preset: self.preset.clone(),
            params,
            grid,
            relaxation: self.relaxation,
            dictionary: self.dictionary.clone(),
            solver,
            seed,
            chatter: self.chatter.clone(),
            verify: self.verify.clone(),
        })
    }
}

impl ResolvedConfig {
    pub fn grid(&self) -> Result<Grid> {
        Grid::try_from(self.grid.clone())
    }

    pub fn problem(&self) -> Result<ParabolicProblem> {
        build_preset(&self.preset, &self.grid()?, &self.params)
    }

    pub fn dictionary_for(&self, problem: &ParabolicProblem) -> Result<Arc<ControlDictionary>> {
        Ok(Arc::new(build_dictionary(
            problem.grid(),
            problem.control_set(),
            &self.dictionary.strategy,
            self.dictionary.atoms,
            self.seed,
        )?))
    }

    pub fn solve_fine(&self, problem: &ParabolicProblem) -> Result<Solution<RelaxedControl>> {
        solve_relaxed(problem, self.dictionary_for(problem)?, &self.solver)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Metadata {
    pub version: String,
    pub wall_time_seconds: f64,
    pub output_dir: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Envelope<P> {
    pub payload: P,
    pub metadata: Metadata,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolvePayload {
    pub config: ResolvedConfig,
    pub report: SolveReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyPayload {
    pub config: ResolvedConfig,
    pub checks: Vec<CheckResult>,
    pub all_passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChatterRow {
    pub k: usize,
    pub nt: usize,
    pub chattered_cost: f64,
    pub reference_cost: f64,
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChatterPayload {
    pub config: ResolvedConfig,
    pub relaxed_cost: f64,
    pub relaxed_converged: bool,
    pub rows: Vec<ChatterRow>,
}

/// Atom index per refined time step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChatteredFile {
    pub k: usize,
    pub grid: GridSpec,
    pub atoms: Vec<usize>,
}

fn output_dir(config: &RunConfig, out: Option<PathBuf>) -> PathBuf {
    out.or_else(|| config.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("relaxctrl-out"))
}

fn prepare_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn write_envelope<P: Serialize>(dir: &Path, name: &str, payload: P, started: Instant) -> Result<()> {
    let envelope = Envelope {
        payload,
        metadata: Metadata {
            version: env!("CARGO_PKG_VERSION").to_string(),
            wall_time_seconds: started.elapsed().as_secs_f64(),
            output_dir: dir.display().to_string(),
        },
    };
    write_json(&dir.join(name), &envelope)
}

fn write_trajectory(dir: &Path, stem: &str, tr: &Trajectory) -> Result<()> {
    fs::write(dir.join(format!("{stem}.json")), tr.to_json()?)?;
    let file = fs::File::create(dir.join(format!("{stem}.csv")))?;
    tr.write_csv(BufWriter::new(file))
}

fn write_profiles(dir: &Path, grid: &Grid, report: &SolveReport) -> Result<()> {
    let mut w = csv::Writer::from_path(dir.join("profile.csv"))?;
    w.write_record(["step", "t", "mp_residual", "hamiltonian"])?;
    for (k, r) in report.residual_profile.iter().enumerate() {
        let h = report.hamiltonian.profile.get(k).copied().unwrap_or(f64::NAN);
        w.write_record([k.to_string(), grid.time(k).to_string(), r.to_string(), h.to_string()])?;
    }
    w.flush()?;
    let mut w = csv::Writer::from_path(dir.join("history.csv"))?;
    w.write_record(["iteration", "cost", "max_residual"])?;
    for (i, (c, r)) in report.cost_history.iter().zip(&report.residual_history).enumerate() {
        w.write_record([i.to_string(), c.to_string(), r.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// `solve`: returns the exit status.
pub fn run_solve(config: &RunConfig, out: Option<PathBuf>, seed: Option<u64>) -> Result<i32> {
    let started = Instant::now();
    let resolved = config.resolve(seed)?;
    let dir = output_dir(config, out);
    prepare_dir(&dir)?;
    let problem = resolved.problem()?;
    let grid = problem.grid().clone();
    let report = match resolved.relaxation {
        Relaxation::Fine => {
            let sol = resolved.solve_fine(&problem)?;
            fs::write(dir.join("control.json"), sol.control.to_json()?)?;
            write_trajectory(&dir, "state", &sol.state)?;
            write_trajectory(&dir, "adjoint", &sol.adjoint)?;
            sol.report
        }
        Relaxation::Coarse => {
            let support = problem.control_set().sample_points(resolved.dictionary.support_points)?;
            let sol = solve_young(&problem, support, &resolved.solver)?;
            fs::write(dir.join("control.json"), sol.control.to_json()?)?;
            write_trajectory(&dir, "state", &sol.state)?;
            write_trajectory(&dir, "adjoint", &sol.adjoint)?;
            sol.report
        }
    };
    write_profiles(&dir, &grid, &report)?;
    let status = if report.converged() { EXIT_OK } else { EXIT_NOT_CONVERGED };
    println!(
        "{}: {:?} after {} iterations, cost {:.9e}, max residual {:.3e}",
        resolved.preset, report.termination, report.iterations, report.final_cost, report.max_residual
    );
    write_envelope(&dir, "report.json", SolvePayload { config: resolved, report }, started)?;
    Ok(status)
}

fn check(name: &str, passed: bool, value: f64, tolerance: f64, detail: impl Serialize) -> Result<CheckResult> {
    Ok(CheckResult {
        name: name.to_string(),
        passed,
        value,
        tolerance,
        detail: serde_json::to_value(detail)?,
    })
}

/// `verify`: every enabled check, judged against its tolerance. Gradient,
/// residual and Hamiltonian checks use the fine relaxation.
pub fn verify_checks(resolved: &ResolvedConfig) -> Result<Vec<CheckResult>> {
    let v = &resolved.verify;
    let problem = resolved.problem()?;
    let mut out = Vec::new();
    if v.gradient {
        let dict = Arc::new(resolved.dictionary_for(&problem)?.with_time_steps(problem.grid().nt())?);
        let mu = checks::random_interior(dict, problem.grid().nt(), resolved.seed)?;
        let g = checks::gradient_check(&problem, &mu, v.gradient_step)?;
        out.push(check(
            "gradient",
            g.max_relative_error <= v.gradient_tolerance,
            g.max_relative_error,
            v.gradient_tolerance,
            serde_json::json!({ "step": g.step, "worst_entry": g.worst_entry }),
        )?);
    }
    let needs_solve = v.mp_residual || v.hamiltonian;
    let solution = if needs_solve { Some(resolved.solve_fine(&problem)?) } else { None };
    if let (true, Some(sol)) = (v.mp_residual, &solution) {
        let r = &sol.report;
        let identity = (r.frank_wolfe_gap - r.scaled_residual_sum).abs();
        out.push(check(
            "mp_residual",
            r.converged() && r.max_residual <= resolved.solver.mp_tolerance && identity <= 1e-9,
            r.max_residual,
            resolved.solver.mp_tolerance,
            serde_json::json!({
                "termination": r.termination,
                "frank_wolfe_gap": r.frank_wolfe_gap,
                "scaled_residual_sum": r.scaled_residual_sum,
                "identity_error": identity,
            }),
        )?);
    }
    if let (true, Some(sol)) = (v.hamiltonian, &solution) {
        let coarse = sol.report.hamiltonian.dispersion;
        if problem.is_autonomous() {
            let g = problem.grid();
            let cells: Vec<usize> = g.cells().iter().map(|c| 2 * c).collect();
            let fine_grid = make_grid(&cells, g.extents(), 4 * g.nt(), g.horizon())?;
            let fine_problem = build_preset(&resolved.preset, &fine_grid, &resolved.params)?;
            let fine = resolved.solve_fine(&fine_problem)?;
            let refined = fine.report.hamiltonian.dispersion;
            let reduction = if refined == 0.0 { f64::INFINITY } else { coarse / refined };
            out.push(check(
                "hamiltonian_constancy",
                reduction >= v.hamiltonian_reduction || coarse <= f64::EPSILON,
                reduction,
                v.hamiltonian_reduction,
                serde_json::json!({ "dispersion": [coarse, refined] }),
            )?);
        } else {
            out.push(check(
                "hamiltonian_constancy",
                true,
                coarse,
                f64::INFINITY,
                serde_json::json!({ "note": "time-dependent problem, dispersion reported only" }),
            )?);
        }
    }
    if v.choquet {
        let p = checks::choquet_panel(16, &[0.0, 0.1, 0.25], 0.0)?;
        out.push(check("choquet_panel", p.max_identity_error <= 1e-12 && p.barycenter_exact, p.max_identity_error, 1e-12, &p)?);
    }
    if v.witness {
        let w = checks::witness(16, &[0.0, 0.1, 0.25])?;
        let passed = w.linear_spread <= 1e-12
            && w.composite_slope.abs() > 1e-10
            && w.collinearity_defect <= 1e-10
            && w.oracle_error <= w.quadrature_tolerance;
        out.push(check("witness", passed, w.composite_slope, 1e-10, &w)?);
    }
    Ok(out)
}

pub fn run_verify(config: &RunConfig, out: Option<PathBuf>) -> Result<i32> {
    let started = Instant::now();
    let resolved = config.resolve(None)?;
    let dir = output_dir(config, out);
    prepare_dir(&dir)?;
    let checks = verify_checks(&resolved)?;
    for c in &checks {
        println!("{} {} value={:.3e} tol={:.3e}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.value, c.tolerance);
    }
    let all_passed = checks.iter().all(|c| c.passed);
    write_envelope(&dir, "verify.json", VerifyPayload { config: resolved, checks, all_passed }, started)?;
    Ok(if all_passed { EXIT_OK } else { EXIT_NOT_CONVERGED })
}

/// Cost of `mu` chattered `k`-fold against the cost of `mu` itself on the
/// same refined time grid.
pub fn chatter_row(problem: &ParabolicProblem, mu: &RelaxedControl, k: usize) -> Result<(ChatterRow, crate::young_measures::ChatteredControl)> {
    let chattered = chatter_time(mu, k)?;
    let refined = problem.with_grid(chattered.grid.clone(), problem.initial().to_vec())?;
    let dirac = chattered.to_relaxed(mu.dictionary())?;
    let reference = refine_time(mu, k)?;
    let chattered_cost = reduced_cost(&refined, &dirac)?;
    let reference_cost = reduced_cost(&refined, &reference)?;
    Ok((
        ChatterRow {
            k,
            nt: chattered.grid.nt(),
            chattered_cost,
            reference_cost,
            gap: (chattered_cost - reference_cost).abs(),
        },
        chattered,
    ))
}

pub fn run_chatter(config: &RunConfig, levels: Option<Vec<usize>>, out: Option<PathBuf>) -> Result<i32> {
    let started = Instant::now();
    let mut config = config.clone();
    if let Some(levels) = levels {
        config.chatter.levels = levels;
    }
    let resolved = config.resolve(None)?;
    if resolved.relaxation != Relaxation::Fine {
        return Err(Error::Config {
            path: "relaxation".into(),
            message: "chatter needs the fine relaxation".into(),
        });
    }
    let dir = output_dir(&config, out);
    prepare_dir(&dir)?;
    let problem = resolved.problem()?;
    let sol = resolved.solve_fine(&problem)?;
    let mut rows = Vec::new();
    let mut table = csv::Writer::from_path(dir.join("chatter.csv"))?;
    for &k in &resolved.chatter.levels {
        let (row, chattered) = chatter_row(&problem, &sol.control, k)?;
        table.serialize(&row)?;
        write_json(
            &dir.join(format!("chatter_k{k}.json")),
            &ChatteredFile { k, grid: chattered.grid.spec(), atoms: chattered.atoms },
        )?;
        println!("k={:<4} gap={:.6e}", row.k, row.gap);
        rows.push(row);
    }
    table.flush()?;
    let converged = sol.report.converged();
    let payload = ChatterPayload {
        config: resolved,
        relaxed_cost: sol.report.final_cost,
        relaxed_converged: converged,
        rows,
    };
    write_envelope(&dir, "chatter.json", payload, started)?;
    Ok(if converged { EXIT_OK } else { EXIT_NOT_CONVERGED })
}

pub fn run_presets(json: bool) -> Result<i32> {
    if json {
        println!("{}", serde_json::to_string_pretty(list_presets())?);
        return Ok(EXIT_OK);
    }
    println!(
        "{:<14} {:>13} {:>14} {:>10} {:>16}  description",
        "name", "semi_monotone", "differentiable", "autonomous", "orientor_convex"
    );
    let flag = |b: Option<bool>| b.map_or("n/a".to_string(), |v| v.to_string());
    for p in list_presets() {
        println!(
            "{:<14} {:>13} {:>14} {:>10} {:>16}  {}",
            p.name,
            p.semi_monotone.map_or("n/a".to_string(), |a| a.to_string()),
            p.differentiable,
            p.autonomous,
            flag(p.orientor_convex),
            p.description
        );
    }
    Ok(EXIT_OK)
}

/// Dispatches a parsed command line and maps errors to exit status 1.
pub fn run(cli: Cli) -> i32 {
    let result = match cli.command {
        Command::Solve { config, out, seed } => parse_config(&config).and_then(|c| run_solve(&c, out, seed)),
        Command::Verify { config, out } => parse_config(&config).and_then(|c| run_verify(&c, out)),
        Command::Chatter { config, levels, out } => parse_config(&config).and_then(|c| run_chatter(&c, levels, out)),
        Command::Presets { json } => run_presets(json),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_ERROR
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_fills_defaults() {
        let c = parse_config_str(r#"{"preset": "lq"}"#).unwrap();
        let r = c.resolve(None).unwrap();
        assert_eq!(r.grid.nx, vec![16]);
        assert_eq!(r.grid.nt, 20);
        assert_eq!(r.relaxation, Relaxation::Fine);
        assert_eq!(r.dictionary.atoms, 3);
        assert_eq!(r.chatter.levels, vec![2, 4, 8, 16]);
        assert_eq!(r.solver.max_iters, 20_000);
        assert_eq!(r.params.beta, Some(0.01));
        let r = parse_config_str(r#"{"preset": "composite"}"#).unwrap().resolve(None).unwrap();
        assert!(matches!(r.solver.step_rule, crate::optimizer::StepRule::Armijo { .. }));
    }

    #[test]
    fn unknown_keys_are_named() {
        let e = parse_config_str(r#"{"preset": "lq", "gridd": {"nt": 4}}"#).unwrap_err();
        assert!(e.to_string().contains("gridd"), "{e}");
        let e = parse_config_str(r#"{"preset": "lq", "grid": {"ntt": 4}}"#).unwrap_err();
        match e {
            Error::Config { path, message } => {
                assert_eq!(path, "grid.ntt");
                assert!(message.contains("ntt"));
            }
            other => panic!("{other}"),
        }
        let e = parse_config_str(r#"{"preset": "lq", "solver": {"step_rule": {"kind": "newton"}}}"#).unwrap_err();
        assert!(matches!(e, Error::Config { .. }));
    }

    #[test]
    fn range_violations_are_reported() {
        let c = parse_config_str(r#"{"preset": "lq", "grid": {"nt": 0}}"#).unwrap();
        assert!(matches!(c.resolve(None), Err(Error::OutOfRange { name: "grid.nt", .. })));
        let c = parse_config_str(r#"{"preset": "lq", "grid": {"cells": [1]}}"#).unwrap();
        assert!(c.resolve(None).is_err());
        let c = parse_config_str(r#"{"preset": "lq", "chatter": {"levels": []}}"#).unwrap();
        assert!(c.resolve(None).is_err());
        let c = parse_config_str(r#"{"preset": "nope"}"#).unwrap();
        assert!(matches!(c.resolve(None), Err(Error::UnknownPreset(_))));
        let c = parse_config_str(r#"{"preset": "lq", "params": {"beta": -1}}"#).unwrap();
        assert!(c.resolve(None).is_err());
    }

    #[test]
    fn seed_precedence() {
        let c = parse_config_str(r#"{"preset": "lq", "seed": 5, "solver": {"seed": 9}}"#).unwrap();
        assert_eq!(c.resolve(None).unwrap().solver.seed, 5);
        assert_eq!(c.resolve(Some(11)).unwrap().solver.seed, 11);
        let c = parse_config_str(r#"{"preset": "lq", "solver": {"seed": 9}}"#).unwrap();
        assert_eq!(c.resolve(None).unwrap().seed, 9);
    }

    #[test]
    fn resolved_config_round_trips() {
        let r = parse_config_str(r#"{"preset": "broken", "grid": {"cells": [6, 4], "nt": 3}}"#)
            .unwrap()
            .resolve(Some(2))
            .unwrap();
        let text = serde_json::to_string(&r).unwrap();
        let back: ResolvedConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn chatter_gap_vanishes_for_dirac_controls() {
        let r = parse_config_str(r#"{"preset": "chatter", "grid": {"cells": [8], "nt": 6}}"#).unwrap().resolve(None).unwrap();
        let p = r.problem().unwrap();
        let d = Arc::new(r.dictionary_for(&p).unwrap());
        let mu = RelaxedControl::from_atoms(d.as_ref().clone(), &[0, 2, 2, 0, 1, 2]).unwrap();
        for k in [2, 4, 8, 16] {
            let (row, _) = chatter_row(&p, &mu, k).unwrap();
            assert_eq!(row.gap, 0.0);
        }
    }
}
