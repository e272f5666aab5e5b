//! Configuration ingestion, validation, and artifact emission for the four
//! workflows: solve, evolve, stability, sweep.
//!
//! Configs are JSON. Every run directory receives a metadata JSON carrying
//! the config echo, the sup-bound constants, the worst-case support height,
//! wall-clock time and the crate version, enough to re-run exactly.
//! Identical config and seed produce byte-identical CSV artifacts.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::Error;
use crate::evolution::{write_audit_csv, EvolutionState, Evolver, EvolverConfig, Interpolation};
use crate::field::{GridSpec, ScalarField};
use crate::greens::SupBoundConstants;
use crate::maximizer::{
    lambda_sweep, maximize, worst_case_height_z, MaximizerConfig, MaximizerResult,
};
use crate::rearrange::{LadderLevel, RearrangementProfile};
use crate::stability::{run_stability, PerturbationKind, PerturbationSpec};
use crate::Result;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridBlock {
    pub x1_min: f64,
    pub x1_max: f64,
    pub x2_max: f64,
    pub nx: usize,
    pub ny: usize,
}

impl GridBlock {
    pub fn build(&self) -> Result<GridSpec> {
        GridSpec::new(self.x1_min, self.x1_max, self.x2_max, self.nx, self.ny)
    }
}

/// Either a single-level patch or a ladder CSV on disk.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProfileBlock {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub patch: Option<PatchSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ladder_file: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PatchSpec {
    pub value: f64,
    pub area: f64,
}

impl ProfileBlock {
    pub fn build(&self, grid: &GridSpec) -> Result<RearrangementProfile> {
        match (&self.patch, &self.ladder_file) {
            (Some(p), None) => {
                if !(p.value > 0.0) || !(p.area > 0.0) {
                    return Err(Error::Validation(
                        "profile.patch needs value > 0 and area > 0".into(),
                    ));
                }
                let cells = (p.area / grid.cell_area()).round().max(1.0) as usize;
                RearrangementProfile::from_levels(
                    grid.h,
                    vec![LadderLevel {
                        value: p.value,
                        cells,
                    }],
                )
            }
            (None, Some(path)) => {
                let prof = RearrangementProfile::read_csv_file(path)?;
                if (prof.h() - grid.h).abs() > 1e-9 * grid.h {
                    return Err(Error::Validation(format!(
                        "ladder file spacing {} does not match the grid spacing {}",
                        prof.h(),
                        grid.h
                    )));
                }
                Ok(prof)
            }
            _ => Err(Error::Validation(
                "profile must set exactly one of patch or ladder_file".into(),
            )),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvolutionBlock {
    pub dt: f64,
    pub t_final: f64,
    #[serde(default = "default_cfl")]
    pub cfl: f64,
    #[serde(default = "default_p")]
    pub p: f64,
    #[serde(default = "default_audit_every")]
    pub audit_every: usize,
    #[serde(default = "default_interpolation")]
    pub interpolation: Interpolation,
}

fn default_cfl() -> f64 {
    0.9
}
fn default_p() -> f64 {
    4.0
}
fn default_audit_every() -> usize {
    10
}
fn default_interpolation() -> Interpolation {
    Interpolation::CubicLimited
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StabilityBlock {
    pub kind: PerturbationKind,
    pub magnitude: f64,
    pub area_budget: f64,
    pub t_final: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub grid: GridBlock,
    pub profile: ProfileBlock,
    pub solver: MaximizerConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub evolution: Option<EvolutionBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stability: Option<StabilityBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub rng_seed: u64,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path)?;
        let cfg: RunConfig = serde_json::from_str(&text)?;
        Ok(cfg)
    }
}

/// All violated invariants, no short-circuit. Lines starting with
/// "warning:" do not block a run.
pub fn validate(cfg: &RunConfig) -> Vec<String> {
    let mut out = Vec::new();
    let grid = match cfg.grid.build() {
        Ok(g) => Some(g),
        Err(e) => {
            out.push(format!("grid: {e}"));
            None
        }
    };
    if let Err(e) = cfg.solver.validate() {
        out.push(format!("solver: {e}"));
    }
    if let Some(g) = &grid {
        match cfg.profile.build(g) {
            Err(e) => out.push(format!("profile: {e}")),
            Ok(prof) => {
                if prof.total_cells() > g.len() {
                    out.push(format!(
                        "profile: total area {} exceeds the window area {}",
                        prof.total_area(),
                        g.len() as f64 * g.cell_area()
                    ));
                }
                if cfg.solver.lambda > 0.0 {
                    let z = worst_case_height_z(&prof, g, cfg.solver.lambda);
                    if g.x2_max < z {
                        out.push(format!(
                            "warning: window height {} is below the worst-case \
                             support_height_z = {z}; the solver relies on its runtime \
                             edge guard instead",
                            g.x2_max
                        ));
                    }
                }
                if let Some(s) = &cfg.stability {
                    if s.area_budget <= prof.total_area() {
                        out.push(format!(
                            "stability: area_budget {} must exceed the profile area {}",
                            s.area_budget,
                            prof.total_area()
                        ));
                    }
                }
            }
        }
    }
    if let Some(e) = &cfg.evolution {
        if !(e.dt > 0.0) {
            out.push(format!("evolution: dt must be > 0, got {}", e.dt));
        }
        if e.t_final < 0.0 {
            out.push(format!("evolution: t_final must be >= 0, got {}", e.t_final));
        }
        if !(e.cfl > 0.0) {
            out.push(format!("evolution: cfl must be > 0, got {}", e.cfl));
        }
        if !(e.p > 2.0) {
            out.push(format!("evolution: p must be > 2, got {}", e.p));
        }
    }
    if let Some(s) = &cfg.stability {
        if !(s.magnitude > 0.0) {
            out.push(format!("stability: magnitude must be > 0, got {}", s.magnitude));
        }
        if !(s.t_final > 0.0) {
            out.push(format!("stability: t_final must be > 0, got {}", s.t_final));
        }
        if cfg.evolution.is_none() {
            out.push("stability: an evolution block is required".into());
        }
    }
    out
}

fn hard_violations(diags: &[String]) -> Vec<&String> {
    diags.iter().filter(|d| !d.starts_with("warning:")).collect()
}

fn ensure_valid(cfg: &RunConfig) -> Result<()> {
    let diags = validate(cfg);
    let hard = hard_violations(&diags);
    if !hard.is_empty() {
        let joined = hard
            .iter()
            .map(|s| s.as_str())
            .collect::<Vec<_>>()
            .join("; ");
        return Err(Error::Validation(joined));
    }
    Ok(())
}

fn write_metadata(
    out_dir: &Path,
    cfg: &RunConfig,
    subcommand: &str,
    z: f64,
    elapsed_secs: f64,
) -> Result<()> {
    let c = SupBoundConstants::standard();
    let meta = json!({
        "subcommand": subcommand,
        "config": cfg,
        "lemma9_constants": { "c_log": c.c_log, "c_imp": c.c_imp, "c_l2": c.c_l2 },
        "support_height_z_worst_case": z,
        "wall_clock_secs": elapsed_secs,
        "version": env!("CARGO_PKG_VERSION"),
    });
    let path = out_dir.join("metadata.json");
    std::fs::write(path, serde_json::to_string_pretty(&meta)?)?;
    Ok(())
}

fn solve_inner(cfg: &RunConfig) -> Result<(GridSpec, RearrangementProfile, MaximizerResult)> {
    let grid = cfg.grid.build()?;
    let profile = cfg.profile.build(&grid)?;
    let mut solver = cfg.solver.clone();
    if solver.rng_seed == 0 {
        solver.rng_seed = cfg.rng_seed;
    }
    let result = maximize(&profile, &grid, &solver, None)?;
    Ok((grid, profile, result))
}

fn write_solve_artifacts(out_dir: &Path, result: &MaximizerResult) -> Result<()> {
    result
        .zeta_star
        .dump_csv_file(&out_dir.join("zeta_star.csv"))?;
    let mut trace = std::fs::File::create(out_dir.join("trace.csv"))?;
    result.write_trace_csv(&mut trace)?;
    let summary = json!({
        "s_lambda": result.s_lambda,
        "converged": result.converged,
        "full_rearrangement": result.full_rearrangement,
        "comonotonicity_residual": result.comonotonicity_residual,
        "iterations": result.iterations,
    });
    std::fs::write(
        out_dir.join("solve.json"),
        serde_json::to_string_pretty(&summary)?,
    )?;
    Ok(())
}

pub fn run_solve(cfg: &RunConfig, out_dir: &Path) -> Result<()> {
    ensure_valid(cfg)?;
    std::fs::create_dir_all(out_dir)?;
    let start = Instant::now();
    let (grid, profile, result) = solve_inner(cfg)?;
    write_solve_artifacts(out_dir, &result)?;
    let z = worst_case_height_z(&profile, &grid, cfg.solver.lambda);
    write_metadata(out_dir, cfg, "solve", z, start.elapsed().as_secs_f64())
}

pub fn run_evolve(cfg: &RunConfig, state_path: Option<&Path>, out_dir: &Path) -> Result<()> {
    ensure_valid(cfg)?;
    let eb = cfg
        .evolution
        .as_ref()
        .ok_or_else(|| Error::Validation("evolve requires an evolution block".into()))?
        .clone();
    std::fs::create_dir_all(out_dir)?;
    let start = Instant::now();
    let grid = cfg.grid.build()?;
    let profile = cfg.profile.build(&grid)?;

    let initial = match state_path {
        Some(p) => {
            let f = ScalarField::read_csv_file(p)?;
            if f.grid() != &grid {
                return Err(Error::GridMismatch(
                    "state file grid does not match the config grid".into(),
                ));
            }
            f
        }
        None => solve_inner(cfg)?.2.zeta_star,
    };

    let evolver = Evolver::new(
        grid.clone(),
        EvolverConfig {
            cfl: eb.cfl,
            interpolation: eb.interpolation,
            ..EvolverConfig::default()
        },
    );
    let state = EvolutionState::new(initial.clone(), cfg.solver.lambda, eb.p, evolver.operator())?;
    initial.dump_csv_file(&out_dir.join("initial_state.csv"))?;
    let (final_state, audits) = evolver.evolve(state, eb.t_final, eb.dt, eb.audit_every)?;
    final_state
        .zeta
        .dump_csv_file(&out_dir.join("final_state.csv"))?;
    let mut f = std::fs::File::create(out_dir.join("audits.csv"))?;
    write_audit_csv(&audits, &mut f)?;
    let z = worst_case_height_z(&profile, &grid, cfg.solver.lambda);
    write_metadata(out_dir, cfg, "evolve", z, start.elapsed().as_secs_f64())
}

pub fn run_stability_cmd(cfg: &RunConfig, out_dir: &Path) -> Result<()> {
    ensure_valid(cfg)?;
    let eb = cfg
        .evolution
        .as_ref()
        .ok_or_else(|| Error::Validation("stability requires an evolution block".into()))?
        .clone();
    let sb = cfg
        .stability
        .as_ref()
        .ok_or_else(|| Error::Validation("stability requires a stability block".into()))?
        .clone();
    std::fs::create_dir_all(out_dir)?;
    let start = Instant::now();
    let (grid, profile, solve) = solve_inner(cfg)?;
    if !solve.converged || !solve.full_rearrangement {
        return Err(Error::Numeric(format!(
            "stability needs a converged full-rearrangement maximizer \
             (converged = {}, full_rearrangement = {})",
            solve.converged, solve.full_rearrangement
        )));
    }
    write_solve_artifacts(out_dir, &solve)?;

    let evolver = Evolver::new(
        grid.clone(),
        EvolverConfig {
            cfl: eb.cfl,
            interpolation: eb.interpolation,
            ..EvolverConfig::default()
        },
    );
    let spec = PerturbationSpec {
        kind: sb.kind,
        magnitude: sb.magnitude,
        area_budget: sb.area_budget,
        rng_seed: cfg.rng_seed,
    };
    let report = run_stability(
        &evolver,
        &solve.zeta_star,
        cfg.solver.lambda,
        eb.p,
        &spec,
        sb.t_final,
        eb.dt,
        eb.audit_every,
    )?;
    let mut f = std::fs::File::create(out_dir.join("stability.csv"))?;
    report.write_csv(&mut f)?;
    let summary = json!({
        "initial_dist2": report.initial_dist2,
        "initial_dist_y": report.initial_dist_y,
        "peak_dist2": report.peak_dist2,
        "peak_dist_y": report.peak_dist_y,
    });
    std::fs::write(
        out_dir.join("stability.json"),
        serde_json::to_string_pretty(&summary)?,
    )?;
    let z = worst_case_height_z(&profile, &grid, cfg.solver.lambda);
    write_metadata(out_dir, cfg, "stability", z, start.elapsed().as_secs_f64())
}

pub fn run_sweep(cfg: &RunConfig, lambdas: &[f64], out_dir: &Path) -> Result<()> {
    ensure_valid(cfg)?;
    std::fs::create_dir_all(out_dir)?;
    let start = Instant::now();
    let grid = cfg.grid.build()?;
    let profile = cfg.profile.build(&grid)?;
    let mut solver = cfg.solver.clone();
    if solver.rng_seed == 0 {
        solver.rng_seed = cfg.rng_seed;
    }
    let rows = lambda_sweep(&profile, &grid, lambdas, &solver)?;
    let mut f = std::fs::File::create(out_dir.join("sweep.csv"))?;
    {
        use std::io::Write;
        writeln!(
            f,
            "lambda,s_lambda,full_rearrangement,converged,support_height,iterations"
        )?;
        for r in &rows {
            writeln!(
                f,
                "{},{},{},{},{},{}",
                crate::field::fmt_f64(r.lambda),
                crate::field::fmt_f64(r.s_lambda),
                r.full_rearrangement,
                r.converged,
                crate::field::fmt_f64(r.support_height),
                r.iterations
            )?;
        }
    }
    let z = worst_case_height_z(&profile, &grid, cfg.solver.lambda);
    write_metadata(out_dir, cfg, "sweep", z, start.elapsed().as_secs_f64())
}

/// Default output directory: `./runs/<unix-timestamp>`.
pub fn default_out_dir() -> PathBuf {
    let ts = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    PathBuf::from("runs").join(ts.to_string())
}
