//! The variational core: iterate `ζ ← rearrange_along(profile, Gζ − λx₂)`.
//!
//! Each step maximizes the linearization `Σ ζψ h²` over the rearrangement
//! class. Since the energy is a convex quadratic form and the impulse is
//! linear, the objective `E − λI` never decreases along the iteration, and a
//! fixed point satisfies the co-monotonicity condition `ζ = φ∘ψ` for an
//! increasing `φ`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::field::{dist2, GridSpec, ScalarField};
use crate::greens::{sup_bound, GreenOperator};
use crate::rearrange::{
    curtail_negative_stream, is_rearrangement, rearrange_along, steiner_symmetrize,
    RearrangementProfile,
};
use crate::Result;

/// Initial placement of the profile.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SeedPlacement {
    /// Disk-like blob centered away from the wall (default).
    Disk,
    /// Thin horizontal strip.
    Strip,
    /// Caller-supplied starting field (must belong to the class).
    GivenField,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MaximizerConfig {
    pub lambda: f64,
    pub max_iters: usize,
    /// Relative objective-change threshold.
    pub tol_objective: f64,
    /// L² field-change threshold.
    pub tol_field: f64,
    /// Apply Steiner symmetrization every this many iterations (0 = never).
    pub steiner_every: usize,
    pub recenter: bool,
    /// Curtail the converged field on `{ψ ≤ 0}` before reporting.
    pub curtail: bool,
    pub seed_placement: SeedPlacement,
    /// Drives the seed-placement jitter only.
    pub rng_seed: u64,
}

impl MaximizerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0) {
            return Err(Error::Validation(format!(
                "lambda must be > 0, got {}",
                self.lambda
            )));
        }
        if self.max_iters < 1 {
            return Err(Error::Validation("max_iters must be >= 1".into()));
        }
        if !(self.tol_objective > 0.0) || !(self.tol_field > 0.0) {
            return Err(Error::Validation(
                "tol_objective and tol_field must be > 0".into(),
            ));
        }
        Ok(())
    }
}

impl Default for MaximizerConfig {
    fn default() -> Self {
        MaximizerConfig {
            lambda: 0.05,
            max_iters: 500,
            tol_objective: 1e-10,
            tol_field: 1e-9,
            steiner_every: 1,
            recenter: true,
            curtail: true,
            seed_placement: SeedPlacement::Disk,
            rng_seed: 0,
        }
    }
}

/// One row of the iteration trace.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TraceRow {
    pub iter: usize,
    pub objective: f64,
    pub delta_l2: f64,
    pub support_area: f64,
    pub best_ball_mass_r1: f64,
}

#[derive(Debug, Clone)]
pub struct MaximizerResult {
    pub zeta_star: ScalarField,
    /// Final objective value.
    pub s_lambda: f64,
    pub trace: Vec<TraceRow>,
    pub converged: bool,
    /// Whether the maximizer is a full rearrangement of the profile
    /// (drift exactly 0); expected for small λ.
    pub full_rearrangement: bool,
    pub comonotonicity_residual: f64,
    pub iterations: usize,
}

impl MaximizerResult {
    pub fn write_trace_csv<W: std::io::Write>(&self, w: &mut W) -> Result<()> {
        writeln!(w, "iter,objective,delta_l2,support_area,best_ball_mass_R1")?;
        for r in &self.trace {
            writeln!(
                w,
                "{},{},{},{},{}",
                r.iter,
                crate::field::fmt_f64(r.objective),
                crate::field::fmt_f64(r.delta_l2),
                crate::field::fmt_f64(r.support_area),
                crate::field::fmt_f64(r.best_ball_mass_r1)
            )?;
        }
        Ok(())
    }
}

/// `E − λI` computed from a precomputed co-moving stream `ψ = Gζ − λx₂`:
/// `obj = ½ Σ ζψ h² − ½ λ I`.
fn objective_from_stream(zeta: &ScalarField, psi: &ScalarField, lambda: f64) -> f64 {
    let h2 = zeta.grid().cell_area();
    let zp: f64 = zeta
        .values()
        .iter()
        .zip(psi.values())
        .map(|(z, p)| z * p)
        .sum();
    0.5 * zp * h2 - 0.5 * lambda * zeta.impulse()
}

/// Support must stay at least this many cells inside the truncation edges
/// (both x₁ sides and the top; the wall is a physical boundary, not a
/// truncation artifact).
const WINDOW_MARGIN: usize = 3;

fn check_window(zeta: &ScalarField) -> Result<()> {
    let g = zeta.grid();
    for k in zeta.support_indices() {
        let i = k % g.nx;
        let j = k / g.nx;
        if i < WINDOW_MARGIN || i >= g.nx - WINDOW_MARGIN || j >= g.ny - WINDOW_MARGIN {
            return Err(Error::WindowExhaustion(format!(
                "support reached within {WINDOW_MARGIN} cells of the window edge at cell ({i}, {j})"
            )));
        }
    }
    Ok(())
}

/// One ascent step: `ψ = Gζ − λx₂`, then the Hardy–Littlewood placement of
/// the profile along `ψ`. The objective never decreases.
pub fn ascend_once(
    op: &GreenOperator,
    zeta: &ScalarField,
    profile: &RearrangementProfile,
    lambda: f64,
) -> Result<ScalarField> {
    let psi = op.stream(zeta, lambda)?;
    let next = rearrange_along(profile, &psi, None)?;
    check_window(&next)?;
    Ok(next)
}

/// Shift `zeta` by an integer number of cells so the mass centroid's `x₁`
/// lies within `h/2` of 0. Values are moved bit-identically; the discrete
/// objective is exactly translation invariant while the support stays in
/// the window.
pub fn recenter_x1(zeta: &ScalarField) -> Result<ScalarField> {
    let g = zeta.grid();
    let mass: f64 = zeta.values().iter().sum();
    if mass <= 0.0 {
        return Err(Error::Validation("recenter_x1 requires nonzero mass".into()));
    }
    let mut cx = 0.0;
    for j in 0..g.ny {
        for i in 0..g.nx {
            cx += zeta.get(i, j) * g.x1(i);
        }
    }
    cx /= mass;
    let shift = (cx / g.h).round() as i64;
    if shift == 0 {
        return Ok(zeta.clone());
    }
    let mut out = vec![0.0; g.len()];
    for j in 0..g.ny {
        for i in 0..g.nx {
            let v = zeta.get(i, j);
            if v == 0.0 {
                continue;
            }
            let ni = i as i64 - shift;
            if ni < 0 || ni >= g.nx as i64 {
                return Err(Error::WindowExhaustion(format!(
                    "recentering by {shift} cells pushes support out of the window"
                )));
            }
            out[g.index(ni as usize, j)] = v;
        }
    }
    ScalarField::from_values(g.clone(), out)
}

/// Worst-case support-height bound for any placement of the profile inside
/// the window (impulse bounded by `‖ζ‖₁ · x2_max`).
pub fn worst_case_height_z(
    profile: &RearrangementProfile,
    grid: &GridSpec,
    lambda: f64,
) -> f64 {
    let norms = crate::field::NormReport {
        l1: profile.l1(),
        l2: profile.l2(),
        lp: 0.0,
        p: 2.0,
        impulse: profile.l1() * grid.x2_max,
        impulse_abs: profile.l1() * grid.x2_max,
        norm_x: 0.0,
        norm_y: 0.0,
    };
    sup_bound(&norms) / lambda
}

/// Initial placement of the profile for the given seed jitter.
pub fn seed_field(
    profile: &RearrangementProfile,
    grid: &GridSpec,
    cfg: &MaximizerConfig,
) -> Result<ScalarField> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let a = (profile.total_area() / std::f64::consts::PI).sqrt();
    let z = worst_case_height_z(profile, grid, cfg.lambda);
    let margin = (WINDOW_MARGIN + 1) as f64 * grid.h;
    let lo = a + margin;
    let hi = grid.x2_max - a - margin;
    if lo > hi {
        return Err(Error::WindowExhaustion(format!(
            "window height {} cannot hold a blob of radius {a}",
            grid.x2_max
        )));
    }
    let mut x2c = a.max(z / 4.0).clamp(lo, hi);
    let x1_half = 0.5 * (grid.x1_max - grid.x1_min);
    let x1_slack = (x1_half - a - margin).max(0.0);
    let mut x1c = 0.5 * (grid.x1_min + grid.x1_max);
    if cfg.rng_seed != 0 {
        x1c += rng.gen_range(-0.5..0.5) * x1_slack;
        let down = (x2c - lo).min(x2c * 0.5);
        let up = (hi - x2c).min(x2c * 0.5);
        x2c += rng.gen_range(-1.0..1.0) * 0.5 * (down + up);
        x2c = x2c.clamp(lo, hi);
    }
    let shape = ScalarField::zeros(grid.clone()).map_indexed(|i, j, _| {
        let (x1, x2) = grid.center(i, j);
        match cfg.seed_placement {
            SeedPlacement::Strip => -(x2 - x2c).powi(2) - 1e-9 * (x1 - x1c).powi(2),
            _ => -((x1 - x1c).powi(2) + (x2 - x2c).powi(2)),
        }
    });
    let seed = rearrange_along(profile, &shape, None)?;
    check_window(&seed)?;
    let _ = x1c;
    Ok(seed)
}

/// Run the ascent to convergence.
///
/// `given` supplies the start field for [`SeedPlacement::GivenField`]; it
/// must belong to the profile's class. Convergence requires both the
/// relative objective change below `tol_objective` and the L² field change
/// below `tol_field`.
pub fn maximize(
    profile: &RearrangementProfile,
    grid: &GridSpec,
    cfg: &MaximizerConfig,
    given: Option<&ScalarField>,
) -> Result<MaximizerResult> {
    cfg.validate()?;
    if profile.is_empty() {
        return Err(Error::Validation("cannot maximize over an empty profile".into()));
    }
    let op = GreenOperator::new(grid.clone());
    maximize_with(&op, profile, cfg, given)
}

/// [`maximize`] reusing a prebuilt operator (grids match by construction).
pub fn maximize_with(
    op: &GreenOperator,
    profile: &RearrangementProfile,
    cfg: &MaximizerConfig,
    given: Option<&ScalarField>,
) -> Result<MaximizerResult> {
    cfg.validate()?;
    let grid = op.grid();
    let mut zeta = match cfg.seed_placement {
        SeedPlacement::GivenField => {
            let f = given.ok_or_else(|| {
                Error::Validation("seed_placement given-field needs a start field".into())
            })?;
            if f.grid() != grid {
                return Err(Error::GridMismatch("start field grid differs".into()));
            }
            let tol = 1e-9 * (1.0 + profile.l1());
            if !is_rearrangement(f, profile, tol)?.matches {
                return Err(Error::Validation(
                    "start field is not a rearrangement of the profile".into(),
                ));
            }
            check_window(f)?;
            f.clone()
        }
        _ => seed_field(profile, grid, cfg)?,
    };

    let mut trace: Vec<TraceRow> = Vec::new();
    let mut prev_obj: Option<f64> = None;
    let mut converged = false;
    let mut iterations = 0;

    for iter in 0..cfg.max_iters {
        iterations = iter + 1;
        let psi = op.stream(&zeta, cfg.lambda)?;
        let obj = objective_from_stream(&zeta, &psi, cfg.lambda);
        if let Some(p) = prev_obj {
            if obj < p - 1e-10 * p.abs().max(1.0) {
                return Err(Error::Numeric(format!(
                    "objective decreased along the ascent: {p} -> {obj}"
                )));
            }
        }

        let mut next = rearrange_along(profile, &psi, None)?;
        if cfg.steiner_every > 0 && (iter + 1) % cfg.steiner_every == 0 {
            next = steiner_symmetrize(&next);
        }
        if cfg.recenter {
            next = recenter_x1(&next)?;
        }
        check_window(&next)?;

        let delta = dist2(&next, &zeta)?;
        trace.push(TraceRow {
            iter,
            objective: obj,
            delta_l2: delta,
            support_area: zeta.support_area(),
            best_ball_mass_r1: concentration_diagnostics(&zeta, &[1.0])?[0],
        });

        if let Some(p) = prev_obj {
            let rel = (obj - p).abs() / obj.abs().max(1.0);
            if rel < cfg.tol_objective && delta < cfg.tol_field {
                converged = true;
                break;
            }
        }
        prev_obj = Some(obj);
        zeta = next;
    }

    let mut zeta_star = zeta;
    let mut psi = op.stream(&zeta_star, cfg.lambda)?;
    let obj_before = objective_from_stream(&zeta_star, &psi, cfg.lambda);
    if cfg.curtail {
        let curtailed = curtail_negative_stream(&zeta_star, &psi)?;
        if curtailed.values() != zeta_star.values() {
            zeta_star = curtailed;
            psi = op.stream(&zeta_star, cfg.lambda)?;
            let after = objective_from_stream(&zeta_star, &psi, cfg.lambda);
            if after < obj_before - 1e-10 * obj_before.abs().max(1.0) {
                return Err(Error::Numeric(format!(
                    "curtailment decreased the objective: {obj_before} -> {after}"
                )));
            }
        }
    }
    let s_lambda = objective_from_stream(&zeta_star, &psi, cfg.lambda);
    let full_rearrangement = is_rearrangement(&zeta_star, profile, 0.0)?.matches;
    let comono = comonotonicity_residual(&zeta_star, &psi)?;

    Ok(MaximizerResult {
        zeta_star,
        s_lambda,
        trace,
        converged,
        full_rearrangement,
        comonotonicity_residual: comono,
        iterations,
    })
}

/// Violation of "ζ is an increasing function of ψ on its support": over all
/// support pairs with `ζ(a) > ζ(b)`, accumulate
/// `max(0, ψ(b) − ψ(a)) · (ζ(a) − ζ(b)) · h⁴`, normalized by `‖ζ‖₂² h²`.
/// Zero iff ζ and ψ are co-monotone modulo ties.
pub fn comonotonicity_residual(zeta: &ScalarField, psi: &ScalarField) -> Result<f64> {
    if zeta.grid() != psi.grid() {
        return Err(Error::GridMismatch(
            "comonotonicity_residual: fields on different grids".into(),
        ));
    }
    let support = zeta.support_indices();
    let zv = zeta.values();
    let pv = psi.values();
    let h2 = zeta.grid().cell_area();
    let mut acc = 0.0;
    for (n, &a) in support.iter().enumerate() {
        for &b in &support[n + 1..] {
            let (hi, lo) = if zv[a] > zv[b] {
                (a, b)
            } else if zv[b] > zv[a] {
                (b, a)
            } else {
                continue;
            };
            let gap = pv[lo] - pv[hi];
            if gap > 0.0 {
                acc += gap * (zv[hi] - zv[lo]) * h2 * h2;
            }
        }
    }
    let l2 = zeta.lp_norm(2.0);
    if l2 == 0.0 {
        return Ok(0.0);
    }
    Ok(acc / (l2 * l2 * h2))
}

/// One row of a λ-sweep table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepRow {
    pub lambda: f64,
    pub s_lambda: f64,
    pub full_rearrangement: bool,
    pub converged: bool,
    /// Max `x₂` over the maximizer's support.
    pub support_height: f64,
    pub iterations: usize,
}

/// Run [`maximize`] for each λ (positive ascending) and tabulate the
/// empirical full-rearrangement threshold.
pub fn lambda_sweep(
    profile: &RearrangementProfile,
    grid: &GridSpec,
    lambdas: &[f64],
    cfg: &MaximizerConfig,
) -> Result<Vec<SweepRow>> {
    for w in lambdas.windows(2) {
        if !(w[0] < w[1]) {
            return Err(Error::Validation("lambdas must be strictly ascending".into()));
        }
    }
    if let Some(&l) = lambdas.first() {
        if !(l > 0.0) {
            return Err(Error::Validation("lambdas must be positive".into()));
        }
    }
    let op = GreenOperator::new(grid.clone());
    let mut rows = Vec::with_capacity(lambdas.len());
    for &lambda in lambdas {
        let mut c = cfg.clone();
        c.lambda = lambda;
        let r = maximize_with(&op, profile, &c, None)?;
        let support_height = r
            .zeta_star
            .support_indices()
            .iter()
            .map(|&k| grid.x2(k / grid.nx))
            .fold(0.0_f64, f64::max);
        rows.push(SweepRow {
            lambda,
            s_lambda: r.s_lambda,
            full_rearrangement: r.full_rearrangement,
            converged: r.converged,
            support_height,
            iterations: r.iterations,
        });
    }
    Ok(rows)
}

/// For each radius `R`, the largest mass `Σ ζ h²` contained in a ball of
/// radius `R` centered at any cell center. Monotone in `R`, bounded by
/// `‖ζ‖₁`.
pub fn concentration_diagnostics(zeta: &ScalarField, radii: &[f64]) -> Result<Vec<f64>> {
    for &r in radii {
        if !(r > 0.0) {
            return Err(Error::Validation(format!("radii must be > 0, got {r}")));
        }
    }
    let g = zeta.grid();
    let h2 = g.cell_area();
    let support = zeta.support_indices();
    let zv = zeta.values();
    let mut out = Vec::with_capacity(radii.len());
    for &r in radii {
        let r2 = r * r;
        let mut best = 0.0_f64;
        // candidate centers: support cells (the optimum ball centered on a
        // grid point touches mass; empty field gives 0)
        for &c in &support {
            let (cx, cy) = g.center(c % g.nx, c / g.nx);
            let mut mass = 0.0;
            for &k in &support {
                let (x, y) = g.center(k % g.nx, k / g.nx);
                if (x - cx).powi(2) + (y - cy).powi(2) <= r2 {
                    mass += zv[k];
                }
            }
            best = best.max(mass * h2);
        }
        out.push(best);
    }
    Ok(out)
}
