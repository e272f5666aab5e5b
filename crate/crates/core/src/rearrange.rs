//! Constraint machinery for the variational problem: decreasing
//! rearrangements as finite ladders, class membership tests, the monotone
//! transport placement used by the ascent step, row-wise Steiner
//! symmetrization and curtailment.
//!
//! A discrete rearrangement class is an exact finite object, the multiset of
//! positive cell values. The membership tolerance only absorbs
//! transport-scheme drift.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::error::Error;
use crate::field::{fmt_f64, GridSpec, ScalarField};
use crate::Result;

/// One ladder rung: a positive value held on `cells` grid cells.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LadderLevel {
    pub value: f64,
    pub cells: usize,
}

/// The decreasing rearrangement of a nonnegative field as a finite
/// (value, area) ladder. Values strictly decreasing, all positive; areas are
/// integer multiples of `h²`. The zero level is excluded.
#[derive(Debug, Clone, PartialEq)]
pub struct RearrangementProfile {
    ladder: Vec<LadderLevel>,
    h: f64,
}

impl RearrangementProfile {
    pub fn from_levels(h: f64, levels: Vec<LadderLevel>) -> Result<Self> {
        if !(h > 0.0) {
            return Err(Error::Validation(format!("profile spacing must be > 0, got {h}")));
        }
        for w in levels.windows(2) {
            if !(w[0].value > w[1].value) {
                return Err(Error::Validation(
                    "ladder values must be strictly decreasing".into(),
                ));
            }
        }
        for l in &levels {
            if !(l.value > 0.0) || l.cells == 0 {
                return Err(Error::Validation(
                    "ladder levels need value > 0 and a positive cell count".into(),
                ));
            }
        }
        Ok(RearrangementProfile { ladder: levels, h })
    }

    pub fn ladder(&self) -> &[LadderLevel] {
        &self.ladder
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn is_empty(&self) -> bool {
        self.ladder.is_empty()
    }

    pub fn total_cells(&self) -> usize {
        self.ladder.iter().map(|l| l.cells).sum()
    }

    pub fn total_area(&self) -> f64 {
        self.total_cells() as f64 * self.h * self.h
    }

    pub fn l1(&self) -> f64 {
        self.ladder
            .iter()
            .map(|l| l.value * l.cells as f64)
            .sum::<f64>()
            * self.h
            * self.h
    }

    pub fn l2(&self) -> f64 {
        (self
            .ladder
            .iter()
            .map(|l| l.value * l.value * l.cells as f64)
            .sum::<f64>()
            * self.h
            * self.h)
            .sqrt()
    }

    pub fn max_value(&self) -> f64 {
        self.ladder.first().map(|l| l.value).unwrap_or(0.0)
    }

    /// Ladder expanded to a descending list of cell values, zero-padded to
    /// length `n`.
    pub fn expand_sorted(&self, n: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity(n);
        for l in &self.ladder {
            for _ in 0..l.cells {
                out.push(l.value);
            }
        }
        assert!(out.len() <= n, "profile has more cells than the target grid");
        out.resize(n, 0.0);
        out
    }

    pub fn write_csv<W: Write>(&self, w: &mut W) -> Result<()> {
        writeln!(w, "# profile v1, h={}", fmt_f64(self.h))?;
        let h2 = self.h * self.h;
        for l in &self.ladder {
            writeln!(w, "{},{}", fmt_f64(l.value), fmt_f64(l.cells as f64 * h2))?;
        }
        Ok(())
    }

    pub fn write_csv_file(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        self.write_csv(&mut f)
    }

    pub fn read_csv<R: std::io::Read>(r: R) -> Result<Self> {
        let reader = BufReader::new(r);
        let mut lines = reader.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Validation("empty profile file".into()))??;
        let h = header
            .strip_prefix("# profile v1, h=")
            .ok_or_else(|| Error::Validation(format!("bad profile header: {header}")))?
            .trim()
            .parse::<f64>()
            .map_err(|e| Error::Validation(format!("bad profile h: {e}")))?;
        let h2 = h * h;
        let mut levels = Vec::new();
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let (v, a) = line
                .split_once(',')
                .ok_or_else(|| Error::Validation(format!("bad profile line: {line}")))?;
            let value = v
                .trim()
                .parse::<f64>()
                .map_err(|e| Error::Validation(format!("bad profile value: {e}")))?;
            let area = a
                .trim()
                .parse::<f64>()
                .map_err(|e| Error::Validation(format!("bad profile area: {e}")))?;
            let cells_f = area / h2;
            let cells = cells_f.round() as usize;
            if cells == 0 || (cells_f - cells as f64).abs() > 1e-6 * cells_f.max(1.0) {
                return Err(Error::Validation(format!(
                    "profile area {area} is not a positive multiple of h² = {h2}"
                )));
            }
            levels.push(LadderLevel { value, cells });
        }
        RearrangementProfile::from_levels(h, levels)
    }

    pub fn read_csv_file(path: &Path) -> Result<Self> {
        Self::read_csv(std::fs::File::open(path)?)
    }
}

/// Ladder of the distinct positive values of `f` with their cell areas,
/// descending. Exact: values are grouped by bit equality.
pub fn decreasing_rearrangement(f: &ScalarField) -> Result<RearrangementProfile> {
    if !f.is_nonnegative() {
        return Err(Error::NegativeValues(
            "decreasing_rearrangement requires a nonnegative field".into(),
        ));
    }
    let mut vals: Vec<f64> = f.values().iter().copied().filter(|&v| v > 0.0).collect();
    vals.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut levels: Vec<LadderLevel> = Vec::new();
    for v in vals {
        match levels.last_mut() {
            Some(l) if l.value == v => l.cells += 1,
            _ => levels.push(LadderLevel { value: v, cells: 1 }),
        }
    }
    RearrangementProfile::from_levels(f.grid().h, levels)
}

/// Class-membership report: the L¹ distance between decreasing
/// rearrangements and the per-level area drift of the distribution function.
#[derive(Debug, Clone)]
pub struct RearrangementDrift {
    /// `Σ |f↓ − profile↓| h²` over cells (equals area mismatch times value
    /// on exact ladders).
    pub drift: f64,
    /// For each ladder level: (value, |area of {f above the level's
    /// midpoint threshold} − cumulative profile area|).
    pub per_level: Vec<(f64, f64)>,
    pub matches: bool,
}

/// True (with drift report) iff `f` is a rearrangement of the profile
/// within `tol` in the ladder drift metric.
pub fn is_rearrangement(
    f: &ScalarField,
    profile: &RearrangementProfile,
    tol: f64,
) -> Result<RearrangementDrift> {
    if !f.is_nonnegative() {
        return Err(Error::NegativeValues(
            "is_rearrangement requires a nonnegative field".into(),
        ));
    }
    let n = f.grid().len();
    let h2 = f.grid().cell_area();
    let expanded = profile.expand_sorted(n);
    let mut sorted: Vec<f64> = f.values().to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let drift: f64 = sorted
        .iter()
        .zip(&expanded)
        .map(|(a, b)| (a - b).abs())
        .sum::<f64>()
        * h2;

    // per-level distribution comparison at midpoint thresholds, stable
    // against tiny value perturbations
    let mut per_level = Vec::with_capacity(profile.ladder.len());
    let mut cum_cells = 0usize;
    for (k, l) in profile.ladder.iter().enumerate() {
        cum_cells += l.cells;
        let next = profile.ladder.get(k + 1).map(|m| m.value).unwrap_or(0.0);
        let threshold = 0.5 * (l.value + next);
        let count_f = f.values().iter().filter(|&&v| v > threshold).count();
        let mismatch = (count_f as f64 - cum_cells as f64).abs() * h2;
        per_level.push((l.value, mismatch));
    }
    Ok(RearrangementDrift {
        drift,
        per_level,
        matches: drift <= tol,
    })
}

/// True iff the positive values of `f` form a sub-multiset of the profile's
/// ladder (the discrete `R₊` membership test), matching values within
/// relative `value_tol`.
pub fn is_restriction(f: &ScalarField, profile: &RearrangementProfile, value_tol: f64) -> bool {
    if !f.is_nonnegative() {
        return false;
    }
    let mut remaining: Vec<(f64, usize)> =
        profile.ladder.iter().map(|l| (l.value, l.cells)).collect();
    for &v in f.values().iter().filter(|&&v| v > 0.0) {
        let slot = remaining
            .iter_mut()
            .find(|(lv, c)| *c > 0 && (v - *lv).abs() <= value_tol * lv.abs().max(1.0));
        match slot {
            Some((_, c)) => *c -= 1,
            None => return false,
        }
    }
    true
}

/// Places the ladder's values on unmasked cells in descending order of `ψ`
/// (largest value on largest `ψ`, ties by ascending linear cell index).
/// Maximizes `Σ ζψ h²` over all fields equimeasurable with the profile on
/// the unmasked region.
pub fn rearrange_along(
    profile: &RearrangementProfile,
    psi: &ScalarField,
    mask: Option<&dyn Fn(usize, usize) -> bool>,
) -> Result<ScalarField> {
    let grid = psi.grid();
    let mut order: Vec<usize> = match mask {
        None => (0..grid.len()).collect(),
        Some(pred) => (0..grid.len())
            .filter(|&k| pred(k % grid.nx, k / grid.nx))
            .collect(),
    };
    let needed = profile.total_cells();
    if order.len() < needed {
        return Err(Error::InsufficientArea {
            needed,
            available: order.len(),
        });
    }
    let pv = psi.values();
    order.sort_by(|&a, &b| pv[b].partial_cmp(&pv[a]).unwrap().then(a.cmp(&b)));
    let mut out = vec![0.0; grid.len()];
    let mut slot = order.into_iter();
    for l in &profile.ladder {
        for _ in 0..l.cells {
            out[slot.next().expect("area checked above")] = l.value;
        }
    }
    ScalarField::from_values(grid.clone(), out)
}

/// Row-wise symmetric-decreasing rearrangement about `x₁ = 0`: in each row
/// cells are ordered by `|x₁|` ascending, ties `x₁ > 0` first, and the row's
/// values are placed on them descending. Row multisets and the impulse are
/// preserved exactly; the energy never decreases.
pub fn steiner_symmetrize(f: &ScalarField) -> ScalarField {
    let grid = f.grid();
    let order = steiner_order(grid);
    let mut out = vec![0.0; grid.len()];
    for j in 0..grid.ny {
        let row = &f.values()[j * grid.nx..(j + 1) * grid.nx];
        let mut vals: Vec<f64> = row.to_vec();
        vals.sort_by(|a, b| b.partial_cmp(a).unwrap());
        for (v, &i) in vals.into_iter().zip(&order) {
            out[j * grid.nx + i] = v;
        }
    }
    ScalarField::from_values(grid.clone(), out).expect("sized")
}

/// Column indices ordered by |x₁| ascending, ties x₁ > 0 first.
fn steiner_order(grid: &GridSpec) -> Vec<usize> {
    let mut order: Vec<usize> = (0..grid.nx).collect();
    order.sort_by(|&a, &b| {
        let (xa, xb) = (grid.x1(a), grid.x1(b));
        xa.abs()
            .partial_cmp(&xb.abs())
            .unwrap()
            .then(xb.partial_cmp(&xa).unwrap())
    });
    order
}

/// Zeroes `zeta` wherever the supplied co-moving stream `ψ = Gζ − λx₂` is
/// nonpositive. The objective never decreases under this step.
pub fn curtail_negative_stream(zeta: &ScalarField, psi_total: &ScalarField) -> Result<ScalarField> {
    if zeta.grid() != psi_total.grid() {
        return Err(Error::GridMismatch(
            "curtail_negative_stream: zeta and psi on different grids".into(),
        ));
    }
    Ok(zeta.map_indexed(|i, j, v| {
        if psi_total.get(i, j) <= 0.0 {
            0.0
        } else {
            v
        }
    }))
}
