//! Uniform half-plane grids, scalar fields and the elementary functionals:
//! mass, impulse, `L^p` norms, the `X` and `Y` norms and distances.
//!
//! All quadrature is midpoint (cell-center) quadrature: a field is modelled
//! as piecewise constant on cells of area `h²`, which keeps rearrangement
//! classes exactly finite. Fields are immutable values; operations return
//! new fields. Storage is row-major with `j` (the `x₂` index) outer, `i`
//! (the `x₁` index) inner, and all iteration orders are fixed.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::Result;

const REL_TOL: f64 = 1e-12;

/// Truncated computational window inside the half-plane `Π = {x₂ > 0}`.
///
/// The window is `[x1_min, x1_max] × (0, x2_max]` with uniform spacing `h`
/// in both directions; cell centers sit at `(x1_min + (i+½)h, (j+½)h)`, so
/// every cell center has `x₂ > 0` strictly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub x1_min: f64,
    pub x1_max: f64,
    pub x2_max: f64,
    pub nx: usize,
    pub ny: usize,
    pub h: f64,
}

impl GridSpec {
    /// Builds a grid, checking that the window is consistent with a uniform
    /// spacing: `x1_max − x1_min = nx·h` and `x2_max = ny·h` to 1e−12 relative.
    pub fn new(x1_min: f64, x1_max: f64, x2_max: f64, nx: usize, ny: usize) -> Result<Self> {
        if nx < 1 || ny < 1 {
            return Err(Error::Validation(format!(
                "grid: nx and ny must be >= 1 (got nx={nx}, ny={ny})"
            )));
        }
        if !(x1_max > x1_min) {
            return Err(Error::Validation(format!(
                "grid: x1_max ({x1_max}) must exceed x1_min ({x1_min})"
            )));
        }
        if !(x2_max > 0.0) {
            return Err(Error::Validation(format!(
                "grid: x2_max ({x2_max}) must be positive"
            )));
        }
        let h = (x1_max - x1_min) / nx as f64;
        let hy = x2_max / ny as f64;
        if (h - hy).abs() > REL_TOL * h.max(hy) {
            return Err(Error::Validation(format!(
                "grid: spacing must be uniform, got h_x={h} vs h_y={hy}"
            )));
        }
        Ok(GridSpec { x1_min, x1_max, x2_max, nx, ny, h })
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cell_area(&self) -> f64 {
        self.h * self.h
    }

    /// Linear index of cell `(i, j)`; row-major, `j` outer.
    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    /// Cell-center coordinates of cell `(i, j)`.
    #[inline]
    pub fn center(&self, i: usize, j: usize) -> (f64, f64) {
        (
            self.x1_min + (i as f64 + 0.5) * self.h,
            (j as f64 + 0.5) * self.h,
        )
    }

    /// `x₂` coordinate of row `j`.
    #[inline]
    pub fn x2(&self, j: usize) -> f64 {
        (j as f64 + 0.5) * self.h
    }

    /// `x₁` coordinate of column `i`.
    #[inline]
    pub fn x1(&self, i: usize) -> f64 {
        self.x1_min + (i as f64 + 0.5) * self.h
    }
}

/// Vorticity or stream values sampled at cell centers of a [`GridSpec`].
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: GridSpec,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(grid: GridSpec) -> Self {
        let n = grid.len();
        ScalarField { grid, values: vec![0.0; n] }
    }

    pub fn from_values(grid: GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Validation(format!(
                "field: expected {} values, got {}",
                grid.len(),
                values.len()
            )));
        }
        Ok(ScalarField { grid, values })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.index(i, j)]
    }

    /// Builds a new field by mapping over (i, j, value) in the fixed order.
    pub fn map_indexed<F: FnMut(usize, usize, f64) -> f64>(&self, mut f: F) -> ScalarField {
        let mut values = Vec::with_capacity(self.values.len());
        for j in 0..self.grid.ny {
            for i in 0..self.grid.nx {
                values.push(f(i, j, self.values[self.grid.index(i, j)]));
            }
        }
        ScalarField { grid: self.grid.clone(), values }
    }

    /// Checks the vorticity-class constraint `ζ ≥ 0`.
    pub fn is_nonnegative(&self) -> bool {
        self.values.iter().all(|&v| v >= 0.0)
    }

    /// Midpoint quadrature of `I(ξ) = ∫ ξ x₂ dx`, the impulse of linear
    /// momentum in the `x₁`-direction.
    pub fn impulse(&self) -> f64 {
        let h2 = self.grid.cell_area();
        let mut acc = 0.0;
        for j in 0..self.grid.ny {
            let x2 = self.grid.x2(j);
            let row = &self.values[j * self.grid.nx..(j + 1) * self.grid.nx];
            let row_sum: f64 = row.iter().sum();
            acc += row_sum * x2;
        }
        acc * h2
    }

    /// Impulse of `|ξ|`, used by the `X` norm.
    pub fn impulse_abs(&self) -> f64 {
        let h2 = self.grid.cell_area();
        let mut acc = 0.0;
        for j in 0..self.grid.ny {
            let x2 = self.grid.x2(j);
            let row = &self.values[j * self.grid.nx..(j + 1) * self.grid.nx];
            let row_sum: f64 = row.iter().map(|v| v.abs()).sum();
            acc += row_sum * x2;
        }
        acc * h2
    }

    /// `(Σ |f|^p h²)^{1/p}`; for `p = ∞` the max of `|f|`.
    pub fn lp_norm(&self, p: f64) -> f64 {
        assert!(p >= 1.0, "lp_norm requires p >= 1, got {p}");
        if p.is_infinite() {
            return self.values.iter().fold(0.0_f64, |m, &v| m.max(v.abs()));
        }
        let h2 = self.grid.cell_area();
        if p == 1.0 {
            let s: f64 = self.values.iter().map(|v| v.abs()).sum();
            return s * h2;
        }
        if p == 2.0 {
            let s: f64 = self.values.iter().map(|v| v * v).sum();
            return (s * h2).sqrt();
        }
        let s: f64 = self.values.iter().map(|v| v.abs().powf(p)).sum();
        (s * h2).powf(1.0 / p)
    }

    /// All functionals the run tracks, evaluated consistently.
    pub fn norms(&self, p: f64) -> NormReport {
        let l1 = self.lp_norm(1.0);
        let l2 = self.lp_norm(2.0);
        let lp = self.lp_norm(p);
        let impulse = self.impulse();
        let impulse_abs = self.impulse_abs();
        NormReport {
            l1,
            l2,
            lp,
            p,
            impulse,
            impulse_abs,
            norm_x: l2 + impulse_abs,
            norm_y: l2 + impulse.abs(),
        }
    }

    /// Support cells (strictly nonzero values) with their linear indices.
    pub fn support_indices(&self) -> Vec<usize> {
        self.values
            .iter()
            .enumerate()
            .filter(|(_, &v)| v != 0.0)
            .map(|(k, _)| k)
            .collect()
    }

    /// Area of the support, `#{nonzero cells}·h²`.
    pub fn support_area(&self) -> f64 {
        let n = self.values.iter().filter(|&&v| v != 0.0).count();
        n as f64 * self.grid.cell_area()
    }

    /// Writes the grid dump format: a header line
    /// `# vortex-field v1, nx=<..>, ny=<..>, x1_min=<..>, h=<..>` followed by
    /// `ny` lines of `nx` comma-separated values, row `j = 0` (nearest the
    /// wall) first. Floats carry 17 significant digits.
    pub fn dump_csv<W: Write>(&self, w: &mut W) -> Result<()> {
        writeln!(
            w,
            "# vortex-field v1, nx={}, ny={}, x1_min={}, h={}",
            self.grid.nx,
            self.grid.ny,
            fmt_f64(self.grid.x1_min),
            fmt_f64(self.grid.h)
        )?;
        for j in 0..self.grid.ny {
            let row = &self.values[j * self.grid.nx..(j + 1) * self.grid.nx];
            let line: Vec<String> = row.iter().map(|&v| fmt_f64(v)).collect();
            writeln!(w, "{}", line.join(","))?;
        }
        Ok(())
    }

    pub fn dump_csv_file(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        self.dump_csv(&mut f)
    }

    /// Parses the grid dump format produced by [`ScalarField::dump_csv`].
    pub fn read_csv<R: std::io::Read>(r: R) -> Result<Self> {
        let mut lines = BufReader::new(r).lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Validation("field csv: empty file".into()))??;
        let header = header
            .strip_prefix("# vortex-field v1,")
            .ok_or_else(|| Error::Validation("field csv: missing 'vortex-field v1' header".into()))?;
        let mut nx = None;
        let mut ny = None;
        let mut x1_min = None;
        let mut h = None;
        for part in header.split(',') {
            let (k, v) = part
                .split_once('=')
                .ok_or_else(|| Error::Validation(format!("field csv: bad header item '{part}'")))?;
            match k.trim() {
                "nx" => nx = Some(parse_usize(v)?),
                "ny" => ny = Some(parse_usize(v)?),
                "x1_min" => x1_min = Some(parse_f64(v)?),
                "h" => h = Some(parse_f64(v)?),
                other => {
                    return Err(Error::Validation(format!("field csv: unknown header key '{other}'")))
                }
            }
        }
        let (nx, ny, x1_min, h) = match (nx, ny, x1_min, h) {
            (Some(a), Some(b), Some(c), Some(d)) => (a, b, c, d),
            _ => return Err(Error::Validation("field csv: incomplete header".into())),
        };
        let grid = GridSpec::new(x1_min, x1_min + nx as f64 * h, ny as f64 * h, nx, ny)?;
        let mut values = Vec::with_capacity(nx * ny);
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            for item in line.split(',') {
                values.push(parse_f64(item)?);
            }
        }
        ScalarField::from_values(grid, values)
    }

    pub fn read_csv_file(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path)?;
        Self::read_csv(f)
    }
}

fn parse_usize(s: &str) -> Result<usize> {
    s.trim()
        .parse()
        .map_err(|_| Error::Validation(format!("cannot parse integer '{s}'")))
}

fn parse_f64(s: &str) -> Result<f64> {
    s.trim()
        .parse()
        .map_err(|_| Error::Validation(format!("cannot parse float '{s}'")))
}

/// 17-significant-digit float formatting used by every CSV artifact.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Mass, impulse and norm summary of one field.
///
/// Identities: `norm_x = l2 + I(|f|)` and `norm_y = l2 + |I(f)|`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormReport {
    pub l1: f64,
    pub l2: f64,
    pub lp: f64,
    pub p: f64,
    pub impulse: f64,
    pub impulse_abs: f64,
    pub norm_x: f64,
    pub norm_y: f64,
}

fn check_same_grid(f: &ScalarField, g: &ScalarField) -> Result<()> {
    if f.grid != g.grid {
        return Err(Error::GridMismatch(format!(
            "fields live on different grids ({}x{} vs {}x{})",
            f.grid.nx, f.grid.ny, g.grid.nx, g.grid.ny
        )));
    }
    Ok(())
}

/// `‖f − g‖₂`.
pub fn dist2(f: &ScalarField, g: &ScalarField) -> Result<f64> {
    check_same_grid(f, g)?;
    let h2 = f.grid.cell_area();
    let s: f64 = f
        .values
        .iter()
        .zip(&g.values)
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok((s * h2).sqrt())
}

/// `‖f − g‖₂ + |I(f) − I(g)|`, the metric used by the Y-variant stability
/// experiments.
pub fn dist_y(f: &ScalarField, g: &ScalarField) -> Result<f64> {
    Ok(dist2(f, g)? + (f.impulse() - g.impulse()).abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn grid(nx: usize, ny: usize, h: f64) -> GridSpec {
        GridSpec::new(-(nx as f64) * h / 2.0, nx as f64 * h / 2.0, ny as f64 * h, nx, ny).unwrap()
    }

    fn random_field(g: &GridSpec, rng: &mut ChaCha8Rng) -> ScalarField {
        let values: Vec<f64> = (0..g.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        ScalarField::from_values(g.clone(), values).unwrap()
    }

    #[test]
    fn grid_rejects_nonuniform_spacing() {
        assert!(GridSpec::new(0.0, 1.0, 1.5, 10, 10).is_err());
        assert!(GridSpec::new(0.0, 1.0, 1.0, 0, 10).is_err());
    }

    #[test]
    fn impulse_zero_field() {
        let g = grid(8, 8, 0.125);
        assert_eq!(ScalarField::zeros(g).impulse(), 0.0);
    }

    #[test]
    fn impulse_unit_box_analytic() {
        // f ≡ 1 on [0,1]×[1,2]: ∫∫ x₂ = 3/2. Midpoint quadrature is exact in
        // x₁ and second order in x₂; with cell boundaries aligned to the box
        // it is exact.
        let n = 128;
        let g = GridSpec::new(-2.0, 2.0, 4.0, 4 * n, 4 * n).unwrap();
        let f = ScalarField::zeros(g).map_indexed(|i, j, _| {
            let (x1, x2) = (
                -2.0 + (i as f64 + 0.5) * 4.0 / (4 * n) as f64,
                (j as f64 + 0.5) * 4.0 / (4 * n) as f64,
            );
            if (0.0..1.0).contains(&x1) && (1.0..2.0).contains(&x2) {
                1.0
            } else {
                0.0
            }
        });
        assert!((f.impulse() - 1.5).abs() < 1e-10);
    }

    #[test]
    fn impulse_single_cell() {
        let g = grid(8, 8, 0.25);
        let mut v = vec![0.0; g.len()];
        v[g.index(3, 5)] = 2.5;
        let f = ScalarField::from_values(g.clone(), v).unwrap();
        let b = g.x2(5);
        assert!((f.impulse() - 2.5 * b * g.cell_area()).abs() < 1e-15);
    }

    #[test]
    fn lp_norm_examples() {
        let g = grid(4, 4, 0.5);
        let z = ScalarField::zeros(g.clone());
        assert_eq!(z.lp_norm(1.0), 0.0);
        assert_eq!(z.lp_norm(f64::INFINITY), 0.0);

        let mut v = vec![0.0; g.len()];
        v[3] = 2.0;
        let f = ScalarField::from_values(g.clone(), v).unwrap();
        assert!((f.lp_norm(2.0) - 2.0 * g.h).abs() < 1e-15);

        let mut v = vec![0.0; g.len()];
        v[0] = 3.0;
        v[7] = 4.0;
        let f = ScalarField::from_values(g.clone(), v).unwrap();
        // hand sum: (9 + 16) h² = 25 h²
        assert!((f.lp_norm(2.0) - 5.0 * g.h).abs() < 1e-15);
        assert!((f.lp_norm(f64::INFINITY) - 4.0).abs() < 1e-15);
    }

    #[test]
    fn norm_report_identities_random() {
        let g = grid(12, 9, 0.1);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..1000 {
            let f = random_field(&g, &mut rng);
            let n = f.norms(4.0);
            assert!((n.norm_x - (n.l2 + n.impulse_abs)).abs() <= 1e-12 * n.norm_x.max(1.0));
            assert!((n.norm_y - (n.l2 + n.impulse.abs())).abs() <= 1e-12 * n.norm_y.max(1.0));
            assert!(n.impulse_abs >= n.impulse.abs() - 1e-15);
        }
    }

    #[test]
    fn norms_nonnegative_field_x_equals_y() {
        let g = grid(6, 6, 0.2);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let f = random_field(&g, &mut rng).map_indexed(|_, _, v| v.abs());
        let n = f.norms(4.0);
        assert!((n.norm_x - n.norm_y).abs() < 1e-14);
    }

    #[test]
    fn norm_report_negative_single_cell() {
        // one cell value −1 at (i, j): norm_x = norm_y = h + x₂ h²
        let g = grid(8, 8, 0.25);
        let mut v = vec![0.0; g.len()];
        v[g.index(0, 2)] = -1.0;
        let f = ScalarField::from_values(g.clone(), v).unwrap();
        let b = g.x2(2);
        let n = f.norms(4.0);
        assert!((n.norm_y - (g.h + b * g.cell_area())).abs() < 1e-15);
        assert!((n.norm_x - (g.h + b * g.cell_area())).abs() < 1e-15);
    }

    #[test]
    fn impulse_linearity_random() {
        let g = grid(10, 7, 0.15);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let f = random_field(&g, &mut rng);
            let gg = random_field(&g, &mut rng);
            let (a, b): (f64, f64) = (rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
            let comb = f.map_indexed(|i, j, v| a * v + b * gg.get(i, j));
            let expect = a * f.impulse() + b * gg.impulse();
            assert!((comb.impulse() - expect).abs() <= 1e-12 * expect.abs().max(1.0));
        }
    }

    #[test]
    fn dist2_metric_properties() {
        let g = grid(6, 5, 0.3);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let f = random_field(&g, &mut rng);
            let gg = random_field(&g, &mut rng);
            let hh = random_field(&g, &mut rng);
            assert_eq!(dist2(&f, &f).unwrap(), 0.0);
            let d_fg = dist2(&f, &gg).unwrap();
            assert!((d_fg - dist2(&gg, &f).unwrap()).abs() < 1e-15);
            // triangle inequality
            assert!(d_fg <= dist2(&f, &hh).unwrap() + dist2(&hh, &gg).unwrap() + 1e-13);
        }
    }

    #[test]
    fn dist_y_single_cell() {
        // f − g with one cell value 1 at height b → dist_y = h + b·h²
        let h = 0.5;
        let g = GridSpec::new(-1.0, 1.0, 4.0, 4, 8).unwrap();
        let f0 = ScalarField::zeros(g.clone());
        let mut v = vec![0.0; g.len()];
        let jj = 3;
        v[g.index(1, jj)] = 1.0;
        let f1 = ScalarField::from_values(g.clone(), v).unwrap();
        let b = g.x2(jj);
        let d = dist_y(&f1, &f0).unwrap();
        assert!((d - (h + b * h * h)).abs() < 1e-15);
    }

    #[test]
    fn dist_errors_on_grid_mismatch() {
        let f = ScalarField::zeros(grid(4, 4, 0.5));
        let g = ScalarField::zeros(grid(5, 4, 0.5));
        assert!(dist2(&f, &g).is_err());
    }

    #[test]
    fn csv_roundtrip() {
        let g = grid(5, 3, 0.2);
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let f = random_field(&g, &mut rng);
        let mut buf = Vec::new();
        f.dump_csv(&mut buf).unwrap();
        let f2 = ScalarField::read_csv(&buf[..]).unwrap();
        assert_eq!(f.values(), f2.values());
        assert_eq!(f.grid(), f2.grid());
    }
}
