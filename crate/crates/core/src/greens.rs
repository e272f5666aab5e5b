//! The half-plane Green's kernel, the operator `G`, kinetic energy,
//! induced velocity, and the computable sup bound for `‖Gζ‖∞`.
//!
//! The kernel is the method-of-images kernel
//!
//! ```text
//! G(x,y) = (1/4π) · log(1 + 4 x₂ y₂ / ((x₁−y₁)² + (x₂−y₂)²))
//! ```
//!
//! split for evaluation into a free-space part `−(1/2π) log|x−y|` and an
//! image part `(1/4π) log((x₁−y₁)² + (x₂+y₂)²)`. On the diagonal the free
//! part is replaced by its exact cell average (closed form below) and the
//! image part, regular there, is evaluated at the center.
//!
//! `apply_green_direct` is the O(N²) reference summation. [`GreenOperator`]
//! evaluates the same discrete sums through padded FFT convolutions (the
//! free part is a 2D convolution, the image part a convolution in `x₁` and
//! a correlation in `x₂`), agreeing with the reference to roundoff.

use std::f64::consts::PI;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};
use std::sync::Arc;

use crate::error::Error;
use crate::field::{GridSpec, NormReport, ScalarField};
use crate::Result;

/// Half-plane Green's function in log1p form. Requires `x ≠ y`.
#[inline]
pub fn kernel(x: (f64, f64), y: (f64, f64)) -> f64 {
    let dx1 = x.0 - y.0;
    let dx2 = x.1 - y.1;
    let rho2 = dx1 * dx1 + dx2 * dx2;
    debug_assert!(rho2 > 0.0, "kernel called on coincident points");
    (1.0 / (4.0 * PI)) * (4.0 * x.1 * y.1 / rho2).ln_1p()
}

/// Log-ratio form of the same kernel: `(1/4π) log(((x₁−y₁)²+(x₂+y₂)²)/ρ²)`.
///
/// Algebraically identical to [`kernel`]; kept as the independent route for
/// the kernel-identity checks.
#[inline]
pub fn kernel_ratio_form(x: (f64, f64), y: (f64, f64)) -> f64 {
    let dx1 = x.0 - y.0;
    let num = dx1 * dx1 + (x.1 + y.1) * (x.1 + y.1);
    let den = dx1 * dx1 + (x.1 - y.1) * (x.1 - y.1);
    (1.0 / (4.0 * PI)) * (num / den).ln()
}

/// Exact cell average of the free-space part `−(1/2π) log|x−y|` over a
/// square cell of side `h` against its center:
/// `(1/2π)(3/2 + (log 2)/2 − π/4 − log h)`.
pub fn self_interaction(h: f64) -> f64 {
    (1.0 / (2.0 * PI)) * (1.5 + 0.5 * 2.0_f64.ln() - PI / 4.0 - h.ln())
}

/// Image-part kernel `(1/4π) log((x₁−y₁)² + (x₂+y₂)²)`, regular on the
/// diagonal for points strictly inside the half-plane.
#[inline]
fn kernel_image(x: (f64, f64), y: (f64, f64)) -> f64 {
    let dx1 = x.0 - y.0;
    let s = x.1 + y.1;
    (1.0 / (4.0 * PI)) * (dx1 * dx1 + s * s).ln()
}

fn threads_from_env() -> usize {
    std::env::var("VPL_THREADS")
        .ok()
        .and_then(|s| s.parse::<usize>().ok())
        .filter(|&n| n >= 1)
        .unwrap_or(1)
}

/// Reference O(N²) summation of `ψ₀(x) = Σ G(x, y_cell) ζ(y_cell) h²` with
/// the diagonal handled by the exact-cell-average rule.
///
/// Rows of targets may be distributed across up to `VPL_THREADS` threads;
/// each target's sum runs in the fixed sequential order, so the result is
/// bit-identical at any thread count.
pub fn apply_green_direct(zeta: &ScalarField) -> ScalarField {
    let grid = zeta.grid().clone();
    let h2 = grid.cell_area();
    let self_free = self_interaction(grid.h);
    let values = zeta.values();

    let centers: Vec<(f64, f64)> = (0..grid.ny)
        .flat_map(|j| (0..grid.nx).map(move |i| (i, j)))
        .map(|(i, j)| grid.center(i, j))
        .collect();

    let eval_row = |t: usize| -> f64 {
        let x = centers[t];
        let mut acc = 0.0;
        for (s, &zv) in values.iter().enumerate() {
            if zv == 0.0 {
                continue;
            }
            let y = centers[s];
            let k = if s == t {
                self_free + kernel_image(x, y)
            } else {
                kernel(x, y)
            };
            acc += k * zv;
        }
        acc * h2
    };

    let n = grid.len();
    let nthreads = threads_from_env().min(n.max(1));
    let mut out = vec![0.0; n];
    if nthreads <= 1 {
        for (t, o) in out.iter_mut().enumerate() {
            *o = eval_row(t);
        }
    } else {
        let chunk = n.div_ceil(nthreads);
        std::thread::scope(|scope| {
            for (c, slot) in out.chunks_mut(chunk).enumerate() {
                let eval_row = &eval_row;
                scope.spawn(move || {
                    let base = c * chunk;
                    for (off, o) in slot.iter_mut().enumerate() {
                        *o = eval_row(base + off);
                    }
                });
            }
        });
    }
    ScalarField::from_values(grid, out).expect("length matches grid")
}

/// Constants of the computable sup bound
/// `‖Gζ‖∞ ≤ (1/4π)(c_log ‖ζ‖₁ + c_imp I(|ζ|) + c_l2 ‖ζ‖₂)`.
///
/// `c_log = log 216 = log 3 + log 8 + log 9` collects the trichotomy bound,
/// the `(log 8y₂²)₊` constant and the lower-strip bound; `c_imp = 2` is the
/// linear-in-`y₂` term; `c_l2 = √(2π)` is the Cauchy–Schwarz factor
/// `(∫_{ρ≤1} 4 log²ρ)^{1/2}` over the unit disc (using `∫₀¹ r log²r dr = ¼`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SupBoundConstants {
    pub c_log: f64,
    pub c_imp: f64,
    pub c_l2: f64,
}

impl SupBoundConstants {
    pub fn standard() -> Self {
        SupBoundConstants {
            c_log: 216.0_f64.ln(),
            c_imp: 2.0,
            c_l2: (2.0 * PI).sqrt(),
        }
    }
}

/// Upper bound for `max |Gζ|` of a nonnegative field with the given norms.
pub fn sup_bound(norms: &NormReport) -> f64 {
    let c = SupBoundConstants::standard();
    (1.0 / (4.0 * PI)) * (c.c_log * norms.l1 + c.c_imp * norms.impulse_abs + c.c_l2 * norms.l2)
}

/// Support-height bound `Z = sup_bound / λ`: any nonnegative field with
/// these norms satisfies `Gζ(x) − λx₂ < 0` wherever `x₂ > Z`.
pub fn support_height_z(norms: &NormReport, lambda: f64) -> Result<f64> {
    if !(lambda > 0.0) {
        return Err(Error::Validation(format!(
            "support_height_z requires lambda > 0, got {lambda}"
        )));
    }
    Ok(sup_bound(norms) / lambda)
}

struct Fft2 {
    p1: usize,
    p2: usize,
    fwd_rows: Arc<dyn Fft<f64>>,
    inv_rows: Arc<dyn Fft<f64>>,
    fwd_cols: Arc<dyn Fft<f64>>,
    inv_cols: Arc<dyn Fft<f64>>,
}

impl Fft2 {
    fn new(p1: usize, p2: usize) -> Self {
        let mut planner = FftPlanner::new();
        Fft2 {
            p1,
            p2,
            fwd_rows: planner.plan_fft_forward(p1),
            inv_rows: planner.plan_fft_inverse(p1),
            fwd_cols: planner.plan_fft_forward(p2),
            inv_cols: planner.plan_fft_inverse(p2),
        }
    }

    fn transform(&self, data: &mut [Complex<f64>], inverse: bool) {
        assert_eq!(data.len(), self.p1 * self.p2);
        let row_fft = if inverse { &self.inv_rows } else { &self.fwd_rows };
        let col_fft = if inverse { &self.inv_cols } else { &self.fwd_cols };
        for row in data.chunks_exact_mut(self.p1) {
            row_fft.process(row);
        }
        let mut col = vec![Complex::new(0.0, 0.0); self.p2];
        for i in 0..self.p1 {
            for (j, c) in col.iter_mut().enumerate() {
                *c = data[j * self.p1 + i];
            }
            col_fft.process(&mut col);
            for (j, c) in col.iter().enumerate() {
                data[j * self.p1 + i] = *c;
            }
        }
    }
}

/// Precomputed Green's operator for one grid: kernel transforms, plans and
/// the per-grid diagonal constant.
pub struct GreenOperator {
    grid: GridSpec,
    fft: Fft2,
    free_hat: Vec<Complex<f64>>,
    image_hat: Vec<Complex<f64>>,
    /// Exact cell average of the free-space part on the diagonal.
    pub self_interaction: f64,
}

impl GreenOperator {
    pub fn new(grid: GridSpec) -> Self {
        let (nx, ny, h) = (grid.nx, grid.ny, grid.h);
        let p1 = 2 * nx;
        let p2 = 2 * ny;
        let fft = Fft2::new(p1, p2);
        let self_free = self_interaction(h);

        // Free part: even kernel of the offset, −(1/2π) log(h·√(di²+dj²)),
        // diagonal replaced by the exact cell average.
        let mut free = vec![Complex::new(0.0, 0.0); p1 * p2];
        for dj in 0..p2 {
            let sdj = dj.min(p2 - dj) as f64;
            for di in 0..p1 {
                let sdi = di.min(p1 - di) as f64;
                let v = if di == 0 && dj == 0 {
                    self_free
                } else {
                    let r2 = h * h * (sdi * sdi + sdj * sdj);
                    -(1.0 / (4.0 * PI)) * r2.ln()
                };
                free[dj * p1 + di] = Complex::new(v, 0.0);
            }
        }
        fft.transform(&mut free, false);

        // Image part: (1/4π) log((di·h)² + (s·h)²) with s = x₂+y₂ in units
        // of h; s spans 1..2ny−1, stored at column index s.
        let mut image = vec![Complex::new(0.0, 0.0); p1 * p2];
        for s in 1..p2 {
            let sf = s as f64;
            for di in 0..p1 {
                let sdi = di.min(p1 - di) as f64;
                let r2 = h * h * (sdi * sdi + sf * sf);
                image[s * p1 + di] = Complex::new((1.0 / (4.0 * PI)) * r2.ln(), 0.0);
            }
        }
        fft.transform(&mut image, false);

        GreenOperator {
            grid,
            fft,
            free_hat: free,
            image_hat: image,
            self_interaction: self_free,
        }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    fn check_grid(&self, f: &ScalarField) -> Result<()> {
        if f.grid() != &self.grid {
            return Err(Error::GridMismatch(
                "field does not live on the operator's grid".into(),
            ));
        }
        Ok(())
    }

    /// `ψ₀ = Gζ` by FFT convolution; identical to [`apply_green_direct`]
    /// up to roundoff.
    pub fn apply(&self, zeta: &ScalarField) -> Result<ScalarField> {
        self.check_grid(zeta)?;
        let (nx, ny) = (self.grid.nx, self.grid.ny);
        let (p1, p2) = (2 * nx, 2 * ny);
        let h2 = self.grid.cell_area();
        let vals = zeta.values();
        let norm = 1.0 / (p1 * p2) as f64;

        // Free part: pad ζ and convolve.
        let mut a = vec![Complex::new(0.0, 0.0); p1 * p2];
        for j in 0..ny {
            for i in 0..nx {
                a[j * p1 + i] = Complex::new(vals[j * nx + i], 0.0);
            }
        }
        self.fft.transform(&mut a, false);
        for (av, kv) in a.iter_mut().zip(&self.free_hat) {
            *av *= kv;
        }
        self.fft.transform(&mut a, true);

        // Image part: pad the x₂-flipped field and convolve; the result for
        // cell (i, j) sits at padded row j + ny.
        let mut b = vec![Complex::new(0.0, 0.0); p1 * p2];
        for j in 0..ny {
            for i in 0..nx {
                b[j * p1 + i] = Complex::new(vals[(ny - 1 - j) * nx + i], 0.0);
            }
        }
        self.fft.transform(&mut b, false);
        for (bv, kv) in b.iter_mut().zip(&self.image_hat) {
            *bv *= kv;
        }
        self.fft.transform(&mut b, true);

        let mut out = vec![0.0; nx * ny];
        for j in 0..ny {
            for i in 0..nx {
                let direct = a[j * p1 + i].re;
                let image = b[(j + ny) * p1 + i].re;
                out[j * nx + i] = (direct + image) * norm * h2;
            }
        }
        ScalarField::from_values(self.grid.clone(), out)
    }

    /// Kinetic energy `E = ½ Σ ζ ψ₀ h²` reusing a precomputed `ψ₀ = Gζ`.
    pub fn energy_with(&self, zeta: &ScalarField, psi0: &ScalarField) -> f64 {
        let h2 = self.grid.cell_area();
        let s: f64 = zeta
            .values()
            .iter()
            .zip(psi0.values())
            .map(|(z, p)| z * p)
            .sum();
        0.5 * s * h2
    }

    pub fn energy(&self, zeta: &ScalarField) -> Result<f64> {
        let psi0 = self.apply(zeta)?;
        Ok(self.energy_with(zeta, &psi0))
    }

    /// `E(ζ) − λ I(ζ)`, the penalised functional being maximized.
    pub fn objective(&self, zeta: &ScalarField, lambda: f64) -> Result<f64> {
        Ok(self.energy(zeta)? - lambda * zeta.impulse())
    }

    /// Co-moving stream field `ψ = Gζ − λx₂`.
    pub fn stream(&self, zeta: &ScalarField, lambda: f64) -> Result<ScalarField> {
        let psi0 = self.apply(zeta)?;
        Ok(psi0.map_indexed(|_, j, v| v - lambda * self.grid.x2(j)))
    }

    /// Velocity `u = λe₁ + ∇⊥Gζ`: `u₁ = λ − ∂ψ₀/∂x₂`, `u₂ = ∂ψ₀/∂x₁`,
    /// centered differences in the interior, second-order one-sided at the
    /// window edges, odd reflection of `ψ₀` across the wall.
    pub fn velocity(&self, zeta: &ScalarField, lambda: f64) -> Result<(ScalarField, ScalarField)> {
        let psi0 = self.apply(zeta)?;
        Ok(self.velocity_from_stream(&psi0, lambda))
    }

    /// Velocity from a precomputed `ψ₀ = Gζ`.
    pub fn velocity_from_stream(&self, psi0: &ScalarField, lambda: f64) -> (ScalarField, ScalarField) {
        let (nx, ny, h) = (self.grid.nx, self.grid.ny, self.grid.h);
        assert!(nx >= 3 && ny >= 3, "velocity stencils need at least 3 cells per direction");
        let p = psi0.values();
        let idx = |i: usize, j: usize| j * nx + i;
        let inv2h = 1.0 / (2.0 * h);
        let mut u1 = vec![0.0; nx * ny];
        let mut u2 = vec![0.0; nx * ny];
        for j in 0..ny {
            for i in 0..nx {
                let dpsi_dx2 = if j == 0 {
                    // ghost row from odd reflection: ψ₀(x₁, −h/2) = −ψ₀(x₁, h/2)
                    (p[idx(i, 1)] + p[idx(i, 0)]) * inv2h
                } else if j == ny - 1 {
                    (3.0 * p[idx(i, j)] - 4.0 * p[idx(i, j - 1)] + p[idx(i, j - 2)]) * inv2h
                } else {
                    (p[idx(i, j + 1)] - p[idx(i, j - 1)]) * inv2h
                };
                let dpsi_dx1 = if i == 0 {
                    (-3.0 * p[idx(0, j)] + 4.0 * p[idx(1, j)] - p[idx(2, j)]) * inv2h
                } else if i == nx - 1 {
                    (3.0 * p[idx(i, j)] - 4.0 * p[idx(i - 1, j)] + p[idx(i - 2, j)]) * inv2h
                } else {
                    (p[idx(i + 1, j)] - p[idx(i - 1, j)]) * inv2h
                };
                u1[idx(i, j)] = lambda - dpsi_dx2;
                u2[idx(i, j)] = dpsi_dx1;
            }
        }
        (
            ScalarField::from_values(self.grid.clone(), u1).expect("sized"),
            ScalarField::from_values(self.grid.clone(), u2).expect("sized"),
        )
    }
}
