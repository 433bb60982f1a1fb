//! Phase-space quasi-probabilities evaluated from density matrices, plus
//! empirical Q histograms built from sample sets.
//!
//! Wigner values come only from density matrices; there is no Q → W
//! deconvolution path.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fock::{cat_state, expectation_in, parity, CatParity, DensityMatrix};
use crate::qhd::{QEvaluator, SampleSet};

/// Rectangular raster of nodes `x_i = x_min + i·dx`, `y_j = y_min + j·dy`.
///
/// Each node owns the cell of width dx × dy centered on it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub nx: usize,
    pub ny: usize,
}

impl GridSpec {
    pub fn new(x_min: f64, x_max: f64, y_min: f64, y_max: f64, nx: usize, ny: usize) -> Result<Self> {
        let finite = [x_min, x_max, y_min, y_max].iter().all(|v| v.is_finite());
        if !finite || !(x_min < x_max) || !(y_min < y_max) {
            return Err(Error::domain("grid bounds must be finite with min < max"));
        }
        if nx < 2 || ny < 2 {
            return Err(Error::domain("grid needs at least 2 nodes per axis"));
        }
        Ok(GridSpec {
            x_min,
            x_max,
            y_min,
            y_max,
            nx,
            ny,
        })
    }

    /// Square grid with `n` nodes per axis on `[lo, hi]²`.
    pub fn square(lo: f64, hi: f64, n: usize) -> Result<Self> {
        GridSpec::new(lo, hi, lo, hi, n, n)
    }

    /// Grid whose cells tile `[lo, hi]²` with `n` cells per axis.
    pub fn cells(lo: f64, hi: f64, n: usize) -> Result<Self> {
        if n < 2 || !(lo < hi) {
            return Err(Error::domain("cell grid needs n >= 2 and lo < hi"));
        }
        let h = (hi - lo) / n as f64;
        GridSpec::square(lo + 0.5 * h, hi - 0.5 * h, n)
    }

    /// Default raster for the figure panels: [−5, 5]² at 201 × 201.
    pub fn figure_default() -> Self {
        GridSpec::square(-5.0, 5.0, 201).expect("valid default grid")
    }

    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / (self.nx - 1) as f64
    }

    pub fn dy(&self) -> f64 {
        (self.y_max - self.y_min) / (self.ny - 1) as f64
    }

    pub fn cell_area(&self) -> f64 {
        self.dx() * self.dy()
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x_min + i as f64 * self.dx()
    }

    pub fn y(&self, j: usize) -> f64 {
        self.y_min + j as f64 * self.dy()
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Index of the cell containing (x, y), if any. Cells are half-open.
    pub fn cell_of(&self, x: f64, y: f64) -> Option<(usize, usize)> {
        let fx = ((x - self.x_min) / self.dx() + 0.5).floor();
        let fy = ((y - self.y_min) / self.dy() + 0.5).floor();
        if fx >= 0.0 && fy >= 0.0 && (fx as usize) < self.nx && (fy as usize) < self.ny {
            Some((fx as usize, fy as usize))
        } else {
            None
        }
    }
}

/// Quasi-probability values on a [`GridSpec`], stored x-fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseSpaceGrid {
    pub spec: GridSpec,
    pub values: Vec<f64>,
    /// Fraction of samples that fell outside the grid (histograms only).
    pub overflow: f64,
    pub source: String,
}

impl PhaseSpaceGrid {
    pub fn from_values(spec: GridSpec, values: Vec<f64>, overflow: f64, source: impl Into<String>) -> Result<Self> {
        if values.len() != spec.len() {
            return Err(Error::DimensionMismatch {
                left: values.len(),
                right: spec.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("grid values must be finite"));
        }
        Ok(PhaseSpaceGrid {
            spec,
            values,
            overflow,
            source: source.into(),
        })
    }

    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.values[j * self.spec.nx + i]
    }

    /// Riemann sum Σ value × cell area.
    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.spec.cell_area()
    }

    /// Node with the largest value, as (x, y).
    pub fn argmax(&self) -> (f64, f64) {
        let (k, _) = self
            .values
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (k, &v)| if v > best.1 { (k, v) } else { best });
        (self.spec.x(k % self.spec.nx), self.spec.y(k / self.spec.nx))
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Per-axis variances (Var x, Var y) of the grid treated as a density.
    pub fn axis_variances(&self) -> (f64, f64) {
        let s = &self.spec;
        let (mut w, mut mx, mut my) = (0.0, 0.0, 0.0);
        for j in 0..s.ny {
            for i in 0..s.nx {
                let v = self.value(i, j);
                w += v;
                mx += v * s.x(i);
                my += v * s.y(j);
            }
        }
        mx /= w;
        my /= w;
        let (mut vx, mut vy) = (0.0, 0.0);
        for j in 0..s.ny {
            for i in 0..s.nx {
                let v = self.value(i, j);
                vx += v * (s.x(i) - mx).powi(2);
                vy += v * (s.y(j) - my).powi(2);
            }
        }
        (vx / w, vy / w)
    }
}

fn eval_grid(spec: &GridSpec, f: impl Fn(Complex64) -> f64 + Sync) -> Vec<f64> {
    let rows: Vec<Vec<f64>> = (0..spec.ny)
        .into_par_iter()
        .map(|j| {
            (0..spec.nx)
                .map(|i| f(Complex64::new(spec.x(i), spec.y(j))))
                .collect()
        })
        .collect();
    rows.concat()
}

/// Husimi Q-function of ρ on the grid nodes.
pub fn q_grid(rho: &DensityMatrix, spec: &GridSpec) -> Result<PhaseSpaceGrid> {
    let q = QEvaluator::new(rho);
    PhaseSpaceGrid::from_values(*spec, eval_grid(spec, |a| q.eval(a)), 0.0, "q_grid")
}

/// Wigner function W(α) = (2/π) Tr[ρ D(α) Π D†(α)].
///
/// Matrix elements of the displaced parity are generated per off-diagonal
/// order k by a recurrence in the Laguerre degree on the normalized
/// quantities √(n!/(n+k)!) |2α|ᵏ e^{−2|α|²} L_n^{(k)}(4|α|²), which stay
/// bounded by one in magnitude.
pub fn wigner_value(rho: &DensityMatrix, alpha: Complex64) -> f64 {
    let d = rho.dim();
    let x = 4.0 * alpha.norm_sqr();
    let r = 2.0 * alpha.norm();
    let phase = if r > 0.0 { alpha / alpha.norm() } else { Complex64::new(1.0, 0.0) };
    let mut total = 0.0;
    let mut phase_k = Complex64::new(1.0, 0.0);
    for k in 0..d {
        if k > 0 {
            phase_k *= phase;
        }
        let kf = k as f64;
        // f_0 = |2α|^k e^{−x/2} / √k!
        let mut f_prev = 0.0;
        let mut f = if k == 0 {
            (-0.5 * x).exp()
        } else if r == 0.0 {
            break;
        } else {
            (kf * r.ln() - 0.5 * x - 0.5 * statrs::function::factorial::ln_factorial(k as u64)).exp()
        };
        let mut acc = Complex64::new(0.0, 0.0);
        for n in 0..d - k {
            let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
            acc += rho.get(n, n + k) * (sign * f);
            let nf = n as f64;
            let next = ((2.0 * nf + 1.0 + kf - x) * f - (nf * (nf + kf)).sqrt() * f_prev)
                / ((nf + 1.0) * (nf + 1.0 + kf)).sqrt();
            f_prev = f;
            f = next;
        }
        if k == 0 {
            total += acc.re;
        } else {
            total += 2.0 * (acc * phase_k).re;
        }
    }
    2.0 / PI * total
}

pub fn wigner_grid(rho: &DensityMatrix, spec: &GridSpec) -> Result<PhaseSpaceGrid> {
    PhaseSpaceGrid::from_values(*spec, eval_grid(spec, |a| wigner_value(rho, a)), 0.0, "wigner_grid")
}

/// W(0) = (2/π)·parity(ρ).
pub fn wigner_at_origin(rho: &DensityMatrix) -> f64 {
    2.0 / PI * parity(rho)
}

/// Σ max(0, −W) × cell area.
pub fn negativity_volume(grid: &PhaseSpaceGrid) -> f64 {
    grid.values.iter().map(|v| (-v).max(0.0)).sum::<f64>() * grid.spec.cell_area()
}

/// Best-fitting pure cat.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CatFit {
    pub alpha: f64,
    pub fidelity: f64,
    pub parity: CatParity,
    /// Set when even the best cat has fidelity below 0.05.
    pub no_cat_character: bool,
}

const FIT_ALPHA_MIN: f64 = 0.05;
const FIT_TOL: f64 = 1e-4;
const FIT_SCAN_POINTS: usize = 96;

fn cat_fidelity(rho: &DensityMatrix, alpha: f64, parity: CatParity) -> f64 {
    match cat_state(alpha, rho.dim(), parity, false) {
        Ok(v) => expectation_in(rho, v.coefficients()).clamp(0.0, 1.0),
        Err(_) => 0.0,
    }
}

fn fit_family(rho: &DensityMatrix, parity: CatParity) -> (f64, f64) {
    let lo = FIT_ALPHA_MIN;
    let hi = (rho.dim() as f64).sqrt().max(lo + FIT_TOL);
    let step = (hi - lo) / (FIT_SCAN_POINTS - 1) as f64;
    let scan: Vec<f64> = (0..FIT_SCAN_POINTS)
        .map(|i| cat_fidelity(rho, lo + i as f64 * step, parity))
        .collect();
    let best = scan
        .iter()
        .enumerate()
        .fold(0, |b, (i, &f)| if f > scan[b] { i } else { b });
    // Golden-section search on the bracket around the best scan point.
    let mut a = lo + best.saturating_sub(1) as f64 * step;
    let mut b = (lo + (best + 1) as f64 * step).min(hi);
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let mut fc = cat_fidelity(rho, c, parity);
    let mut fd = cat_fidelity(rho, d, parity);
    while b - a > FIT_TOL {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = cat_fidelity(rho, c, parity);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = cat_fidelity(rho, d, parity);
        }
    }
    let alpha = 0.5 * (a + b);
    let f = cat_fidelity(rho, alpha, parity);
    if f >= scan[best] {
        (alpha, f)
    } else {
        (lo + best as f64 * step, scan[best])
    }
}

/// Amplitude of the pure cat (odd or even, real α) with the highest fidelity to ρ.
pub fn fit_cat_amplitude(rho: &DensityMatrix) -> CatFit {
    let odd = fit_family(rho, CatParity::Odd);
    let even = fit_family(rho, CatParity::Even);
    let ((alpha, fidelity), parity) = if odd.1 >= even.1 {
        (odd, CatParity::Odd)
    } else {
        (even, CatParity::Even)
    };
    let no_cat_character = fidelity < 0.05;
    if no_cat_character {
        log::warn!("fit_cat_amplitude: best cat fidelity {fidelity:.4} < 0.05");
    }
    CatFit {
        alpha,
        fidelity,
        parity,
        no_cat_character,
    }
}

/// Amplitude of the best-fitting cat of one parity.
pub fn fit_cat_amplitude_with_parity(rho: &DensityMatrix, parity: CatParity) -> CatFit {
    let (alpha, fidelity) = fit_family(rho, parity);
    CatFit {
        alpha,
        fidelity,
        parity,
        no_cat_character: fidelity < 0.05,
    }
}

/// Normalized 2-D histogram: counts / (N × cell area); out-of-grid samples are
/// reported as the overflow fraction.
pub fn histogram_q(set: &SampleSet, spec: &GridSpec) -> Result<PhaseSpaceGrid> {
    if set.is_empty() {
        return Err(Error::domain("histogram of an empty sample set"));
    }
    let counts = histogram_counts(set, spec);
    let outside = set.count() as f64 - counts.iter().sum::<f64>();
    let norm = 1.0 / (set.count() as f64 * spec.cell_area());
    PhaseSpaceGrid::from_values(
        *spec,
        counts.into_iter().map(|c| c * norm).collect(),
        outside / set.count() as f64,
        "histogram_q",
    )
}

/// Raw per-cell counts, x-fastest.
pub fn histogram_counts(set: &SampleSet, spec: &GridSpec) -> Vec<f64> {
    let mut counts = vec![0.0; spec.len()];
    for s in set.iter() {
        if let Some((i, j)) = spec.cell_of(s.x, s.y) {
            counts[j * spec.nx + i] += 1.0;
        }
    }
    counts
}
