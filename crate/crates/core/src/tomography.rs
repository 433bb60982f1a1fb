//! Maximum-likelihood state reconstruction from QHD samples.
//!
//! Each outcome α contributes the POVM element Π = |α⟩⟨α|/π. The iteration is
//! the damped RρR scheme: R = (1/N) Σ Π_i / Tr(Π_i ρ), ρ' = RρR / Tr(RρR),
//! ρ ← (1−d)ρ + d ρ'.
//!
//! The likelihood kernel works on unit-normalized truncated coherent vectors
//! û ∝ (αⁿ/√n!)ₙ, which keeps every probability in [λ_min, λ_max] of ρ no
//! matter how far out the sample lies; the dropped scale is added back as a
//! per-sample constant. ρ acts on û through its real 2d × 2d representation
//! so both passes over the data are plain dense matrix products.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fock::DensityMatrix;
use crate::qhd::{QuadratureSample, SampleSet};
use crate::quasiprob::GridSpec;

/// Settings of a reconstruction run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReconstructionConfig {
    pub dim: usize,
    pub max_iters: usize,
    /// Stop once the relative change of the mean log-likelihood falls below this.
    pub rel_tol: f64,
    /// Mixing weight d of the damped update.
    pub dilution: f64,
}

impl Default for ReconstructionConfig {
    fn default() -> Self {
        ReconstructionConfig {
            dim: 20,
            max_iters: 2000,
            rel_tol: 1e-8,
            dilution: 0.5,
        }
    }
}

impl ReconstructionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dim < 2 {
            return Err(Error::domain(format!("reconstruction dim must be >= 2, got {}", self.dim)));
        }
        if self.max_iters < 1 {
            return Err(Error::domain("max_iters must be >= 1"));
        }
        if !(self.rel_tol > 0.0) {
            return Err(Error::domain(format!("rel_tol must be > 0, got {}", self.rel_tol)));
        }
        check_dilution(self.dilution)
    }
}

fn check_dilution(d: f64) -> Result<()> {
    if d > 0.0 && d <= 1.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("dilution must lie in (0, 1], got {d}")))
    }
}

/// Output of [`maxlik_reconstruct`].
#[derive(Debug, Clone, PartialEq)]
pub struct ReconstructionResult {
    pub rho: DensityMatrix,
    /// Mean log-likelihood per sample: the starting state first, then one entry per iteration.
    pub loglik_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Samples processed per task; fixed so that the reduction tree, and hence
/// the floating-point result, does not depend on the thread count.
const CHUNK: usize = 8192;

/// ln π
const LN_PI: f64 = 1.1447298858494002;

/// Halvings of the dilution tried before an iteration is declared stalled.
const MAX_BACKTRACK: usize = 40;

/// Weighted phase-space points entering the likelihood.
struct Data<'a> {
    points: &'a [QuadratureSample],
    /// None means unit weights.
    weights: Option<&'a [f64]>,
    total_weight: f64,
}

impl<'a> Data<'a> {
    fn unweighted(points: &'a [QuadratureSample]) -> Self {
        Data {
            points,
            weights: None,
            total_weight: points.len() as f64,
        }
    }

    fn weighted(points: &'a [QuadratureSample], weights: &'a [f64]) -> Self {
        Data {
            points,
            weights: Some(weights),
            total_weight: weights.iter().sum(),
        }
    }
}

/// Mean log-likelihood of ρ and the R operator, evaluated in one pass.
struct Pass {
    loglik: f64,
    r: DMatrix<Complex64>,
}

/// Partial sums of one chunk: Σ w ln Q and S = Σ (w/p̂) x xᵀ in the real representation.
struct Partial {
    loglik: f64,
    /// Row-major 2d × 2d; empty when R is not requested.
    s: Vec<f64>,
}

fn real_representation(rho: &DensityMatrix) -> DMatrix<f64> {
    let d = rho.dim();
    DMatrix::from_fn(2 * d, 2 * d, |i, j| {
        let v = rho.get(i % d, j % d);
        match (i < d, j < d) {
            (true, true) | (false, false) => v.re,
            (true, false) => -v.im,
            (false, true) => v.im,
        }
    })
}

/// Kernel constants shared by every chunk of one pass.
struct Kernel {
    d: usize,
    /// Real representation of ρ, row-major 2d × 2d.
    g: Vec<f64>,
    inv_sqrt: Vec<f64>,
}

impl Kernel {
    fn new(rho: &DensityMatrix) -> Self {
        let d = rho.dim();
        let rep = real_representation(rho);
        Kernel {
            d,
            g: rep.transpose().as_slice().to_vec(),
            inv_sqrt: (0..d).map(|n| if n == 0 { 1.0 } else { 1.0 / (n as f64).sqrt() }).collect(),
        }
    }

    /// Writes û(α) for each point into consecutive rows of `x` (real parts,
    /// then imaginary parts) and returns ‖u‖², the factor dropped by the
    /// normalization. Eight points are advanced together so the recurrence
    /// vectorizes.
    fn fill_rows(&self, x: &mut [f64], points: &[QuadratureSample]) -> Vec<f64> {
        const LANES: usize = 8;
        let d = self.d;
        let w2 = 2 * d;
        let mut norms = Vec::with_capacity(points.len());
        for (block, pts) in x.chunks_mut(LANES * w2).zip(points.chunks(LANES)) {
            let k = pts.len();
            let mut ar = [0.0; LANES];
            let mut ai = [0.0; LANES];
            for (l, p) in pts.iter().enumerate() {
                ar[l] = p.x;
                ai[l] = p.y;
            }
            let mut ur = [1.0; LANES];
            let mut ui = [0.0; LANES];
            let mut norm = [0.0; LANES];
            for n in 0..d {
                if n > 0 {
                    let f = self.inv_sqrt[n];
                    for l in 0..LANES {
                        let r = (ur[l] * ar[l] - ui[l] * ai[l]) * f;
                        ui[l] = (ur[l] * ai[l] + ui[l] * ar[l]) * f;
                        ur[l] = r;
                    }
                }
                for l in 0..LANES {
                    norm[l] += ur[l] * ur[l] + ui[l] * ui[l];
                }
                for l in 0..k {
                    block[l * w2 + n] = ur[l];
                    block[l * w2 + d + n] = ui[l];
                }
            }
            for (l, row) in block.chunks_exact_mut(w2).enumerate() {
                let inv = 1.0 / norm[l].sqrt();
                row.iter_mut().for_each(|v| *v *= inv);
            }
            norms.extend_from_slice(&norm[..k]);
        }
        norms
    }

    fn chunk(&self, start: usize, points: &[QuadratureSample], weights: Option<&[f64]>, need_r: bool) -> Result<Partial> {
        let w2 = 2 * self.d;
        let c = points.len();
        let mut x = vec![0.0; c * w2];
        let norms = self.fill_rows(&mut x, points);
        // M = X·G, both row-major
        let mut m = vec![0.0; c * w2];
        unsafe {
            matrixmultiply::dgemm(
                c, w2, w2, 1.0,
                x.as_ptr(), w2 as isize, 1,
                self.g.as_ptr(), w2 as isize, 1,
                0.0,
                m.as_mut_ptr(), w2 as isize, 1,
            );
        }
        let mut loglik = 0.0;
        for (i, (xr, mr)) in x.chunks_exact(w2).zip(m.chunks_exact_mut(w2)).enumerate() {
            let p: f64 = xr.iter().zip(mr.iter()).map(|(a, b)| a * b).sum();
            if !(p > 0.0) || !p.is_finite() {
                return Err(Error::NumericalSupport {
                    index: start + i,
                    value: p,
                });
            }
            let w = weights.map_or(1.0, |w| w[i]);
            let a2 = points[i].norm_sqr();
            let scaled = p * norms[i];
            let ln_q = if scaled.is_finite() { scaled.ln() } else { p.ln() + norms[i].ln() };
            loglik += w * (ln_q - a2 - LN_PI);
            if need_r {
                let f = w / p;
                for (dst, src) in mr.iter_mut().zip(xr) {
                    *dst = src * f;
                }
            }
        }
        let mut s = Vec::new();
        if need_r {
            // S = Xᵀ·Y, with Y (the rescaled rows) stored in m
            s = vec![0.0; w2 * w2];
            unsafe {
                matrixmultiply::dgemm(
                    w2, c, w2, 1.0,
                    x.as_ptr(), 1, w2 as isize,
                    m.as_ptr(), w2 as isize, 1,
                    0.0,
                    s.as_mut_ptr(), w2 as isize, 1,
                );
            }
        }
        Ok(Partial { loglik, s })
    }
}

fn combine(mut a: Partial, b: Partial) -> Partial {
    a.loglik += b.loglik;
    a.s.iter_mut().zip(&b.s).for_each(|(x, y)| *x += y);
    a
}

/// Pairwise reduction whose shape depends only on the number of partials.
fn tree_reduce(mut parts: Vec<Partial>) -> Partial {
    while parts.len() > 1 {
        let mut next = Vec::with_capacity(parts.len().div_ceil(2));
        let mut it = parts.into_iter();
        while let Some(a) = it.next() {
            next.push(match it.next() {
                Some(b) => combine(a, b),
                None => a,
            });
        }
        parts = next;
    }
    parts.pop().expect("at least one partial")
}

fn evaluate(rho: &DensityMatrix, data: &Data, need_r: bool) -> Result<Pass> {
    if data.points.is_empty() {
        return Err(Error::domain("log-likelihood of an empty sample set"));
    }
    let d = rho.dim();
    let kernel = Kernel::new(rho);
    let results: Vec<Result<Partial>> = data
        .points
        .par_chunks(CHUNK)
        .enumerate()
        .map(|(k, pts)| {
            let start = k * CHUNK;
            let w = data.weights.map(|w| &w[start..start + pts.len()]);
            kernel.chunk(start, pts, w, need_r)
        })
        .collect();
    // the first failing chunk carries the lowest failing index
    let parts = results.into_iter().collect::<Result<Vec<_>>>()?;
    let total = tree_reduce(parts);
    let loglik = total.loglik / data.total_weight;
    let r = if need_r {
        let w2 = 2 * d;
        let s = |i: usize, j: usize| total.s[i * w2 + j];
        DMatrix::from_fn(d, d, |m, n| {
            Complex64::new(s(m, n) + s(d + m, d + n), s(d + m, n) - s(m, d + n))
                / data.total_weight
        })
    } else {
        DMatrix::zeros(0, 0)
    };
    Ok(Pass { loglik, r })
}

/// Mean log-likelihood (1/N) Σ ln[⟨α_i|ρ|α_i⟩/π].
///
/// Fails with a numerical-support error naming the first sample whose
/// probability under ρ is not positive.
pub fn log_likelihood(rho: &DensityMatrix, set: &SampleSet) -> Result<f64> {
    Ok(evaluate(rho, &Data::unweighted(&set.samples), false)?.loglik)
}

/// normalize((1−d)ρ + d·RρR/Tr(RρR)), Hermitian-symmetrized.
fn damped_update(rho: &DensityMatrix, r: &DMatrix<Complex64>, dilution: f64) -> Result<DensityMatrix> {
    let rr = r * rho.matrix() * r;
    let tr: f64 = (0..rr.nrows()).map(|k| rr[(k, k)].re).sum();
    if !(tr > 0.0) || !tr.is_finite() {
        return Err(Error::Degenerate(format!("Tr(RρR) = {tr:e}")));
    }
    let mixed = rho.matrix() * Complex64::from(1.0 - dilution) + rr * Complex64::from(dilution / tr);
    let sym = (&mixed + mixed.adjoint()) * Complex64::from(0.5);
    let out = DensityMatrix::from_matrix(sym)?.normalized()?;
    debug_assert!(out.validate(Default::default()).is_ok(), "MaxLik iterate left the state space");
    Ok(out)
}

/// One damped RρR iteration.
pub fn maxlik_step(rho: &DensityMatrix, set: &SampleSet, dilution: f64) -> Result<DensityMatrix> {
    check_dilution(dilution)?;
    let pass = evaluate(rho, &Data::unweighted(&set.samples), true)?;
    damped_update(rho, &pass.r, dilution)
}

/// Iterates [`maxlik_step`] from the maximally mixed state.
///
/// A step that would lower the likelihood is retried with the dilution
/// halved, so the recorded trace never decreases. Convergence is declared
/// when |ΔL| ≤ rel_tol·|L|.
pub fn maxlik_reconstruct(set: &SampleSet, config: &ReconstructionConfig) -> Result<ReconstructionResult> {
    config.validate()?;
    if set.count() < 100 {
        return Err(Error::domain(format!(
            "reconstruction needs at least 100 samples, got {}",
            set.count()
        )));
    }
    if set.count() < 10_000 {
        log::warn!("reconstructing from only {} samples", set.count());
    }
    run(&Data::unweighted(&set.samples), config)
}

fn run(data: &Data, config: &ReconstructionConfig) -> Result<ReconstructionResult> {
    let mut rho = DensityMatrix::maximally_mixed(config.dim)?;
    let mut pass = evaluate(&rho, data, true)?;
    let mut trace = vec![pass.loglik];
    let mut converged = false;
    let mut iterations = 0;
    'outer: while iterations < config.max_iters {
        let mut d = config.dilution;
        let mut accepted = None;
        for _ in 0..MAX_BACKTRACK {
            let candidate = damped_update(&rho, &pass.r, d)?;
            let next = evaluate(&candidate, data, true)?;
            if next.loglik >= pass.loglik {
                accepted = Some((candidate, next));
                break;
            }
            d *= 0.5;
        }
        let Some((candidate, next)) = accepted else {
            log::debug!("MaxLik stalled after {iterations} iterations");
            converged = true;
            break 'outer;
        };
        iterations += 1;
        let change = next.loglik - pass.loglik;
        let scale = pass.loglik.abs();
        rho = candidate;
        pass = next;
        trace.push(pass.loglik);
        if change <= config.rel_tol * scale {
            converged = true;
            break;
        }
    }
    log::debug!(
        "MaxLik: {iterations} iterations, L = {:.10}, converged = {converged}",
        pass.loglik
    );
    Ok(ReconstructionResult {
        rho,
        loglik_trace: trace,
        iterations,
        converged,
    })
}

/// Samples aggregated into square bins: bin centers with counts.
#[derive(Debug, Clone, PartialEq)]
pub struct BinnedSamples {
    pub centers: Vec<QuadratureSample>,
    pub counts: Vec<f64>,
    /// Samples outside the grid, kept at their own positions with unit weight.
    pub outside: usize,
}

/// Bins `set` on `grid`, dropping empty bins.
pub fn bin_samples(set: &SampleSet, grid: &GridSpec) -> BinnedSamples {
    let mut counts = vec![0.0; grid.len()];
    let mut centers = Vec::new();
    let mut extra = Vec::new();
    for s in set.iter() {
        match grid.cell_of(s.x, s.y) {
            Some((i, j)) => counts[j * grid.nx + i] += 1.0,
            None => extra.push(*s),
        }
    }
    let mut weights = Vec::new();
    for j in 0..grid.ny {
        for i in 0..grid.nx {
            let c = counts[j * grid.nx + i];
            if c > 0.0 {
                centers.push(QuadratureSample::new(grid.x(i), grid.y(j)));
                weights.push(c);
            }
        }
    }
    let outside = extra.len();
    centers.extend(extra);
    weights.resize(centers.len(), 1.0);
    BinnedSamples {
        centers,
        counts: weights,
        outside,
    }
}

/// MaxLik on binned data, for very large sample sets.
///
/// Every sample is moved to its bin center, which convolves the empirical Q
/// with the bin shape: second moments are inflated by h²/12 per axis for bin
/// width h, so the reconstructed mean photon number is biased up by about h²/6.
pub fn maxlik_reconstruct_binned(
    set: &SampleSet,
    grid: &GridSpec,
    config: &ReconstructionConfig,
) -> Result<ReconstructionResult> {
    config.validate()?;
    if set.count() < 100 {
        return Err(Error::domain(format!(
            "reconstruction needs at least 100 samples, got {}",
            set.count()
        )));
    }
    let binned = bin_samples(set, grid);
    run(&Data::weighted(&binned.centers, &binned.counts), config)
}
