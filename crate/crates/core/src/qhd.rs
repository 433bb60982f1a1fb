//! Q-function homodyne (heterodyne) samples: each outcome is one phase-space
//! point α = x + iy drawn from the Husimi density Q(α) = ⟨α|ρ|α⟩/π.
//!
//! Convention: vacuum Q-samples have variance 1/2 per axis and a coherent
//! state |α⟩ yields samples centered on (Re α, Im α).

use std::f64::consts::PI;

use nalgebra::{Matrix2, Vector2};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fock::{coherent_amplitudes, expectation_in, DensityMatrix};

/// One simultaneous (X^Q, Y^Q) outcome.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct QuadratureSample {
    pub x: f64,
    pub y: f64,
}

impl QuadratureSample {
    pub fn new(x: f64, y: f64) -> Self {
        QuadratureSample { x, y }
    }

    pub fn from_complex(alpha: Complex64) -> Self {
        QuadratureSample {
            x: alpha.re,
            y: alpha.im,
        }
    }

    pub fn alpha(self) -> Complex64 {
        Complex64::new(self.x, self.y)
    }

    pub fn norm_sqr(self) -> f64 {
        self.x * self.x + self.y * self.y
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

/// Provenance of a sample set.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SampleMeta {
    pub seed: u64,
    pub source: String,
    /// Breeding step that produced the set; 0 for directly sampled data.
    pub generation: u32,
    /// Number of independent RNG streams used to draw the set (0 if unknown).
    pub workers: u32,
}

/// Ordered collection of QHD outcomes.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SampleSet {
    pub samples: Vec<QuadratureSample>,
    pub meta: SampleMeta,
}

impl SampleSet {
    pub fn new(samples: Vec<QuadratureSample>, meta: SampleMeta) -> Self {
        SampleSet { samples, meta }
    }

    pub fn count(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &QuadratureSample> {
        self.samples.iter()
    }
}

/// Q(α) = ⟨α|ρ|α⟩/π, using the untruncated coherent amplitudes restricted to
/// the support of ρ (so the value is exact for the truncated state).
pub fn q_value(rho: &DensityMatrix, alpha: Complex64) -> f64 {
    let v = coherent_amplitudes(alpha, rho.dim());
    expectation_in(rho, &v).max(0.0) / PI
}

/// Fast repeated evaluation of Q via the eigen-decomposition of ρ.
///
/// Eigenvectors with negligible weight are dropped, so low-rank states cost
/// O(rank·dim) per point instead of O(dim²).
#[derive(Debug, Clone)]
pub struct QEvaluator {
    dim: usize,
    weights: Vec<f64>,
    /// Conjugated eigenvectors, one per retained weight.
    vectors: Vec<Vec<Complex64>>,
}

impl QEvaluator {
    pub fn new(rho: &DensityMatrix) -> Self {
        let h = rho.hermitian_part();
        let eig = h.matrix().clone().symmetric_eigen();
        let max = eig
            .eigenvalues
            .iter()
            .fold(0.0f64, |m, v| m.max(v.abs()));
        let mut weights = Vec::new();
        let mut vectors = Vec::new();
        for (k, &w) in eig.eigenvalues.iter().enumerate() {
            if w.abs() <= 1e-15 * max {
                continue;
            }
            weights.push(w);
            vectors.push(eig.eigenvectors.column(k).iter().map(|z| z.conj()).collect());
        }
        QEvaluator {
            dim: rho.dim(),
            weights,
            vectors,
        }
    }

    pub fn rank(&self) -> usize {
        self.weights.len()
    }

    pub fn eval(&self, alpha: Complex64) -> f64 {
        let amps = coherent_amplitudes(alpha, self.dim);
        let mut q = 0.0;
        for (w, v) in self.weights.iter().zip(&self.vectors) {
            let overlap: Complex64 = v.iter().zip(&amps).map(|(a, b)| a * b).sum();
            q += w * overlap.norm_sqr();
        }
        q.max(0.0) / PI
    }
}

/// Mean and covariance of (x, y).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseSpaceMoments {
    pub mean: Complex64,
    /// Row/column order (x, y).
    pub covariance: Matrix2<f64>,
}

/// Exact mean and covariance of the Q-distribution of ρ.
///
/// Q-samples are antinormally ordered: E|α|² = ⟨n̂⟩ + 1, E[α²] = ⟨a²⟩.
pub fn q_moments(rho: &DensityMatrix) -> PhaseSpaceMoments {
    let tr = rho.trace();
    let a = rho.expect_annihilation() / tr;
    let a2 = rho.expect_annihilation_sq() / tr;
    let n = crate::fock::mean_photon_number(rho) / tr;
    let vxx = 0.5 * (n + 1.0 + a2.re) - a.re * a.re;
    let vyy = 0.5 * (n + 1.0 - a2.re) - a.im * a.im;
    let vxy = 0.5 * a2.im - a.re * a.im;
    PhaseSpaceMoments {
        mean: a,
        covariance: Matrix2::new(vxx, vxy, vxy, vyy),
    }
}

/// Unbiased sample mean and covariance.
pub fn empirical_moments(set: &SampleSet) -> Result<PhaseSpaceMoments> {
    let n = set.count();
    if n < 2 {
        return Err(Error::domain("empirical moments need at least two samples"));
    }
    let nf = n as f64;
    let (sx, sy) = set
        .iter()
        .fold((0.0, 0.0), |(sx, sy), s| (sx + s.x, sy + s.y));
    let (mx, my) = (sx / nf, sy / nf);
    let (mut cxx, mut cxy, mut cyy) = (0.0, 0.0, 0.0);
    for s in set.iter() {
        let (dx, dy) = (s.x - mx, s.y - my);
        cxx += dx * dx;
        cxy += dx * dy;
        cyy += dy * dy;
    }
    let k = 1.0 / (nf - 1.0);
    Ok(PhaseSpaceMoments {
        mean: Complex64::new(mx, my),
        covariance: Matrix2::new(cxx * k, cxy * k, cxy * k, cyy * k),
    })
}

/// Proposal covariance inflation of the rejection sampler.
pub const PROPOSAL_INFLATION: f64 = 1.5;
/// Safety margin applied to the grid-searched envelope constant.
pub const ENVELOPE_MARGIN: f64 = 1.2;
/// Half-width of the envelope search box in proposal standard deviations.
pub const ENVELOPE_BOX_SIGMAS: f64 = 5.0;
const ENVELOPE_GRID: usize = 121;

/// Counters from a sampling run.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SamplerStats {
    pub proposals: u64,
    pub accepted: u64,
}

impl SamplerStats {
    pub fn acceptance_rate(&self) -> f64 {
        if self.proposals == 0 {
            0.0
        } else {
            self.accepted as f64 / self.proposals as f64
        }
    }
}

/// Rejection sampler for the Q-function of a fixed state.
///
/// The proposal is a bivariate Gaussian with the state's Q mean and 1.5× its
/// Q covariance; the envelope constant is the maximum of Q/proposal over a
/// 5σ grid times 1.2, and every accepted draw re-checks the bound.
///
/// Random streams are ChaCha20 seeded with `seed`, one stream per worker
/// (stream id = worker index), so output is reproducible for a fixed worker count.
#[derive(Debug, Clone)]
pub struct QSampler {
    q: QEvaluator,
    mean: Vector2<f64>,
    chol: Matrix2<f64>,
    /// Inverse of the proposal covariance.
    precision: Matrix2<f64>,
    log_norm: f64,
    envelope: f64,
}

impl QSampler {
    pub fn new(rho: &DensityMatrix) -> Result<Self> {
        let moments = q_moments(rho);
        let cov = moments.covariance * PROPOSAL_INFLATION;
        let chol = cov
            .cholesky()
            .ok_or_else(|| Error::Degenerate("proposal covariance is not positive definite".into()))?
            .l();
        let precision = cov
            .try_inverse()
            .ok_or_else(|| Error::Degenerate("singular proposal covariance".into()))?;
        let log_norm = -(2.0 * PI).ln() - 0.5 * cov.determinant().ln();
        let mut sampler = QSampler {
            q: QEvaluator::new(rho),
            mean: Vector2::new(moments.mean.re, moments.mean.im),
            chol,
            precision,
            log_norm,
            envelope: 0.0,
        };
        let mut ratio_max = 0.0f64;
        let step = 2.0 * ENVELOPE_BOX_SIGMAS / (ENVELOPE_GRID - 1) as f64;
        for i in 0..ENVELOPE_GRID {
            for j in 0..ENVELOPE_GRID {
                let z = Vector2::new(
                    -ENVELOPE_BOX_SIGMAS + i as f64 * step,
                    -ENVELOPE_BOX_SIGMAS + j as f64 * step,
                );
                let p = sampler.mean + sampler.chol * z;
                let alpha = Complex64::new(p.x, p.y);
                let ratio = sampler.q.eval(alpha) / sampler.proposal_density(&p);
                ratio_max = ratio_max.max(ratio);
            }
        }
        if !(ratio_max > 0.0) || !ratio_max.is_finite() {
            return Err(Error::Degenerate("Q-function vanishes on the envelope grid".into()));
        }
        sampler.envelope = ratio_max * ENVELOPE_MARGIN;
        Ok(sampler)
    }

    /// Envelope constant M with Q ≤ M·g.
    pub fn envelope(&self) -> f64 {
        self.envelope
    }

    fn proposal_density(&self, p: &Vector2<f64>) -> f64 {
        let d = p - self.mean;
        (self.log_norm - 0.5 * (d.transpose() * self.precision * d)[(0, 0)]).exp()
    }

    fn draw_stream(
        &self,
        seed: u64,
        stream: u64,
        count: usize,
    ) -> Result<(Vec<QuadratureSample>, SamplerStats)> {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        let mut out = Vec::with_capacity(count);
        let mut stats = SamplerStats::default();
        while out.len() < count {
            let z = Vector2::new(rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal));
            let u: f64 = rng.random();
            stats.proposals += 1;
            let p = self.mean + self.chol * z;
            let alpha = Complex64::new(p.x, p.y);
            let target = self.q.eval(alpha);
            let bound = self.envelope * self.proposal_density(&p);
            if target > bound {
                return Err(Error::EnvelopeViolation {
                    x: p.x,
                    y: p.y,
                    target,
                    envelope: bound,
                });
            }
            if u * bound < target {
                out.push(QuadratureSample::new(p.x, p.y));
                stats.accepted += 1;
            }
        }
        Ok((out, stats))
    }

    /// Draws `count` samples split over `workers` independent streams, concatenated
    /// in worker order.
    pub fn sample(
        &self,
        count: usize,
        seed: u64,
        workers: usize,
    ) -> Result<(SampleSet, SamplerStats)> {
        if count == 0 {
            return Err(Error::domain("sample count must be >= 1"));
        }
        let workers = workers.clamp(1, count);
        let base = count / workers;
        let extra = count % workers;
        let parts: Vec<Result<(Vec<QuadratureSample>, SamplerStats)>> = (0..workers)
            .into_par_iter()
            .map(|w| {
                let n = base + usize::from(w < extra);
                self.draw_stream(seed, w as u64, n)
            })
            .collect();
        let mut samples = Vec::with_capacity(count);
        let mut stats = SamplerStats::default();
        for part in parts {
            let (s, st) = part?;
            samples.extend(s);
            stats.proposals += st.proposals;
            stats.accepted += st.accepted;
        }
        let meta = SampleMeta {
            seed,
            source: "sample_q".into(),
            generation: 0,
            workers: workers as u32,
        };
        Ok((SampleSet::new(samples, meta), stats))
    }
}

/// Draws `count` i.i.d. Q-function samples of ρ, one RNG stream per rayon thread.
pub fn sample_q(rho: &DensityMatrix, count: usize, seed: u64) -> Result<SampleSet> {
    sample_q_with_workers(rho, count, seed, rayon::current_num_threads())
}

pub fn sample_q_with_workers(
    rho: &DensityMatrix,
    count: usize,
    seed: u64,
    workers: usize,
) -> Result<SampleSet> {
    if count == 0 {
        return Err(Error::domain("sample count must be >= 1"));
    }
    Ok(QSampler::new(rho)?.sample(count, seed, workers)?.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{coherent_state, density_from_pure, odd_cat, squeezed_vacuum, FockVector};
    use approx::assert_abs_diff_eq;

    fn vac(dim: usize) -> DensityMatrix {
        density_from_pure(&FockVector::vacuum(dim).unwrap())
    }

    #[test]
    fn vacuum_q_values() {
        assert_abs_diff_eq!(q_value(&vac(6), Complex64::new(0.0, 0.0)), 1.0 / PI, epsilon = 1e-15);
        assert_abs_diff_eq!(q_value(&vac(6), Complex64::new(2.0, 0.0)), (-4.0f64).exp() / PI, epsilon = 1e-15);
        assert_abs_diff_eq!(q_value(&vac(6), Complex64::new(0.0, 2.0)), 0.00583, epsilon = 1e-5);
        let one = density_from_pure(&FockVector::basis(1, 6).unwrap());
        assert_eq!(q_value(&one, Complex64::new(0.0, 0.0)), 0.0);
    }

    #[test]
    fn evaluator_matches_direct() {
        let rho = crate::fock::apply_loss(&density_from_pure(&odd_cat(1.4, 20).unwrap()), 0.7).unwrap();
        let ev = QEvaluator::new(&rho);
        for &(x, y) in &[(0.0, 0.0), (1.2, -0.3), (-2.5, 0.7), (0.1, 3.0)] {
            let a = Complex64::new(x, y);
            assert_abs_diff_eq!(ev.eval(a), q_value(&rho, a), epsilon = 1e-14);
        }
        let pure = density_from_pure(&odd_cat(1.4, 20).unwrap());
        assert_eq!(QEvaluator::new(&pure).rank(), 1);
    }

    #[test]
    fn q_moments_of_known_states() {
        let m = q_moments(&vac(5));
        assert_abs_diff_eq!(m.covariance[(0, 0)], 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(m.covariance[(1, 1)], 0.5, epsilon = 1e-15);
        let coh = density_from_pure(&coherent_state(Complex64::new(1.0, -0.5), 30).unwrap());
        let m = q_moments(&coh);
        assert_abs_diff_eq!(m.mean.re, 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(m.mean.im, -0.5, epsilon = 1e-9);
        assert_abs_diff_eq!(m.covariance[(0, 1)], 0.0, epsilon = 1e-9);
        // y-squeezed vacuum: Var(y) = (1 + e^{−2r})/4
        let sq = density_from_pure(&squeezed_vacuum(0.5, 40).unwrap());
        let m = q_moments(&sq);
        assert_abs_diff_eq!(m.covariance[(1, 1)], (1.0 + (-1.0f64).exp()) / 4.0, epsilon = 1e-9);
        assert_abs_diff_eq!(m.covariance[(0, 0)], (1.0 + 1.0f64.exp()) / 4.0, epsilon = 1e-9);
    }

    #[test]
    fn empirical_moment_examples() {
        let set = SampleSet::new(
            vec![QuadratureSample::new(0.0, 0.0), QuadratureSample::new(2.0, 0.0)],
            SampleMeta::default(),
        );
        let m = empirical_moments(&set).unwrap();
        assert_eq!(m.mean, Complex64::new(1.0, 0.0));
        let same = SampleSet::new(vec![QuadratureSample::new(0.3, -1.0); 5], SampleMeta::default());
        let m = empirical_moments(&same).unwrap();
        assert_eq!(m.covariance, Matrix2::zeros());
        let one = SampleSet::new(vec![QuadratureSample::new(0.3, -1.0)], SampleMeta::default());
        assert!(empirical_moments(&one).is_err());
    }

    #[test]
    fn zero_count_is_rejected() {
        assert!(matches!(sample_q(&vac(4), 0, 1), Err(Error::Domain(_))));
    }

    #[test]
    fn sampling_is_deterministic_per_worker_count() {
        let rho = density_from_pure(&odd_cat(1.1, 16).unwrap());
        let a = sample_q_with_workers(&rho, 5000, 42, 3).unwrap();
        let b = sample_q_with_workers(&rho, 5000, 42, 3).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.meta.workers, 3);
        let c = sample_q_with_workers(&rho, 5000, 43, 3).unwrap();
        assert_ne!(a.samples, c.samples);
    }
}
