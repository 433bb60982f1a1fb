//! Two-copy growing on QHD data.
//!
//! Consecutive samples (2j, 2j+1) are combined on a virtual balanced beam
//! splitter, α± = (α_{2j} ± α_{2j+1})/√2, and the plus-port value is kept
//! whenever the minus port falls inside the disc |α−|² < n̄. The oracle side
//! computes the exact heralded state of the same procedure in the Fock basis.

mod beamsplitter;
mod oracle;

pub use beamsplitter::{bs_two_mode, BeamSplitter, TwoModeDensity};
pub use oracle::{breed_oracle, herald_povm_weights, MIN_SUCCESS};

use std::f64::consts::FRAC_1_SQRT_2;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::qhd::{QuadratureSample, SampleSet};

/// Settings of an iterated growing run.
#[derive(Debug, Clone, PartialEq)]
pub struct BreedingConfig {
    pub nbar: f64,
    pub steps: usize,
    /// Optional per-step thresholds; step k uses `thresholds[k]` when present.
    pub thresholds: Option<Vec<f64>>,
}

impl BreedingConfig {
    pub fn new(nbar: f64, steps: usize) -> Result<Self> {
        let cfg = BreedingConfig {
            nbar,
            steps,
            thresholds: None,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_thresholds(mut self, thresholds: Vec<f64>) -> Result<Self> {
        self.thresholds = Some(thresholds);
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.nbar >= 0.0) {
            return Err(Error::domain(format!("nbar must be >= 0, got {}", self.nbar)));
        }
        if self.steps < 1 {
            return Err(Error::domain("breeding needs at least one step"));
        }
        if let Some(t) = &self.thresholds {
            if t.iter().any(|v| !(*v >= 0.0)) {
                return Err(Error::domain("per-step thresholds must be >= 0"));
            }
        }
        Ok(())
    }

    /// Threshold used at step `k` (0-based).
    pub fn threshold(&self, k: usize) -> f64 {
        self.thresholds
            .as_ref()
            .and_then(|t| t.get(k).copied())
            .unwrap_or(self.nbar)
    }
}

impl Default for BreedingConfig {
    fn default() -> Self {
        BreedingConfig {
            nbar: 1.3,
            steps: 2,
            thresholds: None,
        }
    }
}

/// Bookkeeping of one growing step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BreedingStats {
    pub input_count: usize,
    pub pair_count: usize,
    pub accepted_count: usize,
    pub acceptance_fraction: f64,
    /// Set when no pair was accepted.
    pub empty: bool,
}

/// Output of a step with the discarded minus-port values retained for debugging.
#[derive(Debug, Clone, PartialEq)]
pub struct BreedOutcome {
    pub plus: SampleSet,
    /// Minus-port samples of the accepted pairs, in the same order as `plus`.
    pub minus: Vec<QuadratureSample>,
    pub stats: BreedingStats,
}

/// 50:50 combination of two outcomes: ((a+b)/√2, (a−b)/√2).
pub fn virtual_bs(a: QuadratureSample, b: QuadratureSample) -> (QuadratureSample, QuadratureSample) {
    let plus = QuadratureSample::new((a.x + b.x) * FRAC_1_SQRT_2, (a.y + b.y) * FRAC_1_SQRT_2);
    let minus = QuadratureSample::new((a.x - b.x) * FRAC_1_SQRT_2, (a.y - b.y) * FRAC_1_SQRT_2);
    (plus, minus)
}

const PAIRS_PER_TASK: usize = 1 << 16;

/// One growing step, keeping the minus-port values of accepted pairs.
pub fn breed_step_detailed(set: &SampleSet, nbar: f64) -> Result<BreedOutcome> {
    if set.count() < 2 {
        return Err(Error::domain("breeding needs at least two samples"));
    }
    if !(nbar >= 0.0) {
        return Err(Error::domain(format!("nbar must be >= 0, got {nbar}")));
    }
    let pair_count = set.count() / 2;
    let paired = &set.samples[..2 * pair_count];
    let parts: Vec<Vec<(QuadratureSample, QuadratureSample)>> = paired
        .par_chunks(2 * PAIRS_PER_TASK)
        .map(|chunk| {
            chunk
                .chunks_exact(2)
                .map(|p| virtual_bs(p[0], p[1]))
                .filter(|(_, minus)| minus.norm_sqr() < nbar)
                .collect()
        })
        .collect();
    let accepted: Vec<(QuadratureSample, QuadratureSample)> = parts.concat();
    let accepted_count = accepted.len();
    if accepted_count == 0 {
        log::warn!("breed_step: no pair accepted at nbar = {nbar}");
    }
    let (plus, minus): (Vec<_>, Vec<_>) = accepted.into_iter().unzip();
    let mut meta = set.meta.clone();
    meta.generation = set.meta.generation + 1;
    meta.source = format!("breed_step(nbar={nbar}) of {}", set.meta.source);
    Ok(BreedOutcome {
        plus: SampleSet::new(plus, meta),
        minus,
        stats: BreedingStats {
            input_count: set.count(),
            pair_count,
            accepted_count,
            acceptance_fraction: accepted_count as f64 / pair_count as f64,
            empty: accepted_count == 0,
        },
    })
}

/// One growing step: pairs (2j, 2j+1) in stored order, keeps α+ iff |α−|² < n̄.
pub fn breed_step(set: &SampleSet, nbar: f64) -> Result<(SampleSet, BreedingStats)> {
    let out = breed_step_detailed(set, nbar)?;
    Ok((out.plus, out.stats))
}

/// Repeated growing steps, each consuming the previous output. Stops early
/// (with a warning) once a generation has fewer than two samples.
pub fn breed_iterate(set: &SampleSet, config: &BreedingConfig) -> Result<Vec<(SampleSet, BreedingStats)>> {
    config.validate()?;
    if set.is_empty() {
        return Err(Error::domain("breeding an empty sample set"));
    }
    let mut out: Vec<(SampleSet, BreedingStats)> = Vec::with_capacity(config.steps);
    for k in 0..config.steps {
        let input = out.last().map(|(s, _)| s).unwrap_or(set);
        if input.count() < 2 {
            log::warn!(
                "breed_iterate: generation {} has {} sample(s); stopping after {k} step(s)",
                input.meta.generation,
                input.count()
            );
            break;
        }
        let step = breed_step(input, config.threshold(k))?;
        out.push(step);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qhd::SampleMeta;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn s(x: f64, y: f64) -> QuadratureSample {
        QuadratureSample::new(x, y)
    }

    fn set(points: &[(f64, f64)]) -> SampleSet {
        SampleSet::new(points.iter().map(|&(x, y)| s(x, y)).collect(), SampleMeta::default())
    }

    #[test]
    fn virtual_bs_examples() {
        let (p, m) = virtual_bs(s(1.0, 0.0), s(1.0, 0.0));
        assert_abs_diff_eq!(p.x, 2f64.sqrt(), epsilon = 1e-15);
        assert_eq!((p.y, m.x, m.y), (0.0, 0.0, 0.0));
        let (p, m) = virtual_bs(s(1.0, 0.0), s(-1.0, 0.0));
        assert_eq!((p.x, p.y), (0.0, 0.0));
        assert_abs_diff_eq!(m.x, 2f64.sqrt(), epsilon = 1e-15);
        let (a, b) = (s(0.3, -0.7), s(1.2, 0.4));
        let (p, m) = virtual_bs(a, b);
        assert_abs_diff_eq!(p.norm_sqr() + m.norm_sqr(), a.norm_sqr() + b.norm_sqr(), epsilon = 1e-14);
    }

    #[test]
    fn hand_evaluated_step() {
        let input = set(&[(1.0, 0.0), (1.0, 0.0), (1.0, 0.0), (-1.0, 0.0)]);
        let (out, stats) = breed_step(&input, 0.5).unwrap();
        assert_eq!(out.count(), 1);
        assert_abs_diff_eq!(out.samples[0].x, 2f64.sqrt(), epsilon = 1e-15);
        assert_eq!(out.samples[0].y, 0.0);
        assert_eq!(stats.pair_count, 2);
        assert_eq!(stats.accepted_count, 1);
        assert_eq!(stats.acceptance_fraction, 0.5);
        assert_eq!(out.meta.generation, 1);
    }

    #[test]
    fn threshold_extremes() {
        let pts: Vec<(f64, f64)> = (0..101).map(|k| ((k as f64 * 0.37).sin(), (k as f64 * 0.11).cos())).collect();
        let input = set(&pts);
        let (none, st) = breed_step(&input, 0.0).unwrap();
        assert!(none.is_empty() && st.empty);
        let (all, st) = breed_step(&input, f64::INFINITY).unwrap();
        assert_eq!(all.count(), 50);
        assert_eq!(st.pair_count, 50);
        assert_eq!(st.accepted_count, st.pair_count);
    }

    #[test]
    fn step_errors() {
        assert!(breed_step(&set(&[(0.0, 0.0)]), 1.0).is_err());
        assert!(breed_step(&set(&[(0.0, 0.0), (1.0, 1.0)]), f64::NAN).is_err());
        assert!(BreedingConfig::new(-1.0, 1).is_err());
        assert!(BreedingConfig::new(1.0, 0).is_err());
    }

    #[test]
    fn detailed_step_keeps_minus_port() {
        let input = set(&[(1.0, 0.0), (0.8, 0.1), (3.0, 0.0), (-3.0, 0.0)]);
        let out = breed_step_detailed(&input, 1.0).unwrap();
        assert_eq!(out.minus.len(), 1);
        assert!(out.minus[0].norm_sqr() < 1.0);
    }

    #[test]
    fn iterate_threads_generations() {
        let pts: Vec<(f64, f64)> = (0..64).map(|k| (k as f64 * 0.01, 0.0)).collect();
        let input = set(&pts);
        let cfg = BreedingConfig::new(f64::INFINITY, 3).unwrap();
        let gens = breed_iterate(&input, &cfg).unwrap();
        let counts: Vec<usize> = gens.iter().map(|(s, _)| s.count()).collect();
        assert_eq!(counts, vec![32, 16, 8]);
        for w in gens.windows(2) {
            assert_eq!(w[1].1.input_count, w[0].1.accepted_count);
        }
        assert_eq!(gens[2].0.meta.generation, 3);
        let single = breed_iterate(&input, &BreedingConfig::new(0.7, 1).unwrap()).unwrap();
        assert_eq!(single[0], breed_step(&input, 0.7).unwrap());
    }

    #[test]
    fn iterate_stops_when_exhausted() {
        let input = set(&[(0.0, 0.0), (5.0, 0.0), (0.0, 0.0), (0.0, 0.0)]);
        let gens = breed_iterate(&input, &BreedingConfig::new(0.1, 4).unwrap()).unwrap();
        assert_eq!(gens.len(), 1);
        assert_eq!(gens[0].0.count(), 1);
    }

    #[test]
    fn per_step_thresholds() {
        let cfg = BreedingConfig::new(1.3, 3).unwrap().with_thresholds(vec![0.5, 2.0]).unwrap();
        assert_eq!(cfg.threshold(0), 0.5);
        assert_eq!(cfg.threshold(1), 2.0);
        assert_eq!(cfg.threshold(2), 1.3);
    }

    proptest! {
        #[test]
        fn virtual_bs_preserves_energy(ax in -10.0f64..10.0, ay in -10.0f64..10.0,
                                       bx in -10.0f64..10.0, by in -10.0f64..10.0) {
            let (a, b) = (s(ax, ay), s(bx, by));
            let (p, m) = virtual_bs(a, b);
            prop_assert!((p.norm_sqr() + m.norm_sqr() - a.norm_sqr() - b.norm_sqr()).abs() < 1e-12);
        }

        #[test]
        fn stats_invariants(n in 2usize..200, nbar in 0.0f64..5.0, seed in any::<u64>()) {
            let pts: Vec<(f64, f64)> = (0..n)
                .map(|k| {
                    let t = (k as f64 + 1.0) * (seed % 1000) as f64 * 1e-3 + k as f64;
                    (2.0 * t.sin(), 1.5 * (1.3 * t).cos())
                })
                .collect();
            let (out, st) = breed_step(&set(&pts), nbar).unwrap();
            prop_assert_eq!(st.pair_count, n / 2);
            prop_assert!(st.accepted_count <= st.pair_count);
            prop_assert_eq!(out.count(), st.accepted_count);
            prop_assert_eq!(st.acceptance_fraction, st.accepted_count as f64 / st.pair_count as f64);
        }
    }
}
