//! Goodness-of-fit helpers for comparing samples with model densities.

use rayon::prelude::*;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};
use crate::qhd::SampleSet;
use crate::quasiprob::GridSpec;

/// Outcome of a Pearson χ² test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChiSquare {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
    /// Bins left after pooling.
    pub bins: usize,
}

/// Pearson χ² of `observed` against `expected` counts.
///
/// Bins are walked in order and merged until each pooled bin expects at
/// least `min_expected`; a short remainder is folded into the last bin.
/// Degrees of freedom are bins − 1 − `fitted_params`.
pub fn chi_square(observed: &[f64], expected: &[f64], min_expected: f64, fitted_params: usize) -> Result<ChiSquare> {
    if observed.len() != expected.len() {
        return Err(Error::DimensionMismatch {
            left: observed.len(),
            right: expected.len(),
        });
    }
    let mut pooled: Vec<(f64, f64)> = Vec::new();
    let (mut o, mut e) = (0.0, 0.0);
    for (&ob, &ex) in observed.iter().zip(expected) {
        o += ob;
        e += ex;
        if e >= min_expected {
            pooled.push((o, e));
            o = 0.0;
            e = 0.0;
        }
    }
    if e > 0.0 || o > 0.0 {
        match pooled.last_mut() {
            Some(last) => {
                last.0 += o;
                last.1 += e;
            }
            None => pooled.push((o, e)),
        }
    }
    if pooled.len() < 2 + fitted_params {
        return Err(Error::Degenerate(format!(
            "only {} bins after pooling, not enough for a χ² test",
            pooled.len()
        )));
    }
    let statistic: f64 = pooled.iter().map(|&(o, e)| (o - e) * (o - e) / e).sum();
    let dof = pooled.len() - 1 - fitted_params;
    let dist = ChiSquared::new(dof as f64).map_err(|e| Error::domain(e.to_string()))?;
    Ok(ChiSquare {
        statistic,
        dof,
        p_value: dist.sf(statistic),
        bins: pooled.len(),
    })
}

/// 5-point Gauss–Legendre nodes and weights on [−1, 1].
const GL_NODES: [f64; 5] = [
    -0.906_179_845_938_664,
    -0.538_469_310_105_683,
    0.0,
    0.538_469_310_105_683,
    0.906_179_845_938_664,
];
const GL_WEIGHTS: [f64; 5] = [
    0.236_926_885_056_189,
    0.478_628_670_499_366,
    0.568_888_888_888_889,
    0.478_628_670_499_366,
    0.236_926_885_056_189,
];

/// ∫ f over every cell of `grid`, x-fastest, by 5×5 Gauss–Legendre per cell.
pub fn cell_integrals<F>(grid: &GridSpec, f: F) -> Vec<f64>
where
    F: Fn(f64, f64) -> f64 + Sync,
{
    let (hx, hy) = (0.5 * grid.dx(), 0.5 * grid.dy());
    (0..grid.len())
        .into_par_iter()
        .map(|k| {
            let (cx, cy) = (grid.x(k % grid.nx), grid.y(k / grid.nx));
            let mut acc = 0.0;
            for (tx, wx) in GL_NODES.iter().zip(GL_WEIGHTS) {
                for (ty, wy) in GL_NODES.iter().zip(GL_WEIGHTS) {
                    acc += wx * wy * f(cx + tx * hx, cy + ty * hy);
                }
            }
            acc * hx * hy
        })
        .collect()
}

/// Sample counts per cell of `grid` (x-fastest) followed by the count outside it.
pub fn cell_counts(set: &SampleSet, grid: &GridSpec) -> (Vec<f64>, f64) {
    let mut counts = vec![0.0; grid.len()];
    let mut outside = 0.0;
    for s in set.iter() {
        match grid.cell_of(s.x, s.y) {
            Some((i, j)) => counts[j * grid.nx + i] += 1.0,
            None => outside += 1.0,
        }
    }
    (counts, outside)
}

/// χ² test of `set` against density `f` on the cells of `grid`, with one
/// extra bin for everything outside the grid.
pub fn chi_square_against_density<F>(set: &SampleSet, grid: &GridSpec, f: F) -> Result<ChiSquare>
where
    F: Fn(f64, f64) -> f64 + Sync,
{
    let n = set.count() as f64;
    let probs = cell_integrals(grid, f);
    let inside: f64 = probs.iter().sum();
    let (mut observed, outside) = cell_counts(set, grid);
    let mut expected: Vec<f64> = probs.iter().map(|p| p * n).collect();
    observed.push(outside);
    expected.push((1.0 - inside).max(0.0) * n);
    chi_square(&observed, &expected, 5.0, 0)
}

/// Standard error √(p(1−p)/n) of a binomial proportion.
pub fn binomial_se(p: f64, n: usize) -> f64 {
    (p * (1.0 - p) / n as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qhd::{QuadratureSample, SampleMeta};
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn chi_square_reference_value() {
        // (10−8)²/8 + (6−8)²/8 + (8−8)²/8 = 1 on 2 dof
        let r = chi_square(&[10.0, 6.0, 8.0], &[8.0, 8.0, 8.0], 5.0, 0).unwrap();
        assert_abs_diff_eq!(r.statistic, 1.0, epsilon = 1e-12);
        assert_eq!(r.dof, 2);
        assert_abs_diff_eq!(r.p_value, (-0.5f64).exp(), epsilon = 1e-12);
    }

    #[test]
    fn pooling_merges_sparse_bins() {
        let r = chi_square(&[1.0, 2.0, 3.0, 9.0, 1.0], &[2.0, 2.0, 2.0, 10.0, 1.0], 5.0, 0).unwrap();
        // pooled: (6, 6), (10, 11)
        assert_eq!(r.bins, 2);
        assert_abs_diff_eq!(r.statistic, 1.0 / 11.0, epsilon = 1e-12);
        assert!(chi_square(&[1.0], &[1.0], 5.0, 0).is_err());
        assert!(chi_square(&[1.0, 2.0], &[1.0], 5.0, 0).is_err());
    }

    #[test]
    fn gauss_legendre_is_exact_for_polynomials() {
        let grid = GridSpec::cells(-1.0, 1.0, 4).unwrap();
        let ints = cell_integrals(&grid, |x, y| x.powi(8) * y.powi(2) + 1.0);
        let total: f64 = ints.iter().sum();
        assert_abs_diff_eq!(total, (2.0 / 9.0) * (2.0 / 3.0) + 4.0, epsilon = 1e-12);
    }

    #[test]
    fn uniform_samples_pass() {
        let mut rng = ChaCha20Rng::seed_from_u64(4);
        let samples: Vec<QuadratureSample> = (0..20_000)
            .map(|_| QuadratureSample::new(rng.random::<f64>(), rng.random::<f64>()))
            .collect();
        let set = SampleSet::new(samples, SampleMeta::default());
        let grid = GridSpec::cells(0.0, 1.0, 10).unwrap();
        let r = chi_square_against_density(&set, &grid, |x, y| {
            if (0.0..1.0).contains(&x) && (0.0..1.0).contains(&y) {
                1.0
            } else {
                0.0
            }
        })
        .unwrap();
        assert!(r.p_value > 1e-3, "{r:?}");
        let skewed = chi_square_against_density(&set, &grid, |x, _| 2.0 * x).unwrap();
        assert!(skewed.p_value < 1e-10);
    }

    #[test]
    fn binomial_se_example() {
        assert_abs_diff_eq!(binomial_se(0.5, 100), 0.05, epsilon = 1e-15);
    }
}
