use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::DMatrix;
use num_complex::Complex64;
use statrs::function::factorial::ln_factorial;
use std::f64::consts::LN_2;

use crate::error::{Error, Result};
use crate::fock::DensityMatrix;

/// Fock matrix elements of the balanced beam splitter U with
/// U a₁† U† = (a₁† + a₂†)/√2 and U a₂† U† = (a₁† − a₂†)/√2, so that
/// U|a, b⟩ = |(a+b)/√2, (a−b)/√2⟩ for coherent inputs.
///
/// U conserves the total photon number N; block N holds
/// ⟨m, N−m|U|p, N−p⟩ at `[m·(N+1) + p]`, computed as
/// √(m! n! / p! q!) 2^{−N/2} Σ_k C(p,k) C(q,m−k) (−1)^{q−m+k}.
/// The alternating sum is evaluated exactly in 128-bit integers, which holds
/// for N ≤ 126 (two modes of up to 64 levels).
#[derive(Debug)]
pub struct BeamSplitter {
    blocks: Vec<Vec<f64>>,
}

/// Largest total photon number whose binomial sums fit in `i128`.
pub const EXACT_MAX_TOTAL: usize = 126;

impl BeamSplitter {
    /// Blocks for every total photon number up to `max_total`.
    pub fn new(max_total: usize) -> Self {
        let exact_top = max_total.min(EXACT_MAX_TOTAL);
        let pascal = pascal_triangle(exact_top);
        let mut blocks: Vec<Vec<f64>> = Vec::with_capacity(max_total + 1);
        for n in 0..=exact_top {
            blocks.push(exact_block(n, &pascal));
        }
        if max_total > EXACT_MAX_TOTAL {
            log::warn!(
                "beam splitter blocks above N = {EXACT_MAX_TOTAL} use the ladder recurrence; \
                 expect ~1e-9 orthogonality errors"
            );
        }
        for n in exact_top + 1..=max_total {
            let next = ladder_block(n, &blocks[n - 1]);
            blocks.push(next);
        }
        BeamSplitter { blocks }
    }

    /// Shared instance covering two modes of `dim` levels each (totals up to
    /// 2·dim − 2), built once per dim.
    pub fn for_dim(dim: usize) -> Arc<BeamSplitter> {
        static CACHE: OnceLock<Mutex<HashMap<usize, Arc<BeamSplitter>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let mut guard = cache.lock().unwrap_or_else(|e| e.into_inner());
        guard
            .entry(dim)
            .or_insert_with(|| Arc::new(BeamSplitter::new(2 * dim.max(1) - 2)))
            .clone()
    }

    pub fn max_total(&self) -> usize {
        self.blocks.len() - 1
    }

    /// ⟨m, n|U|p, q⟩
    pub fn element(&self, m: usize, n: usize, p: usize, q: usize) -> f64 {
        let total = m + n;
        if total != p + q || total > self.max_total() {
            return 0.0;
        }
        self.blocks[total][m * (total + 1) + p]
    }

    #[inline]
    pub(crate) fn block_element(&self, total: usize, m: usize, p: usize) -> f64 {
        self.blocks[total][m * (total + 1) + p]
    }
}

fn pascal_triangle(max_n: usize) -> Vec<Vec<i128>> {
    let mut rows: Vec<Vec<i128>> = Vec::with_capacity(max_n + 1);
    for n in 0..=max_n {
        let mut row = vec![1i128; n + 1];
        for k in 1..n {
            row[k] = rows[n - 1][k - 1] + rows[n - 1][k];
        }
        rows.push(row);
    }
    rows
}

fn exact_block(n: usize, pascal: &[Vec<i128>]) -> Vec<f64> {
    let lf = |k: usize| ln_factorial(k as u64);
    let mut block = vec![0.0; (n + 1) * (n + 1)];
    for m in 0..=n {
        for p in 0..=n {
            let q = n - p;
            let mut sum: i128 = 0;
            for k in m.saturating_sub(q)..=p.min(m) {
                let l = m - k;
                let term = pascal[p][k] * pascal[q][l];
                if (q - l) % 2 == 0 {
                    sum += term;
                } else {
                    sum -= term;
                }
            }
            if sum == 0 {
                continue;
            }
            let log_pre = 0.5 * (lf(m) + lf(n - m) - lf(p) - lf(q)) - 0.5 * n as f64 * LN_2;
            block[m * (n + 1) + p] = log_pre.exp() * sum as f64;
        }
    }
    block
}

/// Block N from block N−1 by applying the transformed creation operators.
fn ladder_block(n: usize, prev: &[f64]) -> Vec<f64> {
    let w = n;
    let mut block = vec![0.0; (n + 1) * (n + 1)];
    for p in 0..=n {
        // U|p, n−p⟩ from U|p−1, n−p⟩ (p > 0) or U|0, n−1⟩ (p = 0)
        let (src, sign, norm) = if p > 0 {
            (p - 1, 1.0, (2.0 * p as f64).sqrt())
        } else {
            (0, -1.0, (2.0 * n as f64).sqrt())
        };
        for m in 0..=n {
            let from_a1 = if m > 0 {
                (m as f64).sqrt() * prev[(m - 1) * w + src]
            } else {
                0.0
            };
            let from_a2 = if m < n {
                ((n - m) as f64).sqrt() * prev[m * w + src]
            } else {
                0.0
            };
            block[m * (n + 1) + p] = (from_a1 + sign * from_a2) / norm;
        }
    }
    block
}

/// Two-mode density matrix with composite index k = m·dim + n
/// (m: first mode, n: second mode).
#[derive(Debug, Clone, PartialEq)]
pub struct TwoModeDensity {
    dim: usize,
    m: DMatrix<Complex64>,
}

impl TwoModeDensity {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.m
    }

    pub fn index(&self, m: usize, n: usize) -> usize {
        m * self.dim + n
    }

    /// ⟨m, n|σ|m', n'⟩
    pub fn get(&self, m: usize, n: usize, mp: usize, np: usize) -> Complex64 {
        self.m[(self.index(m, n), self.index(mp, np))]
    }

    pub fn trace(&self) -> f64 {
        (0..self.m.nrows()).map(|k| self.m[(k, k)].re).sum()
    }

    pub fn product(a: &DensityMatrix, b: &DensityMatrix) -> Result<Self> {
        if a.dim() != b.dim() {
            return Err(Error::DimensionMismatch {
                left: a.dim(),
                right: b.dim(),
            });
        }
        let d = a.dim();
        let m = DMatrix::from_fn(d * d, d * d, |r, c| a.get(r / d, c / d) * b.get(r % d, c % d));
        Ok(TwoModeDensity { dim: d, m })
    }

    /// Tr₂[σ (I ⊗ E)] for diagonal E = Σ wₙ|n⟩⟨n|, unnormalized.
    pub fn herald_second(&self, weights: &[f64]) -> Result<DensityMatrix> {
        let d = self.dim;
        let out = DMatrix::from_fn(d, d, |a, b| {
            (0..d)
                .map(|n| self.m[(a * d + n, b * d + n)] * weights.get(n).copied().unwrap_or(0.0))
                .sum()
        });
        DensityMatrix::from_matrix(out)
    }

    /// Reduced state of the second mode.
    pub fn reduce_second(&self) -> Result<DensityMatrix> {
        let d = self.dim;
        let out = DMatrix::from_fn(d, d, |a, b| (0..d).map(|m| self.m[(m * d + a, m * d + b)]).sum());
        DensityMatrix::from_matrix(out)
    }
}

/// U(ρ₁ ⊗ ρ₂)U† with each output mode truncated to the input dim.
///
/// Exact whenever ρ₁ ⊗ ρ₂ has no weight on total photon numbers ≥ dim;
/// otherwise the part of the output with a mode above the truncation is dropped.
pub fn bs_two_mode(rho1: &DensityMatrix, rho2: &DensityMatrix) -> Result<TwoModeDensity> {
    if rho1.dim() != rho2.dim() {
        return Err(Error::DimensionMismatch {
            left: rho1.dim(),
            right: rho2.dim(),
        });
    }
    let d = rho1.dim();
    let bs = BeamSplitter::for_dim(d);
    let idx = |m: usize, n: usize| m * d + n;
    let mut out = DMatrix::from_element(d * d, d * d, Complex64::new(0.0, 0.0));
    for m in 0..d {
        for n in 0..d {
            let total = m + n;
            let p_lo = total.saturating_sub(d - 1);
            let p_hi = total.min(d - 1);
            for mp in 0..d {
                for np in 0..d {
                    if idx(mp, np) < idx(m, n) {
                        continue;
                    }
                    let total_p = mp + np;
                    let pp_lo = total_p.saturating_sub(d - 1);
                    let pp_hi = total_p.min(d - 1);
                    let mut acc = Complex64::new(0.0, 0.0);
                    for p in p_lo..=p_hi {
                        let u = bs.block_element(total, m, p);
                        if u == 0.0 {
                            continue;
                        }
                        for pp in pp_lo..=pp_hi {
                            let v = bs.block_element(total_p, mp, pp);
                            acc += rho1.get(p, pp) * rho2.get(total - p, total_p - pp) * (u * v);
                        }
                    }
                    out[(idx(m, n), idx(mp, np))] = acc;
                    out[(idx(mp, np), idx(m, n))] = acc.conj();
                }
            }
        }
    }
    Ok(TwoModeDensity { dim: d, m: out })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{coherent_state, density_from_pure, fidelity, FockVector};
    use approx::assert_abs_diff_eq;
    use statrs::function::factorial::{binomial, factorial};

    /// Direct binomial-sum formula for ⟨m, N−m|U|p, N−p⟩.
    fn binomial_element(m: usize, p: usize, total: usize) -> f64 {
        let q = total - p;
        let mut sum = 0.0;
        for k in 0..=p {
            if m < k || m - k > q {
                continue;
            }
            let l = m - k;
            let sign = if (q - l) % 2 == 0 { 1.0 } else { -1.0 };
            sum += sign * binomial(p as u64, k as u64) * binomial(q as u64, l as u64);
        }
        let n = total - m;
        let pre = (factorial(m as u64) * factorial(n as u64) / (factorial(p as u64) * factorial(q as u64))).sqrt();
        pre * sum / 2f64.powf(total as f64 / 2.0)
    }

    #[test]
    fn recurrence_matches_binomial_sum() {
        let bs = BeamSplitter::new(12);
        for total in 0..=12 {
            for m in 0..=total {
                for p in 0..=total {
                    assert_abs_diff_eq!(
                        bs.element(m, total - m, p, total - p),
                        binomial_element(m, p, total),
                        epsilon = 1e-12
                    );
                }
            }
        }
    }

    #[test]
    fn blocks_are_orthogonal() {
        let bs = BeamSplitter::new(126);
        let n = 126;
        for p in [0, 17, 63, 126] {
            for q in [0, 30, 63, 125] {
                let dot: f64 = (0..=n).map(|m| bs.block_element(n, m, p) * bs.block_element(n, m, q)).sum();
                assert_abs_diff_eq!(dot, if p == q { 1.0 } else { 0.0 }, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn ladder_fallback_agrees_with_exact() {
        let bs = BeamSplitter::new(30);
        let mut prev = bs.blocks[19].clone();
        for n in 20..=30 {
            let next = ladder_block(n, &prev);
            for (a, b) in next.iter().zip(&bs.blocks[n]) {
                assert_abs_diff_eq!(a, b, epsilon = 1e-11);
            }
            prev = next;
        }
    }

    #[test]
    fn conserves_total_photon_number() {
        let bs = BeamSplitter::new(6);
        assert_eq!(bs.element(1, 1, 3, 0), 0.0);
        assert_eq!(bs.element(0, 0, 0, 0), 1.0);
    }

    #[test]
    fn vacuum_passes_through() {
        let vac = density_from_pure(&FockVector::vacuum(5).unwrap());
        let out = bs_two_mode(&vac, &vac).unwrap();
        assert_abs_diff_eq!(out.get(0, 0, 0, 0).re, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(out.trace(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn equal_coherent_states_interfere() {
        let beta = Complex64::new(0.7, 0.2);
        let d = 12;
        let rho = density_from_pure(&coherent_state(beta, d).unwrap());
        let out = bs_two_mode(&rho, &rho).unwrap();
        // Second port is vacuum, first port holds |√2 β⟩.
        let port1 = out.herald_second(&[1.0]).unwrap();
        let target = coherent_state(beta * 2f64.sqrt(), d).unwrap();
        assert!(fidelity(&port1.normalized().unwrap(), &target).unwrap() >= 1.0 - 1e-6);
        assert_abs_diff_eq!(out.reduce_second().unwrap().get(0, 0).re, 1.0, epsilon = 1e-6);
    }

    #[test]
    fn block_structure_respected() {
        let a = crate::fock::DensityMatrix::maximally_mixed(4).unwrap();
        let out = bs_two_mode(&a, &a).unwrap();
        for m in 0..4 {
            for n in 0..4 {
                for mp in 0..4 {
                    for np in 0..4 {
                        if m + n != mp + np {
                            assert_eq!(out.get(m, n, mp, np).norm(), 0.0);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn dimension_mismatch() {
        let a = crate::fock::DensityMatrix::maximally_mixed(4).unwrap();
        let b = crate::fock::DensityMatrix::maximally_mixed(5).unwrap();
        assert!(bs_two_mode(&a, &b).is_err());
    }
}
