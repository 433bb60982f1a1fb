use nalgebra::DMatrix;
use num_complex::Complex64;
use statrs::function::gamma::gamma_lr;

use super::beamsplitter::BeamSplitter;
use crate::error::{Error, Result};
use crate::fock::DensityMatrix;

/// Fock-diagonal weights of the heralding POVM element
/// E = ∫_{|α|² < n̄} |α⟩⟨α| d²α/π, i.e. γₙ = P(n+1, n̄).
pub fn herald_povm_weights(nbar: f64, dim: usize) -> Result<Vec<f64>> {
    if !(nbar >= 0.0) {
        return Err(Error::domain(format!("threshold must be >= 0, got {nbar}")));
    }
    Ok((0..dim)
        .map(|n| {
            if nbar == f64::INFINITY {
                1.0
            } else if nbar == 0.0 {
                0.0
            } else {
                gamma_lr(n as f64 + 1.0, nbar)
            }
        })
        .collect())
}

/// Heralding probabilities below this are treated as impossible.
pub const MIN_SUCCESS: f64 = 1e-12;

/// Exact state and success probability of one growing step on two copies of ρ.
///
/// ρ_out = Tr₂[U(ρ⊗ρ)U† (I⊗E)] / P. The output keeps every Fock level the
/// beam splitter can populate (dim 2·d − 1), so no truncation error enters;
/// use [`DensityMatrix::compacted`] to trim the empty tail.
pub fn breed_oracle(rho: &DensityMatrix, nbar: f64) -> Result<(DensityMatrix, f64)> {
    let d = rho.dim();
    let out_dim = 2 * d - 1;
    let gamma = herald_povm_weights(nbar, out_dim)?;
    let bs = BeamSplitter::for_dim(d);
    let mut out = DMatrix::from_element(out_dim, out_dim, Complex64::new(0.0, 0.0));
    let valid = |total: usize| (total.saturating_sub(d - 1), total.min(d - 1));
    for n in 0..out_dim {
        let g = gamma[n];
        if g == 0.0 {
            continue;
        }
        for m in 0..out_dim {
            let total = m + n;
            if total > 2 * d - 2 {
                break;
            }
            let (lo, hi) = valid(total);
            for mp in m..out_dim {
                let total_p = mp + n;
                if total_p > 2 * d - 2 {
                    break;
                }
                let (lo_p, hi_p) = valid(total_p);
                let mut acc = Complex64::new(0.0, 0.0);
                for p in lo..=hi {
                    let u = bs.block_element(total, m, p);
                    let mut inner = Complex64::new(0.0, 0.0);
                    for pp in lo_p..=hi_p {
                        inner += rho.get(p, pp)
                            * rho.get(total - p, total_p - pp)
                            * bs.block_element(total_p, mp, pp);
                    }
                    acc += inner * u;
                }
                out[(m, mp)] += acc * g;
            }
        }
    }
    for m in 0..out_dim {
        for mp in 0..m {
            out[(m, mp)] = out[(mp, m)].conj();
        }
    }
    let unnormalized = DensityMatrix::from_matrix(out)?;
    let success = unnormalized.trace();
    if !(success >= MIN_SUCCESS) {
        return Err(Error::DegenerateHeralding(success));
    }
    Ok((unnormalized.normalized()?, success))
}
