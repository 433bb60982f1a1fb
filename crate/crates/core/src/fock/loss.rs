use nalgebra::DMatrix;
use num_complex::Complex64;
use statrs::function::factorial::ln_binomial;

use super::density::DensityMatrix;
use crate::error::{Error, Result};

/// Kraus weight ⟨n−k|A_k|n⟩ = √(C(n,k) ηⁿ⁻ᵏ (1−η)ᵏ).
fn kraus_weight(n: usize, k: usize, eta: f64) -> f64 {
    let binom = ln_binomial(n as u64, k as u64).exp();
    (binom * eta.powi((n - k) as i32) * (1.0 - eta).powi(k as i32)).sqrt()
}

/// Pure-loss channel of transmissivity `eta`, ρ ↦ Σ_k A_k ρ A_k†.
///
/// The channel only lowers photon numbers, so it is exact within the truncation.
pub fn apply_loss(rho: &DensityMatrix, eta: f64) -> Result<DensityMatrix> {
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(Error::domain(format!(
            "transmissivity must lie in (0, 1], got {eta}"
        )));
    }
    if eta == 1.0 {
        return Ok(rho.clone());
    }
    let d = rho.dim();
    // weights[n][k] for k <= n
    let weights: Vec<Vec<f64>> = (0..d)
        .map(|n| (0..=n).map(|k| kraus_weight(n, k, eta)).collect())
        .collect();
    let src = rho.matrix();
    let out = DMatrix::from_fn(d, d, |a, b| {
        let mut acc = Complex64::new(0.0, 0.0);
        let mut k = 0;
        while a + k < d && b + k < d {
            acc += src[(a + k, b + k)] * (weights[a + k][k] * weights[b + k][k]);
            k += 1;
        }
        acc
    });
    DensityMatrix::from_matrix(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{density_from_pure, odd_cat, FockVector};
    use approx::assert_abs_diff_eq;

    #[test]
    fn identity_at_unit_transmissivity() {
        let rho = density_from_pure(&odd_cat(1.1, 20).unwrap());
        assert_eq!(apply_loss(&rho, 1.0).unwrap(), rho);
    }

    #[test]
    fn single_photon_loss() {
        let one = density_from_pure(&FockVector::basis(1, 4).unwrap());
        let eta = 0.37;
        let out = apply_loss(&one, eta).unwrap();
        assert_abs_diff_eq!(out.get(1, 1).re, eta, epsilon = 1e-15);
        assert_abs_diff_eq!(out.get(0, 0).re, 1.0 - eta, epsilon = 1e-15);
        assert_abs_diff_eq!(out.get(0, 1).norm(), 0.0);
    }

    #[test]
    fn lossy_cat_keeps_trace() {
        let rho = density_from_pure(&odd_cat(1.1, 25).unwrap());
        let out = apply_loss(&rho, 0.8).unwrap();
        assert_abs_diff_eq!(out.trace(), 1.0, epsilon = 1e-9);
        assert!(out.is_valid());
    }

    #[test]
    fn rejects_bad_transmissivity() {
        let rho = DensityMatrix::maximally_mixed(3).unwrap();
        for eta in [0.0, -0.1, 1.5, f64::NAN] {
            assert!(matches!(apply_loss(&rho, eta), Err(Error::Domain(_))));
        }
    }
}
