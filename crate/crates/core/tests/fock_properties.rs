mod common;

use catbreed::fock::{
    apply_loss, coherent_state, even_cat, mean_photon_number, n_qc_from_squeeze, odd_cat, parity, squeezed_vacuum,
    subtract_photon, DensityMatrix, SqueezeFactor,
};
use catbreed::fock::CatParity;
use catbreed::quasiprob::fit_cat_amplitude_with_parity;
use common::{pure, random_density};
use num_complex::Complex64;
use proptest::prelude::*;

fn assert_valid(rho: &DensityMatrix) {
    rho.validate(Default::default()).unwrap();
}

#[test]
fn constructors_at_large_dim_are_valid() {
    for v in [
        coherent_state(Complex64::new(5.0, 1.0), 64).unwrap(),
        odd_cat(2.6, 64).unwrap(),
        even_cat(4.0, 64).unwrap(),
        squeezed_vacuum(1.0, 64).unwrap(),
    ] {
        assert!((v.norm_sqr() - 1.0).abs() < 1e-10);
        assert_valid(&pure(&v));
    }
}

#[test]
fn subtraction_approximates_small_cats() {
    for r in [0.05, 0.1, 0.2, 0.3] {
        let sub = subtract_photon(&squeezed_vacuum(r, 40).unwrap()).unwrap();
        let fit = fit_cat_amplitude_with_parity(&pure(&sub), CatParity::Odd);
        assert!(fit.fidelity >= 0.99, "r = {r}: {fit:?}");
    }
}

proptest! {
    #[test]
    fn constructor_outputs_are_valid(re in -2.5f64..2.5, im in -2.5f64..2.5, a in 0.05f64..2.8, r in 0.0f64..1.0) {
        let states = [
            coherent_state(Complex64::new(re, im), 50).unwrap(),
            odd_cat(a, 50).unwrap(),
            even_cat(a, 50).unwrap(),
            squeezed_vacuum(r, 60).unwrap(),
        ];
        for v in &states {
            prop_assert!((v.norm_sqr() - 1.0).abs() < 1e-10);
            let rho = pure(v);
            prop_assert!(rho.validate(Default::default()).is_ok());
            prop_assert!((rho.purity() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn subtraction_flips_parity(r in 0.001f64..=1.0) {
        let sq = squeezed_vacuum(r, 60).unwrap();
        prop_assert!((parity(&pure(&sq)) - 1.0).abs() < 1e-12);
        let sub = subtract_photon(&sq).unwrap();
        prop_assert!((parity(&pure(&sub)) + 1.0).abs() < 1e-12);
    }

    #[test]
    fn loss_composes(seed in any::<u64>(), e1 in 0.01f64..=1.0, e2 in 0.01f64..=1.0) {
        let rho = random_density(seed, 6, 10);
        let twice = apply_loss(&apply_loss(&rho, e1).unwrap(), e2).unwrap();
        let once = apply_loss(&rho, e1 * e2).unwrap();
        prop_assert!(twice.max_abs_diff(&once) < 1e-8);
        prop_assert!(once.validate(Default::default()).is_ok());
    }

    #[test]
    fn loss_scales_photon_number(seed in any::<u64>(), eta in 0.0f64..=1.0) {
        let rho = random_density(seed, 7, 9);
        let lossy = apply_loss(&rho, eta.max(1e-6)).unwrap();
        prop_assert!((mean_photon_number(&lossy) - eta.max(1e-6) * mean_photon_number(&rho)).abs() < 1e-10);
    }

    /// 1/(1/β) need not round back to β, so symmetry holds to rounding.
    #[test]
    fn n_qc_is_symmetric(beta in 1e-3f64..1e3) {
        let a = n_qc_from_squeeze(SqueezeFactor::new(beta).unwrap());
        let b = n_qc_from_squeeze(SqueezeFactor::new(1.0 / beta).unwrap());
        prop_assert!((a - b).abs() <= 4.0 * f64::EPSILON * a.abs().max(1.0));
    }

    #[test]
    fn n_qc_is_exactly_symmetric_for_exact_reciprocals(k in -20i32..20) {
        let beta = 2f64.powi(k);
        let a = n_qc_from_squeeze(SqueezeFactor::new(beta).unwrap());
        let b = n_qc_from_squeeze(SqueezeFactor::new(1.0 / beta).unwrap());
        prop_assert_eq!(a, b);
    }
}
