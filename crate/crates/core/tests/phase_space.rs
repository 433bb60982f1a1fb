mod common;

use std::f64::consts::PI;

use catbreed::fock::{apply_loss, coherent_state, odd_cat, squeezed_vacuum, subtract_photon, DensityMatrix, FockVector};
use catbreed::qhd::q_moments;
use catbreed::quasiprob::{negativity_volume, q_grid, wigner_at_origin, wigner_grid, wigner_value, GridSpec};
use common::{pure, random_density};
use num_complex::Complex64;
use proptest::prelude::*;

fn test_states() -> Vec<(&'static str, DensityMatrix)> {
    vec![
        ("vacuum", pure(&FockVector::vacuum(30).unwrap())),
        ("cat", pure(&odd_cat(1.1, 30).unwrap())),
        ("big cat", pure(&odd_cat(2.0, 40).unwrap())),
        ("lossy cat", apply_loss(&pure(&odd_cat(1.5, 30).unwrap()), 0.8).unwrap()),
        ("coherent", pure(&coherent_state(Complex64::new(1.0, -0.5), 30).unwrap())),
        ("squeezed", pure(&squeezed_vacuum(0.5, 40).unwrap())),
        ("subtracted", pure(&subtract_photon(&squeezed_vacuum(0.5, 40).unwrap()).unwrap())),
        ("random", random_density(12, 6, 30)),
    ]
}

#[test]
fn q_and_wigner_variances_differ_by_vacuum_offset() {
    let spec = GridSpec::square(-8.0, 8.0, 241).unwrap();
    for (name, rho) in test_states() {
        let (qx, qy) = q_grid(&rho, &spec).unwrap().axis_variances();
        let (wx, wy) = wigner_grid(&rho, &spec).unwrap().axis_variances();
        assert!((qx - wx - 0.25).abs() < 0.01, "{name}: {qx} - {wx}");
        assert!((qy - wy - 0.25).abs() < 0.01, "{name}: {qy} - {wy}");
    }
}

#[test]
fn wigner_integrates_to_one() {
    for (name, rho) in test_states() {
        let m = q_moments(&rho);
        let s = 6.0 * m.covariance[(0, 0)].max(m.covariance[(1, 1)]).sqrt();
        let spec = GridSpec::new(m.mean.re - s, m.mean.re + s, m.mean.im - s, m.mean.im + s, 241, 241).unwrap();
        let integral = wigner_grid(&rho, &spec).unwrap().integral();
        assert!((integral - 1.0).abs() < 0.01, "{name}: {integral}");
    }
}

#[test]
fn negativity_shrinks_with_loss() {
    let spec = GridSpec::square(-4.0, 4.0, 121).unwrap();
    let cat = pure(&odd_cat(1.1, 25).unwrap());
    let vols: Vec<f64> = [1.0, 0.9, 0.8, 0.7, 0.6, 0.5, 0.4]
        .iter()
        .map(|&eta| negativity_volume(&wigner_grid(&apply_loss(&cat, eta).unwrap(), &spec).unwrap()))
        .collect();
    assert!(vols.windows(2).all(|w| w[1] <= w[0]), "{vols:?}");
    assert!(vols[0] > 0.0);
    assert!(vols[6] < 1e-12, "{vols:?}");
}

proptest! {
    #[test]
    fn odd_cat_wigner_origin(a in 0.05f64..3.0) {
        let rho = pure(&odd_cat(a, 50).unwrap());
        prop_assert!((wigner_at_origin(&rho) + 2.0 / PI).abs() < 1e-12);
        prop_assert!((wigner_value(&rho, Complex64::new(0.0, 0.0)) + 2.0 / PI).abs() < 1e-12);
    }

    #[test]
    fn origin_formula_matches_series(seed in any::<u64>(), support in 1usize..12) {
        let rho = random_density(seed, support, 16);
        prop_assert!((wigner_at_origin(&rho) - wigner_value(&rho, Complex64::new(0.0, 0.0))).abs() < 1e-9);
    }
}
