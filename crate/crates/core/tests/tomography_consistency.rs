mod common;

use catbreed::fock::{apply_loss, odd_cat};
use catbreed::qhd::sample_q;
use catbreed::tomography::{maxlik_reconstruct, ReconstructionConfig};
use common::pure;

#[test]
fn error_shrinks_with_sample_count() {
    let truth = apply_loss(&pure(&odd_cat(1.0, 12).unwrap()), 0.9).unwrap();
    let all = sample_q(&truth, 1_000_000, 77).unwrap();
    let cfg = ReconstructionConfig {
        dim: 12,
        ..Default::default()
    };
    let mut dists = Vec::new();
    for n in [1_000, 10_000, 100_000, 1_000_000] {
        let mut set = all.clone();
        set.samples.truncate(n);
        let res = maxlik_reconstruct(&set, &cfg).unwrap();
        for w in res.loglik_trace.windows(2) {
            assert!(w[1] >= w[0] - 1e-9);
        }
        assert!(res.rho.is_valid());
        dists.push(res.rho.hilbert_schmidt_distance(&truth));
    }
    let inversions = dists.windows(2).filter(|w| w[1] > w[0]).count();
    assert!(inversions <= 1, "{dists:?}");
    assert!(dists[0] >= 5.0 * dists[3], "{dists:?}");
}
