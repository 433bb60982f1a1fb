use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

/// Metrics of one generation, from the data and from the exact oracle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRecord {
    pub generation: u32,
    pub sample_count: usize,
    /// Fraction of pairs accepted by the step that produced this generation (1 for generation 0).
    pub acceptance_fraction: f64,
    /// Binomial standard error of the acceptance fraction at the oracle success probability.
    pub acceptance_se: f64,
    /// E|α|² − 1 of the samples.
    pub empirical_mean_photon_number: f64,
    /// Present when the generation had enough samples to reconstruct.
    pub reconstruction: Option<ReconstructionRecord>,
    pub oracle: OracleRecord,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionRecord {
    pub dim: usize,
    pub iterations: usize,
    pub converged: bool,
    pub final_loglik: f64,
    pub fitted_alpha: f64,
    pub fitted_parity: String,
    pub fitted_fidelity: f64,
    pub mean_photon_number: f64,
    pub wigner_at_origin: f64,
    pub negativity_volume: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleRecord {
    pub dim: usize,
    /// Heralding probability of the step that produced this generation (1 for generation 0).
    pub success: f64,
    pub fitted_alpha: f64,
    pub fitted_parity: String,
    pub fitted_fidelity: f64,
    pub mean_photon_number: f64,
    pub wigner_at_origin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineReport {
    /// The run configuration in canonical `key = value` form.
    pub config: BTreeMap<String, String>,
    pub versions: BTreeMap<String, String>,
    pub threads: usize,
    pub generations: Vec<GenerationRecord>,
}

impl PipelineReport {
    /// Plain-text table for the terminal.
    pub fn summary(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{:>3} {:>9} {:>8} {:>8} {:>6} {:>7} {:>7} {:>8} {:>8} {:>8}",
            "gen", "samples", "accept", "oracle", "alpha", "fid", "<n>", "W(0)", "neg.vol", "alpha*"
        );
        for g in &self.generations {
            let (alpha, fid, n, w0, neg) = match &g.reconstruction {
                Some(r) => (
                    format!("{:.3}", r.fitted_alpha),
                    format!("{:.4}", r.fitted_fidelity),
                    format!("{:.3}", r.mean_photon_number),
                    format!("{:.4}", r.wigner_at_origin),
                    format!("{:.4}", r.negativity_volume),
                ),
                None => ("-".into(), "-".into(), "-".into(), "-".into(), "-".into()),
            };
            let _ = writeln!(
                s,
                "{:>3} {:>9} {:>8.4} {:>8.4} {:>6} {:>7} {:>7} {:>8} {:>8} {:>8.3}",
                g.generation,
                g.sample_count,
                g.acceptance_fraction,
                g.oracle.success,
                alpha,
                fid,
                n,
                w0,
                neg,
                g.oracle.fitted_alpha
            );
        }
        s
    }
}
