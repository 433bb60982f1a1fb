use crate::error::{Error, Result};

/// Squeeze factor β = Δ²X_vac / Δ²X_θ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SqueezeFactor(f64);

impl SqueezeFactor {
    pub fn new(beta: f64) -> Result<Self> {
        if !(beta > 0.0) || !beta.is_finite() {
            return Err(Error::domain(format!("squeeze factor must be > 0, got {beta}")));
        }
        Ok(SqueezeFactor(beta))
    }

    /// From a noise reduction quoted in dB, β = 10^{dB/10}.
    pub fn from_db(db: f64) -> Result<Self> {
        SqueezeFactor::new(10f64.powf(db / 10.0))
    }

    /// Squeeze factor of a squeezed vacuum with parameter r, β = e^{2r}.
    pub fn from_parameter(r: f64) -> Result<Self> {
        SqueezeFactor::new((2.0 * r.abs()).exp())
    }

    pub fn beta(self) -> f64 {
        self.0
    }
}

/// Quantum-correlated photon number (β + 1/β)/4 − 1/2.
pub fn n_qc_from_squeeze(beta: SqueezeFactor) -> f64 {
    let b = beta.0;
    (b + b.recip()) / 4.0 - 0.5
}
