use num_complex::Complex64;

use crate::error::{Error, Result};

/// Squared norm below which a truncated constructor reports leakage.
pub const LEAKAGE_THRESHOLD: f64 = 0.999;

/// Pure state over the photon-number basis |0⟩ … |dim−1⟩.
#[derive(Debug, Clone, PartialEq)]
pub struct FockVector {
    coeffs: Vec<Complex64>,
    /// Squared norm the state had inside the truncation before renormalization.
    retained: f64,
}

impl FockVector {
    /// Wraps raw coefficients without normalizing them.
    pub fn from_coefficients(coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::domain("Fock vector needs dim >= 1"));
        }
        if coeffs.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::domain("Fock coefficients must be finite"));
        }
        let retained = norm_sqr(&coeffs);
        Ok(FockVector { coeffs, retained })
    }

    pub fn basis(n: usize, dim: usize) -> Result<Self> {
        if n >= dim {
            return Err(Error::domain(format!(
                "basis state |{n}> outside truncation dim {dim}"
            )));
        }
        let mut coeffs = vec![Complex64::new(0.0, 0.0); dim];
        coeffs[n] = Complex64::new(1.0, 0.0);
        FockVector::from_coefficients(coeffs)
    }

    pub fn vacuum(dim: usize) -> Result<Self> {
        FockVector::basis(0, dim)
    }

    pub fn dim(&self) -> usize {
        self.coeffs.len()
    }

    pub fn coefficients(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn norm_sqr(&self) -> f64 {
        norm_sqr(&self.coeffs)
    }

    /// Squared norm inside the truncation before the constructor renormalized.
    pub fn retained_norm(&self) -> f64 {
        self.retained
    }

    /// Whether the constructor lost more than 0.1% of the state to truncation.
    pub fn leaks(&self) -> bool {
        self.retained < LEAKAGE_THRESHOLD
    }

    /// ⟨self|other⟩
    pub fn inner(&self, other: &FockVector) -> Result<Complex64> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                left: self.dim(),
                right: other.dim(),
            });
        }
        Ok(self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    pub fn normalized(&self) -> Result<FockVector> {
        let n = self.norm_sqr();
        if n <= 0.0 {
            return Err(Error::Degenerate("cannot normalize the zero vector".into()));
        }
        let s = n.sqrt().recip();
        Ok(FockVector {
            coeffs: self.coeffs.iter().map(|c| c * s).collect(),
            retained: self.retained,
        })
    }

    /// Zero-pads (or truncates) to `dim` without renormalizing.
    pub fn resized(&self, dim: usize) -> Result<FockVector> {
        let mut coeffs = self.coeffs.clone();
        coeffs.resize(dim, Complex64::new(0.0, 0.0));
        FockVector::from_coefficients(coeffs)
    }

    /// Builds a normalized vector from truncated amplitudes whose untruncated
    /// squared norm is one, logging a warning if too much weight leaked out.
    pub(crate) fn from_truncated(coeffs: Vec<Complex64>, what: &str, warn: bool) -> Result<Self> {
        let retained = norm_sqr(&coeffs);
        if retained <= 0.0 || !retained.is_finite() {
            return Err(Error::Degenerate(format!("{what}: no weight inside truncation")));
        }
        if warn && retained < LEAKAGE_THRESHOLD {
            log::warn!(
                "{what}: only {:.5} of the norm fits in dim {}; increase the truncation",
                retained,
                coeffs.len()
            );
        }
        let s = retained.sqrt().recip();
        Ok(FockVector {
            coeffs: coeffs.into_iter().map(|c| c * s).collect(),
            retained,
        })
    }
}

fn norm_sqr(c: &[Complex64]) -> f64 {
    c.iter().map(|z| z.norm_sqr()).sum()
}

/// Truncated coherent-state amplitudes e^{−|α|²/2} αⁿ/√n!, not renormalized.
pub fn coherent_amplitudes(alpha: Complex64, dim: usize) -> Vec<Complex64> {
    let mut out = Vec::with_capacity(dim);
    let mut c = Complex64::new((-0.5 * alpha.norm_sqr()).exp(), 0.0);
    for n in 0..dim {
        if n > 0 {
            c = c * alpha / (n as f64).sqrt();
        }
        out.push(c);
    }
    out
}

/// Coherent state |α⟩ truncated to `dim` levels and renormalized.
pub fn coherent_state(alpha: Complex64, dim: usize) -> Result<FockVector> {
    if dim == 0 {
        return Err(Error::domain("dim must be >= 1"));
    }
    if !alpha.re.is_finite() || !alpha.im.is_finite() {
        return Err(Error::domain("coherent amplitude must be finite"));
    }
    FockVector::from_truncated(coherent_amplitudes(alpha, dim), "coherent_state", true)
}

/// Squeezed vacuum with squeeze parameter `r`, squeezed along the y quadrature.
///
/// c_{2m} = tanh(r)^m √((2m)!)/(2^m m!) / √cosh(r); odd amplitudes vanish.
pub fn squeezed_vacuum(r: f64, dim: usize) -> Result<FockVector> {
    if dim < 2 {
        return Err(Error::domain("squeezed vacuum needs dim >= 2"));
    }
    if !r.is_finite() {
        return Err(Error::domain("squeeze parameter must be finite"));
    }
    let t = r.tanh();
    let mut coeffs = vec![Complex64::new(0.0, 0.0); dim];
    let mut a = 1.0 / r.cosh().sqrt();
    for m in 0..=(dim - 1) / 2 {
        if m > 0 {
            let k = m as f64;
            a *= t * ((2.0 * k - 1.0) / (2.0 * k)).sqrt();
        }
        coeffs[2 * m] = Complex64::new(a, 0.0);
    }
    FockVector::from_truncated(coeffs, "squeezed_vacuum", true)
}

/// Odd cat N(|α⟩ − |−α⟩) with N = [2(1 − e^{−2α²})]^{−1/2}.
pub fn odd_cat(alpha: f64, dim: usize) -> Result<FockVector> {
    cat_state(alpha, dim, CatParity::Odd, true)
}

/// Even cat N(|α⟩ + |−α⟩) with N = [2(1 + e^{−2α²})]^{−1/2}.
pub fn even_cat(alpha: f64, dim: usize) -> Result<FockVector> {
    cat_state(alpha, dim, CatParity::Even, true)
}

/// Parity family of a cat state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CatParity {
    Even,
    Odd,
}

impl CatParity {
    pub fn sign(self) -> f64 {
        match self {
            CatParity::Even => 1.0,
            CatParity::Odd => -1.0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            CatParity::Even => "even",
            CatParity::Odd => "odd",
        }
    }
}

/// Normalization constant of the cat N(|α⟩ ± |−α⟩).
pub fn cat_normalization(alpha: f64, parity: CatParity) -> f64 {
    let overlap = (-2.0 * alpha * alpha).exp();
    (2.0 * (1.0 + parity.sign() * overlap)).sqrt().recip()
}

pub(crate) fn cat_state(alpha: f64, dim: usize, parity: CatParity, warn: bool) -> Result<FockVector> {
    if dim == 0 {
        return Err(Error::domain("dim must be >= 1"));
    }
    if !(alpha >= 0.0) || !alpha.is_finite() {
        return Err(Error::domain("cat amplitude must be finite and >= 0"));
    }
    if alpha == 0.0 && parity == CatParity::Odd {
        return Err(Error::Degenerate(
            "odd cat with alpha = 0 vanishes identically".into(),
        ));
    }
    let norm = cat_normalization(alpha, parity);
    let keep = match parity {
        CatParity::Even => 0,
        CatParity::Odd => 1,
    };
    let coeffs = coherent_amplitudes(Complex64::new(alpha, 0.0), dim)
        .into_iter()
        .enumerate()
        .map(|(n, c)| {
            if n % 2 == keep {
                c * (2.0 * norm)
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
        .collect();
    FockVector::from_truncated(coeffs, "cat_state", warn)
}

/// Applies the annihilation operator and renormalizes.
pub fn subtract_photon(state: &FockVector) -> Result<FockVector> {
    let c = state.coefficients();
    let mut out = vec![Complex64::new(0.0, 0.0); c.len()];
    for n in 0..c.len() - 1 {
        out[n] = c[n + 1] * ((n + 1) as f64).sqrt();
    }
    let norm = norm_sqr(&out);
    if norm <= 0.0 {
        return Err(Error::Degenerate(
            "photon subtraction from a state without n >= 1 support".into(),
        ));
    }
    let s = norm.sqrt().recip();
    Ok(FockVector {
        coeffs: out.into_iter().map(|z| z * s).collect(),
        retained: state.retained,
    })
}
