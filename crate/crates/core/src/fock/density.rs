use nalgebra::DMatrix;
use num_complex::Complex64;

use super::vector::FockVector;
use crate::error::{Error, Result};

/// Tolerances used by [`DensityMatrix::validate`].
#[derive(Debug, Clone, Copy)]
pub struct Tolerances {
    pub hermitian: f64,
    pub trace: f64,
    pub min_eigenvalue: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            hermitian: 1e-10,
            trace: 1e-9,
            min_eigenvalue: -1e-9,
        }
    }
}

/// Density operator in a truncated Fock basis.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    m: DMatrix<Complex64>,
}

impl DensityMatrix {
    /// Wraps a square matrix. Physical validity is checked separately by
    /// [`DensityMatrix::validate`].
    pub fn from_matrix(m: DMatrix<Complex64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::DimensionMismatch {
                left: m.nrows(),
                right: m.ncols(),
            });
        }
        if m.nrows() == 0 {
            return Err(Error::domain("density matrix needs dim >= 1"));
        }
        Ok(DensityMatrix { m })
    }

    pub fn maximally_mixed(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::domain("density matrix needs dim >= 1"));
        }
        let w = Complex64::new(1.0 / dim as f64, 0.0);
        Ok(DensityMatrix {
            m: DMatrix::from_diagonal_element(dim, dim, w),
        })
    }

    /// Diagonal state Σ pₙ|n⟩⟨n|.
    pub fn diagonal(populations: &[f64]) -> Result<Self> {
        let d = DMatrix::from_fn(populations.len(), populations.len(), |i, j| {
            if i == j {
                Complex64::new(populations[i], 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        });
        DensityMatrix::from_matrix(d)
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.m
    }

    pub fn into_matrix(self) -> DMatrix<Complex64> {
        self.m
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.m[(i, j)]
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim()).map(|i| self.m[(i, i)].re).sum()
    }

    pub fn populations(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.m[(i, i)].re).collect()
    }

    /// Tr(ρ²)
    pub fn purity(&self) -> f64 {
        self.m.iter().map(|z| z.norm_sqr()).sum()
    }

    /// Eigenvalues of the Hermitian part, ascending.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let h = self.hermitian_part();
        let mut ev: Vec<f64> = h.m.symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(|a, b| a.total_cmp(b));
        ev
    }

    /// Largest elementwise deviation from Hermiticity.
    pub fn hermiticity_error(&self) -> f64 {
        let d = self.dim();
        let mut worst = 0.0f64;
        for i in 0..d {
            for j in i..d {
                worst = worst.max((self.m[(i, j)] - self.m[(j, i)].conj()).norm());
            }
        }
        worst
    }

    pub fn validate(&self, tol: Tolerances) -> Result<()> {
        let herm = self.hermiticity_error();
        if herm > tol.hermitian {
            return Err(Error::domain(format!("not Hermitian (deviation {herm:e})")));
        }
        let tr = self.trace();
        if (tr - 1.0).abs() > tol.trace {
            return Err(Error::domain(format!("trace {tr} differs from 1")));
        }
        let min = self.eigenvalues().first().copied().unwrap_or(0.0);
        if min < tol.min_eigenvalue {
            return Err(Error::domain(format!(
                "not positive semidefinite (min eigenvalue {min:e})"
            )));
        }
        Ok(())
    }

    pub fn is_valid(&self) -> bool {
        self.validate(Tolerances::default()).is_ok()
    }

    /// (ρ + ρ†)/2
    pub fn hermitian_part(&self) -> DensityMatrix {
        let m = (&self.m + self.m.adjoint()) * Complex64::new(0.5, 0.0);
        DensityMatrix { m }
    }

    pub fn normalized(&self) -> Result<DensityMatrix> {
        let tr = self.trace();
        if !(tr > 0.0) {
            return Err(Error::Degenerate(format!("cannot normalize trace {tr}")));
        }
        Ok(DensityMatrix {
            m: &self.m / Complex64::new(tr, 0.0),
        })
    }

    /// Zero-pads or cuts the matrix to `dim` levels, without renormalizing.
    pub fn resized(&self, dim: usize) -> Result<DensityMatrix> {
        if dim == 0 {
            return Err(Error::domain("density matrix needs dim >= 1"));
        }
        let old = self.dim();
        let m = DMatrix::from_fn(dim, dim, |i, j| {
            if i < old && j < old {
                self.m[(i, j)]
            } else {
                Complex64::new(0.0, 0.0)
            }
        });
        Ok(DensityMatrix { m })
    }

    /// Drops trailing Fock levels whose total population is at most `tol`
    /// (keeping at least `min_dim`) and renormalizes.
    pub fn compacted(&self, tol: f64, min_dim: usize) -> Result<DensityMatrix> {
        let pops = self.populations();
        let total: f64 = pops.iter().sum();
        let mut tail = 0.0;
        let mut keep = self.dim();
        while keep > min_dim.max(1) {
            let next = tail + pops[keep - 1].max(0.0);
            if next > tol * total {
                break;
            }
            tail = next;
            keep -= 1;
        }
        self.resized(keep)?.normalized()
    }

    /// ‖ρ − σ‖₂ (Frobenius norm of the difference), zero-padding the smaller operand.
    pub fn hilbert_schmidt_distance(&self, other: &DensityMatrix) -> f64 {
        let d = self.dim().max(other.dim());
        let mut acc = 0.0;
        for i in 0..d {
            for j in 0..d {
                let a = if i < self.dim() && j < self.dim() {
                    self.m[(i, j)]
                } else {
                    Complex64::new(0.0, 0.0)
                };
                let b = if i < other.dim() && j < other.dim() {
                    other.m[(i, j)]
                } else {
                    Complex64::new(0.0, 0.0)
                };
                acc += (a - b).norm_sqr();
            }
        }
        acc.sqrt()
    }

    /// Tr(ρ a)
    pub fn expect_annihilation(&self) -> Complex64 {
        (1..self.dim())
            .map(|n| self.m[(n, n - 1)] * (n as f64).sqrt())
            .sum()
    }

    /// Tr(ρ a²)
    pub fn expect_annihilation_sq(&self) -> Complex64 {
        (2..self.dim())
            .map(|n| self.m[(n, n - 2)] * ((n * (n - 1)) as f64).sqrt())
            .sum()
    }

    /// Mixes `(1 − w)·self + w·other`.
    pub fn mix(&self, other: &DensityMatrix, w: f64) -> Result<DensityMatrix> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                left: self.dim(),
                right: other.dim(),
            });
        }
        let m = &self.m * Complex64::new(1.0 - w, 0.0) + &other.m * Complex64::new(w, 0.0);
        Ok(DensityMatrix { m })
    }

    pub fn max_abs_diff(&self, other: &DensityMatrix) -> f64 {
        self.m
            .iter()
            .zip(other.m.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}

/// |ψ⟩⟨ψ|
pub fn density_from_pure(state: &FockVector) -> DensityMatrix {
    let c = state.coefficients();
    let d = c.len();
    DensityMatrix {
        m: DMatrix::from_fn(d, d, |i, j| c[i] * c[j].conj()),
    }
}

/// Pure-target fidelity ⟨ψ|ρ|ψ⟩, clamped to [0, 1].
pub fn fidelity(rho: &DensityMatrix, psi: &FockVector) -> Result<f64> {
    if rho.dim() != psi.dim() {
        return Err(Error::DimensionMismatch {
            left: rho.dim(),
            right: psi.dim(),
        });
    }
    Ok(expectation_in(rho, psi.coefficients()).clamp(0.0, 1.0))
}

/// Re ⟨v|ρ|v⟩ for a vector of matching length.
pub(crate) fn expectation_in(rho: &DensityMatrix, v: &[Complex64]) -> f64 {
    let d = rho.dim();
    let mut acc = Complex64::new(0.0, 0.0);
    for j in 0..d {
        if v[j] == Complex64::new(0.0, 0.0) {
            continue;
        }
        let mut col = Complex64::new(0.0, 0.0);
        for i in 0..d {
            col += v[i].conj() * rho.m[(i, j)];
        }
        acc += col * v[j];
    }
    acc.re
}

/// Σ n ρₙₙ
pub fn mean_photon_number(rho: &DensityMatrix) -> f64 {
    rho.populations()
        .iter()
        .enumerate()
        .map(|(n, p)| n as f64 * p)
        .sum()
}

/// Σ (−1)ⁿ ρₙₙ
pub fn parity(rho: &DensityMatrix) -> f64 {
    rho.populations()
        .iter()
        .enumerate()
        .map(|(n, p)| if n % 2 == 0 { *p } else { -*p })
        .sum()
}
