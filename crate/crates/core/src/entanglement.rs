//! Partial transpose, negativity and entropies of bipartite density operators.

use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::blocks::DensityOperator;
use crate::error::{Error, Result};
use crate::linalg::{self, Scalar};

/// Below this magnitude a negativity is reported as exactly zero.
pub const NEGATIVITY_FLOOR: f64 = 1e-12;

/// Eigenvalues smaller than this are treated as zero in entropies.
pub const ENTROPY_CUTOFF: f64 = 1e-14;

/// A density operator may not have eigenvalues below `-NEGATIVE_TOLERANCE`.
pub const NEGATIVE_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NegativityResult {
    pub negativity: f64,
    pub log_negativity: f64,
    /// Smallest eigenvalue of the partial transpose.
    pub min_eigenvalue: f64,
    pub d_s: usize,
    pub d_e: usize,
    pub block_len: usize,
    pub separation: usize,
    pub mu: Option<f64>,
}

/// `log₂(𝒩 + 1)`.
pub fn log_negativity(negativity: f64) -> f64 {
    (negativity + 1.0).log2()
}

/// Transpose on the system factor:
/// `⟨i j|ρ^{T_S}|k l⟩ = ⟨k j|ρ|i l⟩` with the system index slow.
pub fn partial_transpose<T: Scalar>(rho: &DensityOperator<T>) -> Result<Mat<T>> {
    rho.check_factorization()?;
    let (ds, de) = (rho.d_s, rho.d_e);
    let m = &rho.matrix;
    Ok(Mat::from_fn(ds * de, ds * de, |r, c| {
        let (i, j) = (r / de, r % de);
        let (k, l) = (c / de, c % de);
        m[(k * de + j, i * de + l)]
    }))
}

/// Transpose on the environment factor.
pub fn partial_transpose_environment<T: Scalar>(rho: &DensityOperator<T>) -> Result<Mat<T>> {
    rho.check_factorization()?;
    let (ds, de) = (rho.d_s, rho.d_e);
    let m = &rho.matrix;
    Ok(Mat::from_fn(ds * de, ds * de, |r, c| {
        let (i, j) = (r / de, r % de);
        let (k, l) = (c / de, c % de);
        m[(i * de + l, k * de + j)]
    }))
}

/// Eigenvalues of the partial transpose, block-diagonalized by symmetry
/// sector when the operator carries verified sector labels.
pub fn partial_transpose_spectrum<T: Scalar>(rho: &DensityOperator<T>) -> Result<Vec<f64>> {
    let pt = partial_transpose(rho)?;
    match &rho.sectors {
        Some(labels) => {
            let key = labels.transposed_key(rho.d_e);
            // Labels are trusted only if the matrix really is block diagonal.
            if linalg::off_block_norm(pt.as_ref(), &key) <= 1e-13 {
                linalg::blocked_hermitian_eigenvalues(pt.as_ref(), &key)
            } else {
                log::debug!("sector labels do not block-diagonalize the partial transpose; using full spectrum");
                linalg::hermitian_eigenvalues(pt.as_ref())
            }
        }
        None => linalg::hermitian_eigenvalues(pt.as_ref()),
    }
}

pub fn negativity<T: Scalar>(rho: &DensityOperator<T>) -> Result<NegativityResult> {
    let spectrum = partial_transpose_spectrum(rho)?;
    let abs_sum: f64 = spectrum.iter().map(|a| a.abs()).sum();
    let mut n = abs_sum - 1.0;
    if n.abs() < NEGATIVITY_FLOOR || n < 0.0 {
        n = 0.0;
    }
    Ok(NegativityResult {
        negativity: n,
        log_negativity: log_negativity(n),
        min_eigenvalue: spectrum.first().copied().unwrap_or(0.0),
        d_s: rho.d_s,
        d_e: rho.d_e,
        block_len: rho.block_len,
        separation: rho.separation,
        mu: rho.mu(),
    })
}

/// Ascending spectrum of the density operator itself.
pub fn spectrum<T: Scalar>(rho: &DensityOperator<T>) -> Result<Vec<f64>> {
    rho.check_factorization()?;
    match &rho.sectors {
        Some(labels) => {
            let key = labels.total_key(rho.d_e);
            if linalg::off_block_norm(rho.matrix.as_ref(), &key) <= 1e-13 {
                return linalg::blocked_hermitian_eigenvalues(rho.matrix.as_ref(), &key);
            }
            linalg::hermitian_eigenvalues(rho.matrix.as_ref())
        }
        None => linalg::hermitian_eigenvalues(rho.matrix.as_ref()),
    }
}

/// `-Σ p log₂ p` over a probability spectrum, skipping `p ≤ 1e-14`.
pub fn entropy_bits(probabilities: &[f64]) -> f64 {
    probabilities
        .iter()
        .filter(|&&p| p > ENTROPY_CUTOFF)
        .map(|&p| -p * p.log2())
        .sum()
}

/// Von Neumann entropy in bits.
pub fn von_neumann_entropy<T: Scalar>(rho: &DensityOperator<T>) -> Result<f64> {
    let spec = spectrum(rho)?;
    if let Some(&low) = spec.first() {
        if low < -NEGATIVE_TOLERANCE {
            return Err(Error::NegativeEigenvalue { value: low });
        }
    }
    Ok(entropy_bits(&spec))
}

/// Negativity of a pure bipartite state from its Schmidt weights,
/// `(Σ √wᵢ)² - 1`.
pub fn pure_state_negativity(schmidt_weights: &[f64]) -> f64 {
    let s: f64 = schmidt_weights.iter().map(|w| w.max(0.0).sqrt()).sum();
    (s * s - 1.0).max(0.0)
}
