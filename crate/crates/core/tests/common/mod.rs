#![allow(dead_code)]

use blockneg_core::{BasisTag, DensityOperator};
use faer::{c64, Mat};
use rand::Rng;
use rand_distr::StandardNormal;

pub fn gaussian_matrix(rng: &mut impl Rng, rows: usize, cols: usize) -> Mat<c64> {
    Mat::from_fn(rows, cols, |_, _| c64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
}

/// Haar-distributed up to column phases: Q of a Gaussian matrix.
pub fn random_unitary(rng: &mut impl Rng, n: usize) -> Mat<c64> {
    gaussian_matrix(rng, n, n).qr().compute_Q()
}

/// Normalized coefficient matrix `ψ[s, e]`.
pub fn random_pure(rng: &mut impl Rng, ds: usize, de: usize) -> Mat<c64> {
    let psi = gaussian_matrix(rng, ds, de);
    let norm = psi.norm_l2();
    Mat::from_fn(ds, de, |i, j| psi[(i, j)] / norm)
}

pub fn pure_density(psi: &Mat<c64>) -> DensityOperator<c64> {
    let (ds, de) = (psi.nrows(), psi.ncols());
    let n = ds * de;
    let v = |r: usize| psi[(r / de, r % de)];
    let m = Mat::from_fn(n, n, |r, c| v(r) * v(c).conj());
    DensityOperator::new(m, ds, de, 1, 0, BasisTag::Physical).unwrap()
}

/// Random mixed state of the given rank, `Σ_k |ψ_k⟩⟨ψ_k| / rank`.
pub fn random_mixed(rng: &mut impl Rng, ds: usize, de: usize, rank: usize) -> DensityOperator<c64> {
    let n = ds * de;
    let g = gaussian_matrix(rng, n, rank);
    let mut m = &g * g.adjoint();
    let tr: f64 = (0..n).map(|i| m[(i, i)].re).sum();
    m = Mat::from_fn(n, n, |i, j| m[(i, j)] / tr);
    // Exact Hermitian symmetry after rounding.
    let h = Mat::from_fn(n, n, |i, j| (m[(i, j)] + m[(j, i)].conj()) * 0.5);
    DensityOperator::new(h, ds, de, 1, 0, BasisTag::Physical).unwrap()
}

pub fn kron(a: &Mat<c64>, b: &Mat<c64>) -> Mat<c64> {
    let (ra, ca, rb, cb) = (a.nrows(), a.ncols(), b.nrows(), b.ncols());
    Mat::from_fn(ra * rb, ca * cb, |r, c| a[(r / rb, c / cb)] * b[(r % rb, c % cb)])
}

/// `(U_S ⊗ U_E) ρ (U_S ⊗ U_E)†`, re-Hermitized.
pub fn local_rotation(rho: &DensityOperator<c64>, us: &Mat<c64>, ue: &Mat<c64>) -> DensityOperator<c64> {
    let u = kron(us, ue);
    let m = &u * &rho.matrix * u.adjoint();
    let n = m.nrows();
    let h = Mat::from_fn(n, n, |i, j| (m[(i, j)] + m[(j, i)].conj()) * 0.5);
    DensityOperator::new(h, rho.d_s, rho.d_e, rho.block_len, rho.separation, rho.basis).unwrap()
}

/// Squared singular values of `ψ`.
pub fn schmidt_weights(psi: &Mat<c64>) -> Vec<f64> {
    psi.singular_values().unwrap().iter().map(|s| s * s).collect()
}
