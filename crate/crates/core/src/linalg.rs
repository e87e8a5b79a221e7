//! Dense helpers over `faer` plus a restarted Lanczos ground-state solver.

use std::collections::BTreeMap;

use faer::linalg::matmul::matmul;
use faer::{Accum, Mat, MatMut, MatRef, Par, Side};

use crate::error::{Error, Result};

/// Scalars a density operator may carry.
pub trait Scalar:
    faer::traits::ComplexField<Real = f64> + Copy + std::ops::Sub<Output = Self> + std::ops::Add<Output = Self> + std::ops::Mul<Output = Self> + Send + Sync + std::fmt::Debug + 'static {
    fn conjugate(self) -> Self;
    fn real_part(self) -> f64;
    fn modulus(self) -> f64;
    fn from_f64(x: f64) -> Self;
}

impl Scalar for f64 {
    fn conjugate(self) -> Self {
        self
    }
    fn real_part(self) -> f64 {
        self
    }
    fn modulus(self) -> f64 {
        self.abs()
    }
    fn from_f64(x: f64) -> Self {
        x
    }
}

impl Scalar for faer::c64 {
    fn conjugate(self) -> Self {
        self.conj()
    }
    fn real_part(self) -> f64 {
        self.re
    }
    fn modulus(self) -> f64 {
        self.norm()
    }
    fn from_f64(x: f64) -> Self {
        faer::c64::new(x, 0.0)
    }
}

/// Ascending eigenvalues of a Hermitian matrix (lower triangle is read).
pub fn hermitian_eigenvalues<T: Scalar>(m: MatRef<'_, T>) -> Result<Vec<f64>> {
    if m.nrows() == 0 {
        return Ok(Vec::new());
    }
    m.self_adjoint_eigenvalues(Side::Lower).map_err(|_| Error::Eigen)
}

/// Ascending eigenvalues and eigenvectors (columns) of a real symmetric matrix.
pub fn symmetric_eigen(m: MatRef<'_, f64>) -> Result<(Vec<f64>, Mat<f64>)> {
    if m.nrows() == 0 {
        return Ok((Vec::new(), Mat::zeros(0, 0)));
    }
    let evd = m.self_adjoint_eigen(Side::Lower).map_err(|_| Error::Eigen)?;
    let s = evd.S().column_vector();
    let values = (0..m.nrows()).map(|i| s[i]).collect();
    Ok((values, evd.U().to_owned()))
}

/// Groups indices `0..n` by the key `key(i)`. Groups are ordered by key.
pub fn group_by_key(n: usize, key: impl Fn(usize) -> i64) -> BTreeMap<i64, Vec<usize>> {
    let mut groups: BTreeMap<i64, Vec<usize>> = BTreeMap::new();
    for i in 0..n {
        groups.entry(key(i)).or_default().push(i);
    }
    groups
}

/// Largest modulus of an element coupling two different groups.
pub fn off_block_norm<T: Scalar>(m: MatRef<'_, T>, key: &dyn Fn(usize) -> i64) -> f64 {
    let n = m.nrows();
    let keys: Vec<i64> = (0..n).map(key).collect();
    let mut worst: f64 = 0.0;
    for j in 0..n {
        for i in 0..n {
            if keys[i] != keys[j] {
                worst = worst.max(m[(i, j)].modulus());
            }
        }
    }
    worst
}

/// Eigenvalues of a Hermitian matrix that is block diagonal with respect to
/// `key`. Each block is diagonalized separately; the union is returned
/// in ascending order.
pub fn blocked_hermitian_eigenvalues<T: Scalar>(m: MatRef<'_, T>, key: &dyn Fn(usize) -> i64) -> Result<Vec<f64>> {
    let groups = group_by_key(m.nrows(), key);
    let mut all = Vec::with_capacity(m.nrows());
    for idx in groups.values() {
        let block = Mat::from_fn(idx.len(), idx.len(), |r, c| m[(idx[r], idx[c])]);
        all.extend(hermitian_eigenvalues(block.as_ref())?);
    }
    all.sort_by(f64::total_cmp);
    Ok(all)
}

/// `dst = lhs · rhs`, sequential so results are bit-reproducible.
pub fn gemm(dst: MatMut<'_, f64>, lhs: MatRef<'_, f64>, rhs: MatRef<'_, f64>) {
    matmul(dst, Accum::Replace, lhs, rhs, 1.0, Par::Seq);
}

/// `dst += lhs · rhs`.
pub fn gemm_acc(dst: MatMut<'_, f64>, lhs: MatRef<'_, f64>, rhs: MatRef<'_, f64>) {
    matmul(dst, Accum::Add, lhs, rhs, 1.0, Par::Seq);
}

pub fn mat_product(lhs: MatRef<'_, f64>, rhs: MatRef<'_, f64>) -> Mat<f64> {
    let mut out = Mat::zeros(lhs.nrows(), rhs.ncols());
    gemm(out.as_mut(), lhs, rhs);
    out
}

/// `tᵀ · m · t`.
pub fn project(m: MatRef<'_, f64>, t: MatRef<'_, f64>) -> Mat<f64> {
    let mt = mat_product(m, t);
    mat_product(t.transpose(), mt.as_ref())
}

/// `max |tᵀt - 1|`.
pub fn isometry_deviation(t: MatRef<'_, f64>) -> f64 {
    let g = mat_product(t.transpose(), t);
    let mut worst: f64 = 0.0;
    for j in 0..g.ncols() {
        for i in 0..g.nrows() {
            let want = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((g[(i, j)] - want).abs());
        }
    }
    worst
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

fn scale(v: &mut [f64], s: f64) {
    v.iter_mut().for_each(|x| *x *= s);
}

/// A fixed, well-spread start vector so repeated runs are bit-identical.
pub fn deterministic_start(len: usize) -> Vec<f64> {
    const GOLDEN: f64 = 0.618_033_988_749_894_9;
    (0..len)
        .map(|i| 1.0 + 0.5 * ((i as f64 + 1.0) * GOLDEN).fract())
        .collect()
}

#[derive(Debug, Clone, Copy)]
pub struct LanczosOptions {
    /// Stop once `‖Hx - θx‖` falls below this.
    pub residual_tol: f64,
    /// Krylov vectors per restart cycle.
    pub krylov_dim: usize,
    pub max_restarts: usize,
}

impl Default for LanczosOptions {
    fn default() -> Self {
        LanczosOptions {
            residual_tol: 1e-9,
            krylov_dim: 60,
            max_restarts: 200,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LanczosResult {
    pub value: f64,
    pub vector: Vec<f64>,
    pub residual: f64,
    /// Second-lowest Ritz value of the last Krylov space, when available.
    pub next_value: Option<f64>,
    pub matvecs: usize,
}

/// Lowest eigenpair of the symmetric operator `apply` by explicitly
/// restarted Lanczos with full reorthogonalization.
///
/// `mask` restricts the iteration to a symmetry sector: it is applied to
/// the start vector and to every Krylov vector.
pub fn lanczos_ground(
    dim: usize,
    mut apply: impl FnMut(&[f64], &mut [f64]),
    start: Vec<f64>,
    mask: Option<&[bool]>,
    opts: LanczosOptions,
) -> Result<LanczosResult> {
    let restrict = |v: &mut [f64]| {
        if let Some(m) = mask {
            for (x, keep) in v.iter_mut().zip(m) {
                if !keep {
                    *x = 0.0;
                }
            }
        }
    };
    let mut v0 = start;
    assert_eq!(v0.len(), dim);
    restrict(&mut v0);
    let mut n0 = norm(&v0);
    if n0 == 0.0 || !n0.is_finite() {
        v0 = deterministic_start(dim);
        restrict(&mut v0);
        n0 = norm(&v0);
        if n0 == 0.0 {
            return Err(Error::InvalidParameter("empty symmetry sector".into()));
        }
    }
    scale(&mut v0, 1.0 / n0);

    let krylov_dim = opts.krylov_dim.max(2).min(dim.max(1));
    let mut matvecs = 0;
    let mut w = vec![0.0; dim];
    let mut last_residual = f64::INFINITY;

    for _restart in 0..=opts.max_restarts {
        let mut basis: Vec<Vec<f64>> = vec![v0.clone()];
        let mut alphas: Vec<f64> = Vec::new();
        let mut betas: Vec<f64> = Vec::new();
        let mut ritz: Option<(f64, Vec<f64>, Option<f64>)> = None;

        for j in 0..krylov_dim {
            apply(&basis[j], &mut w);
            matvecs += 1;
            restrict(&mut w);
            let alpha = dot(&basis[j], &w);
            alphas.push(alpha);
            axpy(-alpha, &basis[j], &mut w);
            if j > 0 {
                axpy(-betas[j - 1], &basis[j - 1], &mut w);
            }
            for _ in 0..2 {
                for b in &basis {
                    let c = dot(b, &w);
                    axpy(-c, b, &mut w);
                }
            }
            let beta = norm(&w);

            let k = alphas.len();
            let t = Mat::from_fn(k, k, |r, c| {
                if r == c {
                    alphas[r]
                } else if r == c + 1 {
                    betas[c]
                } else if c == r + 1 {
                    betas[r]
                } else {
                    0.0
                }
            });
            let (vals, vecs) = symmetric_eigen(t.as_ref())?;
            let theta = vals[0];
            let coeffs: Vec<f64> = (0..k).map(|r| vecs[(r, 0)]).collect();
            let estimate = beta * coeffs[k - 1].abs();
            ritz = Some((theta, coeffs, vals.get(1).copied()));

            let exhausted = beta <= 1e-13 * alpha.abs().max(1.0) || basis.len() == dim;
            if estimate < 0.5 * opts.residual_tol || exhausted || j + 1 == krylov_dim {
                break;
            }
            betas.push(beta);
            let mut next = w.clone();
            scale(&mut next, 1.0 / beta);
            basis.push(next);
        }

        let (theta, coeffs, next_value) = ritz.expect("at least one Lanczos step");
        let mut x = vec![0.0; dim];
        for (c, b) in coeffs.iter().zip(&basis) {
            axpy(*c, b, &mut x);
        }
        let nx = norm(&x);
        scale(&mut x, 1.0 / nx);

        apply(&x, &mut w);
        matvecs += 1;
        restrict(&mut w);
        let value = dot(&x, &w);
        axpy(-value, &x, &mut w);
        let residual = norm(&w);
        last_residual = residual;
        if residual <= opts.residual_tol || theta.is_nan() {
            return Ok(LanczosResult {
                value,
                vector: x,
                residual,
                next_value,
                matvecs,
            });
        }
        v0 = x;
    }
    Err(Error::Convergence {
        iterations: matvecs,
        residual: last_residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lanczos_finds_lowest_of_diagonal_plus_coupling() {
        let n = 300;
        let diag: Vec<f64> = (0..n).map(|i| (i as f64) * 0.1 - 3.0).collect();
        let apply = |v: &[f64], out: &mut [f64]| {
            for i in 0..n {
                let mut acc = diag[i] * v[i];
                if i > 0 {
                    acc += 0.3 * v[i - 1];
                }
                if i + 1 < n {
                    acc += 0.3 * v[i + 1];
                }
                out[i] = acc;
            }
        };
        let dense = Mat::from_fn(n, n, |r, c| {
            if r == c {
                diag[r]
            } else if r.abs_diff(c) == 1 {
                0.3
            } else {
                0.0
            }
        });
        let exact = hermitian_eigenvalues(dense.as_ref()).unwrap()[0];
        let res = lanczos_ground(
            n,
            apply,
            deterministic_start(n),
            None,
            LanczosOptions {
                krylov_dim: 20,
                ..Default::default()
            },
        )
        .unwrap();
        assert!((res.value - exact).abs() < 1e-12);
        assert!(res.residual <= 1e-9);
    }

    #[test]
    fn lanczos_respects_mask() {
        // Two decoupled blocks; the global minimum sits in the masked-out block.
        let apply = |v: &[f64], out: &mut [f64]| {
            out[0] = -5.0 * v[0];
            out[1] = 1.0 * v[1] + 0.5 * v[2];
            out[2] = 0.5 * v[1] + 2.0 * v[2];
        };
        let mask = [false, true, true];
        let res = lanczos_ground(3, apply, vec![1.0; 3], Some(&mask), LanczosOptions::default()).unwrap();
        let want = 1.5 - (0.25f64 + 0.25).sqrt();
        assert!((res.value - want).abs() < 1e-12);
        assert_eq!(res.vector[0], 0.0);
    }

    #[test]
    fn blocked_eigenvalues_match_full() {
        let n = 12;
        let key = |i: usize| (i % 3) as i64;
        let m = Mat::from_fn(n, n, |r, c| {
            if key(r) == key(c) {
                ((r * 7 + c * 7) % 5) as f64 + if r == c { r as f64 } else { 0.0 }
            } else {
                0.0
            }
        });
        let a = blocked_hermitian_eigenvalues(m.as_ref(), &key).unwrap();
        let b = hermitian_eigenvalues(m.as_ref()).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12);
        }
        assert_eq!(off_block_norm(m.as_ref(), &key), 0.0);
    }
}
