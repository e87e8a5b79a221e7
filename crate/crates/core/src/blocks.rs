//! Reduced density operators of two separated blocks read off a converged
//! `S • • E` state.
//!
//! Tracing out the two free sites gives `ρ_SE` for blocks of `Δ = N/2 - 1`
//! sites at separation `x = 2`. Each block was built as `(S' •)` by a stored
//! isometry; applying it re-expresses `S` as `S' ⊗ •`, after which the inner
//! site can be traced out. Repeating this on both sides walks down the
//! sequence `(Δ, x) → (Δ - 1, x + 2)` at fixed `N = 2Δ + x`.

use faer::{Mat, MatMut, MatRef};
use serde::{Deserialize, Serialize};

use crate::dmrg::{BlockBasis, Chains, SuperblockState};
use crate::error::{Error, Result};
use crate::linalg::{self, Scalar};
use crate::model::Symmetry;

/// Allowed deviation of the trace from one and from Hermiticity.
pub const AXIOM_TOLERANCE: f64 = 1e-10;

/// Trace deviation that signals a corrupted superblock state.
pub const STATE_TRACE_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BasisTag {
    /// Block bases chosen by DMRG.
    Decimated,
    /// Computational spin basis.
    Physical,
}

/// Conserved charges of the system and environment basis states.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SectorLabels {
    pub symmetry: Symmetry,
    pub system: Vec<i32>,
    pub environment: Vec<i32>,
}

impl SectorLabels {
    /// Key under which `ρ` itself is block diagonal.
    pub fn total_key(&self, d_e: usize) -> impl Fn(usize) -> i64 + '_ {
        move |r| {
            let (cs, ce) = (self.system[r / d_e], self.environment[r % d_e]);
            self.symmetry.fuse(cs, ce) as i64
        }
    }

    /// Key under which the partial transpose `ρ^{T_S}` is block diagonal:
    /// the system charge enters with opposite sign.
    pub fn transposed_key(&self, d_e: usize) -> impl Fn(usize) -> i64 + '_ {
        move |r| {
            let (cs, ce) = (self.system[r / d_e], self.environment[r % d_e]);
            match self.symmetry {
                Symmetry::Parity => ((cs + ce) % 2) as i64,
                Symmetry::DownCount => (ce - cs) as i64,
            }
        }
    }
}

/// Density operator on `system ⊗ environment`, system index slow.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityOperator<T: Scalar = f64> {
    pub matrix: Mat<T>,
    pub d_s: usize,
    pub d_e: usize,
    /// Sites per block `Δ`.
    pub block_len: usize,
    /// Sites between the blocks `x`.
    pub separation: usize,
    pub basis: BasisTag,
    pub sectors: Option<SectorLabels>,
}

impl<T: Scalar> DensityOperator<T> {
    /// Checks shape, Hermiticity and unit trace.
    pub fn new(matrix: Mat<T>, d_s: usize, d_e: usize, block_len: usize, separation: usize, basis: BasisTag) -> Result<Self> {
        let op = Self::new_unchecked(matrix, d_s, d_e, block_len, separation, basis);
        op.check_factorization()?;
        let herm = op.hermiticity_deviation();
        if herm > AXIOM_TOLERANCE {
            return Err(Error::InvalidParameter(format!("matrix is not Hermitian (deviation {herm:.3e})")));
        }
        let trace = op.trace();
        if (trace - 1.0).abs() > AXIOM_TOLERANCE {
            return Err(Error::Trace { trace });
        }
        Ok(op)
    }

    pub fn new_unchecked(matrix: Mat<T>, d_s: usize, d_e: usize, block_len: usize, separation: usize, basis: BasisTag) -> Self {
        DensityOperator {
            matrix,
            d_s,
            d_e,
            block_len,
            separation,
            basis,
            sectors: None,
        }
    }

    pub fn with_sectors(mut self, labels: SectorLabels) -> Self {
        debug_assert_eq!(labels.system.len(), self.d_s);
        debug_assert_eq!(labels.environment.len(), self.d_e);
        self.sectors = Some(labels);
        self
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// `μ = x / Δ`.
    pub fn mu(&self) -> Option<f64> {
        (self.block_len > 0).then(|| self.separation as f64 / self.block_len as f64)
    }

    /// `2Δ + x`, the length of the chain the blocks were cut from.
    pub fn spanned_sites(&self) -> usize {
        2 * self.block_len + self.separation
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim()).map(|i| self.matrix[(i, i)].real_part()).sum()
    }

    pub fn hermiticity_deviation(&self) -> f64 {
        let n = self.dim();
        let mut worst: f64 = 0.0;
        for j in 0..n {
            for i in 0..=j {
                let d = self.matrix[(i, j)] - self.matrix[(j, i)].conjugate();
                worst = worst.max(d.modulus());
            }
        }
        worst
    }

    pub fn check_factorization(&self) -> Result<()> {
        let n = self.matrix.nrows();
        if self.matrix.ncols() != n || self.d_s * self.d_e != n {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} matrix does not factor as {} x {}",
                n,
                self.matrix.ncols(),
                self.d_s,
                self.d_e
            )));
        }
        Ok(())
    }
}

/// Traces the two free sites out of a symmetric superblock state.
pub fn extract_rho_se(state: &SuperblockState) -> Result<DensityOperator> {
    if !state.is_symmetric() {
        return Err(Error::InvalidParameter(format!(
            "state at bond {} is not in the symmetric configuration",
            state.bond()
        )));
    }
    let (ds, de) = (state.dim_s, state.dim_e);
    let dim = ds * de;
    // X[(s, e), (a, b)] = ψ[s, a, b, e]; ρ = X Xᵀ
    let x = Mat::from_fn(dim, 4, |r, c| state.amplitude(r / de, c / 2, c % 2, r % de));
    let rho = linalg::mat_product(x.as_ref(), x.transpose());
    let trace: f64 = (0..dim).map(|i| rho[(i, i)]).sum();
    if (trace - 1.0).abs() > STATE_TRACE_TOLERANCE {
        return Err(Error::Trace { trace });
    }
    let op = DensityOperator::new_unchecked(rho, ds, de, state.left_len, 2, BasisTag::Decimated).with_sectors(SectorLabels {
        symmetry: state.symmetry,
        system: state.charges_s.clone(),
        environment: state.charges_e.clone(),
    });
    Ok(op)
}

/// Row-major `d × d` buffer copied from a symmetric matrix.
fn buffer_of(m: &Mat<f64>) -> Vec<f64> {
    let n = m.nrows();
    let mut out = vec![0.0; n * n];
    for j in 0..n {
        for i in 0..n {
            out[i * n + j] = m[(i, j)];
        }
    }
    out
}

fn transpose_buffer(src: &[f64], rows: usize, cols: usize) -> Vec<f64> {
    let mut out = vec![0.0; rows * cols];
    const TILE: usize = 32;
    for i0 in (0..rows).step_by(TILE) {
        for j0 in (0..cols).step_by(TILE) {
            for i in i0..(i0 + TILE).min(rows) {
                for j in j0..(j0 + TILE).min(cols) {
                    out[j * rows + i] = src[i * cols + j];
                }
            }
        }
    }
    out
}

/// Rows `σ, σ + 2, …` of a left transform: `T^σ[s', s] = T[(s', σ), s]`.
fn left_slice(t: &Mat<f64>, sigma: usize) -> Mat<f64> {
    Mat::from_fn(t.nrows() / 2, t.ncols(), |r, c| t[(2 * r + sigma, c)])
}

/// `U^τ[e', e] = T[(τ, e'), e]` for a right transform.
fn right_slice(t: &Mat<f64>, tau: usize) -> Mat<f64> {
    let half = t.nrows() / 2;
    Mat::from_fn(half, t.ncols(), |r, c| t[(tau * half + r, c)])
}

/// `Σ_σ (T^σ ⊗ 1) ρ (T^σ ⊗ 1)ᵀ` for a symmetric row-major `ρ` on
/// `(d_s · d_e)²`.
fn contract_system(rho: &[f64], ds: usize, de: usize, t: &Mat<f64>) -> Vec<f64> {
    let dim = ds * de;
    let dsp = t.nrows() / 2;
    let out_dim = dsp * de;
    let mut out = vec![0.0; out_dim * out_dim];
    for sigma in 0..2 {
        let ts = left_slice(t, sigma);
        // B[s', (e, c)] = Σ_s T^σ[s', s] ρ[s, (e, c)]
        let mut b = vec![0.0; dsp * de * dim];
        linalg::gemm(
            MatMut::from_row_major_slice_mut(&mut b, dsp, de * dim),
            ts.as_ref(),
            MatRef::from_row_major_slice(rho, ds, de * dim),
        );
        // Bᵀ is (dim × out_dim) = [(s̄, ē), (s', e)]; contract s̄ the same way.
        let bt = transpose_buffer(&b, out_dim, dim);
        linalg::gemm_acc(
            MatMut::from_row_major_slice_mut(&mut out, dsp, de * out_dim),
            ts.as_ref(),
            MatRef::from_row_major_slice(&bt, ds, de * out_dim),
        );
    }
    out
}

/// `Σ_τ (1 ⊗ U^τ) ρ (1 ⊗ U^τ)ᵀ` for a symmetric row-major `ρ`.
fn contract_environment(rho: &[f64], ds: usize, de: usize, t: &Mat<f64>) -> Vec<f64> {
    let dim = ds * de;
    let dep = t.nrows() / 2;
    let out_dim = ds * dep;
    let mut out = vec![0.0; out_dim * out_dim];
    for tau in 0..2 {
        let u = right_slice(t, tau);
        // B[(s, e'), c] = Σ_e U^τ[e', e] ρ[(s, e), c], one system index at a time.
        let mut b = vec![0.0; out_dim * dim];
        for s in 0..ds {
            let src = &rho[s * de * dim..(s + 1) * de * dim];
            let dst = &mut b[s * dep * dim..(s + 1) * dep * dim];
            linalg::gemm(
                MatMut::from_row_major_slice_mut(dst, dep, dim),
                u.as_ref(),
                MatRef::from_row_major_slice(src, de, dim),
            );
        }
        let bt = transpose_buffer(&b, out_dim, dim);
        for s in 0..ds {
            let src = &bt[s * de * out_dim..(s + 1) * de * out_dim];
            let dst = &mut out[s * dep * out_dim..(s + 1) * dep * out_dim];
            linalg::gemm_acc(
                MatMut::from_row_major_slice_mut(dst, dep, out_dim),
                u.as_ref(),
                MatRef::from_row_major_slice(src, de, out_dim),
            );
        }
    }
    out
}

/// One unnesting step: `S = (S' •)`, `E = (• E')`; the two inner sites are
/// traced out, giving `Δ' = Δ - 1` and `x' = x + 2`.
///
/// `left` and `right` must be the blocks that built the current `S` and `E`.
pub fn unnest_step(rho: &DensityOperator, left: &BlockBasis, right: &BlockBasis) -> Result<DensityOperator> {
    rho.check_factorization()?;
    if rho.block_len < 2 {
        return Err(Error::InvalidParameter("blocks of one site cannot be unnested further".into()));
    }
    if left.block_len != rho.block_len || right.block_len != rho.block_len {
        return Err(Error::DimensionMismatch(format!(
            "blocks of {} and {} sites for an operator on blocks of {} sites",
            left.block_len, right.block_len, rho.block_len
        )));
    }
    if left.dim != rho.d_s || right.dim != rho.d_e || left.transform.ncols() != left.dim || right.transform.ncols() != right.dim {
        return Err(Error::DimensionMismatch(format!(
            "transforms onto {} x {} states for an operator on {} x {}",
            left.dim, right.dim, rho.d_s, rho.d_e
        )));
    }
    left.check_isometry(1e-10)?;
    right.check_isometry(1e-10)?;

    let (ds, de) = (rho.d_s, rho.d_e);
    let buf = buffer_of(&rho.matrix);
    let after_s = contract_system(&buf, ds, de, &left.transform);
    let dsp = left.parent_dim;
    let after_e = contract_environment(&after_s, dsp, de, &right.transform);
    let dep = right.parent_dim;
    let n = dsp * dep;
    let matrix = Mat::from_fn(n, n, |i, j| 0.5 * (after_e[i * n + j] + after_e[j * n + i]));

    let mut out = DensityOperator::new_unchecked(matrix, dsp, dep, rho.block_len - 1, rho.separation + 2, rho.basis);
    let trace = out.trace();
    if (trace - 1.0).abs() > STATE_TRACE_TOLERANCE {
        return Err(Error::Trace { trace });
    }
    if let Some(labels) = &rho.sectors {
        out = out.with_sectors(SectorLabels {
            symmetry: labels.symmetry,
            system: left.parent_charges.clone(),
            environment: right.parent_charges.clone(),
        });
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct MuSeriesEntry {
    pub block_len: usize,
    pub separation: usize,
    pub mu: f64,
    pub rho: DensityOperator,
}

/// Streams `(Δ, x, μ, ρ)` from `(N/2 - 1, 2)` down to `(1, N - 2)`,
/// holding at most two operators in memory.
pub struct MuSeries<'a> {
    chains: &'a Chains,
    next: Option<DensityOperator>,
    failed: bool,
    floor: usize,
}

impl<'a> MuSeries<'a> {
    pub fn new(state: &SuperblockState, chains: &'a Chains) -> Result<Self> {
        let rho = extract_rho_se(state)?;
        if chains.left.len() < rho.block_len || chains.right.len() < rho.block_len {
            return Err(Error::DimensionMismatch(format!(
                "block stacks of {} / {} entries cannot unnest blocks of {} sites",
                chains.left.len(),
                chains.right.len(),
                rho.block_len
            )));
        }
        Ok(MuSeries {
            chains,
            next: Some(rho),
            failed: false,
            floor: 1,
        })
    }

    /// Ends the series at blocks of `block_len` sites instead of one site.
    pub fn stop_at(mut self, block_len: usize) -> Self {
        self.floor = block_len.max(1);
        self
    }

    /// Advances without yielding until the blocks hold `block_len` sites.
    pub fn skip_to(&mut self, block_len: usize) -> Result<()> {
        while let Some(cur) = &self.next {
            if cur.block_len <= block_len {
                break;
            }
            let stepped = self.step(cur)?;
            self.next = Some(stepped);
        }
        Ok(())
    }

    fn step(&self, cur: &DensityOperator) -> Result<DensityOperator> {
        let len = cur.block_len;
        unnest_step(cur, self.chains.left_block(len), self.chains.right_block(len))
    }
}

impl Iterator for MuSeries<'_> {
    type Item = Result<MuSeriesEntry>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.failed {
            return None;
        }
        let cur = self.next.take()?;
        if cur.block_len < self.floor {
            return None;
        }
        if cur.block_len > self.floor {
            match self.step(&cur) {
                Ok(n) => self.next = Some(n),
                Err(e) => {
                    self.failed = true;
                    return Some(Err(e));
                }
            }
        }
        Some(Ok(MuSeriesEntry {
            block_len: cur.block_len,
            separation: cur.separation,
            mu: cur.separation as f64 / cur.block_len as f64,
            rho: cur,
        }))
    }
}

/// The whole series as a list.
pub fn mu_series(state: &SuperblockState, chains: &Chains) -> Result<Vec<MuSeriesEntry>> {
    MuSeries::new(state, chains)?.collect()
}

/// `(Δ, x)` pairs produced for an `N`-site chain, in order.
pub fn series_geometry(n_sites: usize) -> Vec<(usize, usize)> {
    (1..n_sites / 2).rev().map(|d| (d, n_sites - 2 * d)).collect()
}
