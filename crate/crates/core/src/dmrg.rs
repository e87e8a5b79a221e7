//! Finite-system DMRG for the open XY chain.
//!
//! The ground state is kept in the `S • • E` form: a decimated left block,
//! two explicit sites and a decimated right block. Every block is grown
//! from a smaller one plus a single site and the isometry that maps
//! `(smaller block ⊗ site)` onto the kept basis is stored, so the nesting
//! `S ↔ ((S'' •) •)` can later be undone by [`crate::blocks`].
//!
//! Block bases are labelled by a conserved charge (parity, or the number of
//! down spins for the zero-field XX chain). Reduced density matrices are
//! diagonalized sector by sector so kept states carry definite charges, and
//! the superblock eigensolver is confined to the ground-state sector.

use faer::{Mat, MatMut, MatRef};
use serde::{Deserialize, Serialize};

use crate::entanglement::entropy_bits;
use crate::error::{Error, Result};
use crate::linalg::{self, LanczosOptions};
use crate::model::{self, site, ModelParams, Sector, Symmetry};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DmrgConfig {
    /// Decimation cap `M` on the block basis dimension.
    pub max_kept_states: usize,
    /// Maximum number of full sweeps after warmup.
    pub n_sweeps: usize,
    /// Relative energy change between sweeps that counts as converged. The
    /// superblock Lanczos solver stops at residual `1e-3·√tol`.
    pub eigensolver_tol: f64,
    /// Truncated weight above which a warning is raised.
    pub target_epsilon: f64,
}

impl Default for DmrgConfig {
    fn default() -> Self {
        DmrgConfig {
            max_kept_states: 40,
            n_sweeps: 6,
            eigensolver_tol: 1e-12,
            target_epsilon: 1e-10,
        }
    }
}

impl DmrgConfig {
    pub fn with_kept_states(self, m: usize) -> Self {
        DmrgConfig {
            max_kept_states: m,
            ..self
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_kept_states < 2 {
            return Err(Error::InvalidParameter(format!(
                "kept states must be at least 2, got {}",
                self.max_kept_states
            )));
        }
        if self.n_sweeps < 1 {
            return Err(Error::InvalidParameter("at least one sweep is required".into()));
        }
        if !(self.eigensolver_tol > 0.0) || !(self.target_epsilon > 0.0) {
            return Err(Error::InvalidParameter("tolerances must be positive".into()));
        }
        Ok(())
    }

    fn lanczos(&self) -> LanczosOptions {
        LanczosOptions {
            residual_tol: (1e-3 * self.eigensolver_tol.sqrt()).max(1e-13),
            krylov_dim: 40,
            max_restarts: 200,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    Left,
    Right,
}

/// A decimated block together with the transformation that built it.
///
/// For a left block the rows of `transform` are indexed by
/// `(parent state, new site)` with the parent slow; for a right block the
/// new site sits on the inner side and is the slow index,
/// `(new site, parent state)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockBasis {
    pub side: Side,
    pub block_len: usize,
    pub dim: usize,
    pub parent_dim: usize,
    /// Isometry of shape `(2·parent_dim) × dim`.
    pub transform: Mat<f64>,
    pub parent_charges: Vec<i32>,
    pub charges: Vec<i32>,
    pub block_hamiltonian: Mat<f64>,
    /// `σx` on the inner boundary site, in the kept basis.
    pub edge_x: Mat<f64>,
    /// `iσy` on the inner boundary site, in the kept basis.
    pub edge_a: Mat<f64>,
    /// Weight discarded when this block was decimated.
    pub truncated_weight: f64,
}

impl BlockBasis {
    pub fn single_site(side: Side, params: &ModelParams, symmetry: Symmetry) -> Self {
        let h = Mat::from_fn(2, 2, |r, c| -params.lambda * site::sigma_z()[(r, c)]);
        BlockBasis {
            side,
            block_len: 1,
            dim: 2,
            parent_dim: 1,
            transform: Mat::identity(2, 2),
            parent_charges: vec![0],
            charges: vec![symmetry.site_charge(0), symmetry.site_charge(1)],
            block_hamiltonian: h,
            edge_x: site::sigma_x(),
            edge_a: site::i_sigma_y(),
            truncated_weight: 0.0,
        }
    }

    /// Hamiltonian of this block plus one site on its inner side.
    fn enlarged_hamiltonian(&self, params: &ModelParams) -> Mat<f64> {
        let id_block = Mat::<f64>::identity(self.dim, self.dim);
        let id_site = site::identity();
        let field = Mat::from_fn(2, 2, |r, c| -params.lambda * site::sigma_z()[(r, c)]);
        let (x, a) = (site::sigma_x(), site::i_sigma_y());
        let (jx, jy) = (params.xx_coupling(), params.yy_coupling());
        let (mut h, f, xx, aa) = match self.side {
            Side::Left => (
                model::kron(self.block_hamiltonian.as_ref(), id_site.as_ref()),
                model::kron(id_block.as_ref(), field.as_ref()),
                model::kron(self.edge_x.as_ref(), x.as_ref()),
                model::kron(self.edge_a.as_ref(), a.as_ref()),
            ),
            Side::Right => (
                model::kron(id_site.as_ref(), self.block_hamiltonian.as_ref()),
                model::kron(field.as_ref(), id_block.as_ref()),
                model::kron(x.as_ref(), self.edge_x.as_ref()),
                model::kron(a.as_ref(), self.edge_a.as_ref()),
            ),
        };
        let n = h.nrows();
        for j in 0..n {
            for i in 0..n {
                h[(i, j)] += f[(i, j)] - jx * xx[(i, j)] + jy * aa[(i, j)];
            }
        }
        h
    }

    fn enlarged_edges(&self) -> (Mat<f64>, Mat<f64>) {
        let id_block = Mat::<f64>::identity(self.dim, self.dim);
        let (x, a) = (site::sigma_x(), site::i_sigma_y());
        match self.side {
            Side::Left => (
                model::kron(id_block.as_ref(), x.as_ref()),
                model::kron(id_block.as_ref(), a.as_ref()),
            ),
            Side::Right => (
                model::kron(x.as_ref(), id_block.as_ref()),
                model::kron(a.as_ref(), id_block.as_ref()),
            ),
        }
    }

    fn enlarged_charges(&self, symmetry: Symmetry) -> Vec<i32> {
        let mut out = Vec::with_capacity(2 * self.dim);
        match self.side {
            Side::Left => {
                for &c in &self.charges {
                    for s in 0..2 {
                        out.push(symmetry.fuse(c, symmetry.site_charge(s)));
                    }
                }
            }
            Side::Right => {
                for s in 0..2 {
                    for &c in &self.charges {
                        out.push(symmetry.fuse(symmetry.site_charge(s), c));
                    }
                }
            }
        }
        out
    }

    /// Builds the next block from this one plus a site, keeping the states
    /// spanned by the columns of `decimation.transform`.
    fn grow(&self, params: &ModelParams, symmetry: Symmetry, decimation: Decimation) -> BlockBasis {
        let h_enl = self.enlarged_hamiltonian(params);
        let (ex, ea) = self.enlarged_edges();
        let t = decimation.transform;
        BlockBasis {
            side: self.side,
            block_len: self.block_len + 1,
            dim: t.ncols(),
            parent_dim: self.dim,
            block_hamiltonian: symmetrize(linalg::project(h_enl.as_ref(), t.as_ref())),
            edge_x: linalg::project(ex.as_ref(), t.as_ref()),
            edge_a: linalg::project(ea.as_ref(), t.as_ref()),
            parent_charges: self.charges.clone(),
            charges: decimation.charges,
            truncated_weight: decimation.truncated_weight,
            transform: t,
        }
        .debug_checked(symmetry)
    }

    fn debug_checked(self, _symmetry: Symmetry) -> Self {
        debug_assert!(self.isometry_deviation() < 1e-10);
        self
    }

    pub fn isometry_deviation(&self) -> f64 {
        linalg::isometry_deviation(self.transform.as_ref())
    }

    /// Errors unless `transformᵀ·transform = 1` to `tol`.
    pub fn check_isometry(&self, tol: f64) -> Result<()> {
        let deviation = self.isometry_deviation();
        if deviation > tol || !deviation.is_finite() {
            return Err(Error::NotIsometry {
                block_len: self.block_len,
                deviation,
            });
        }
        Ok(())
    }
}

fn symmetrize(mut m: Mat<f64>) -> Mat<f64> {
    let n = m.nrows();
    for j in 0..n {
        for i in 0..j {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    m
}

/// Superblock ground state `ψ[s, a, b, e]` (row-major, `s` slowest).
#[derive(Debug, Clone, PartialEq)]
pub struct SuperblockState {
    pub n_sites: usize,
    pub left_len: usize,
    pub right_len: usize,
    pub dim_s: usize,
    pub dim_e: usize,
    pub psi: Vec<f64>,
    pub energy: f64,
    /// Weight beyond the `M` largest Schmidt weights at this bond.
    pub truncated_weight: f64,
    /// Schmidt weights across the central bond, descending.
    pub schmidt_spectrum: Vec<f64>,
    pub symmetry: Symmetry,
    pub charges_s: Vec<i32>,
    pub charges_e: Vec<i32>,
}

impl SuperblockState {
    /// Bond `l` (1-based) between the two free sites.
    pub fn bond(&self) -> usize {
        self.left_len + 1
    }

    pub fn is_symmetric(&self) -> bool {
        self.left_len == self.right_len
    }

    pub fn norm(&self) -> f64 {
        linalg::norm(&self.psi)
    }

    pub fn amplitude(&self, s: usize, a: usize, b: usize, e: usize) -> f64 {
        self.psi[((s * 2 + a) * 2 + b) * self.dim_e + e]
    }
}

/// Entanglement entropy in bits across the central bond.
pub fn schmidt_entropy(state: &SuperblockState) -> f64 {
    entropy_bits(&state.schmidt_spectrum)
}

/// Left and right block stacks: `left[k]` and `right[k]` hold `k + 1` sites.
#[derive(Debug, Clone, PartialEq)]
pub struct Chains {
    pub left: Vec<BlockBasis>,
    pub right: Vec<BlockBasis>,
}

impl Chains {
    pub fn left_block(&self, len: usize) -> &BlockBasis {
        &self.left[len - 1]
    }

    pub fn right_block(&self, len: usize) -> &BlockBasis {
        &self.right[len - 1]
    }

    fn store(&mut self, block: BlockBasis) {
        let stack = match block.side {
            Side::Left => &mut self.left,
            Side::Right => &mut self.right,
        };
        let idx = block.block_len - 1;
        if idx < stack.len() {
            stack[idx] = block;
            // Longer blocks were built on the replaced one; they stay usable
            // as environments until they are rebuilt on the next pass.
        } else {
            debug_assert_eq!(idx, stack.len());
            stack.push(block);
        }
    }
}

struct Decimation {
    transform: Mat<f64>,
    charges: Vec<i32>,
    truncated_weight: f64,
    /// All weights of the reduced density matrix, descending.
    weights: Vec<f64>,
}

/// Keeps the `max_kept` most probable eigenvectors of `rho`, diagonalizing
/// each charge sector separately.
fn decimate(rho: MatRef<'_, f64>, charges: &[i32], max_kept: usize) -> Result<Decimation> {
    let n = rho.nrows();
    let groups = linalg::group_by_key(n, |i| charges[i] as i64);
    let mut candidates: Vec<(f64, usize, i32, Vec<f64>)> = Vec::with_capacity(n);
    for (&charge, idx) in &groups {
        let block = Mat::from_fn(idx.len(), idx.len(), |r, c| rho[(idx[r], idx[c])]);
        let (vals, vecs) = linalg::symmetric_eigen(block.as_ref())?;
        for k in (0..idx.len()).rev() {
            let mut full = vec![0.0; n];
            for (r, &i) in idx.iter().enumerate() {
                full[i] = vecs[(r, k)];
            }
            let order = candidates.len();
            candidates.push((vals[k], order, charge as i32, full));
        }
    }
    candidates.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let keep = max_kept.min(n);
    let weights: Vec<f64> = candidates.iter().map(|c| c.0.max(0.0)).collect();
    let truncated_weight = weights[keep..].iter().sum();
    let transform = Mat::from_fn(n, keep, |r, c| candidates[c].3[r]);
    let charges = candidates[..keep].iter().map(|c| c.2).collect();
    Ok(Decimation {
        transform,
        charges,
        truncated_weight,
        weights,
    })
}

/// The `(S •)(• E)` superblock Hamiltonian in matrix-free form.
struct Superblock {
    h_left: Mat<f64>,
    h_right: Mat<f64>,
    bond: Mat<f64>,
    dim_s: usize,
    dim_e: usize,
    mask: Vec<bool>,
}

impl Superblock {
    fn new(left: &BlockBasis, right: &BlockBasis, params: &ModelParams, sector: Sector) -> Self {
        let cl = left.enlarged_charges(sector.symmetry);
        let cr = right.enlarged_charges(sector.symmetry);
        let mut mask = Vec::with_capacity(cl.len() * cr.len());
        for &a in &cl {
            for &b in &cr {
                mask.push(sector.symmetry.fuse(a, b) == sector.charge);
            }
        }
        Superblock {
            h_left: left.enlarged_hamiltonian(params),
            h_right: right.enlarged_hamiltonian(params),
            bond: model::bond_matrix(params.xx_coupling(), params.yy_coupling()),
            dim_s: left.dim,
            dim_e: right.dim,
            mask,
        }
    }

    fn rows(&self) -> usize {
        2 * self.dim_s
    }

    fn cols(&self) -> usize {
        2 * self.dim_e
    }

    fn dim(&self) -> usize {
        self.rows() * self.cols()
    }

    fn apply(&self, v: &[f64], out: &mut [f64]) {
        let (nr, nc) = (self.rows(), self.cols());
        let psi = MatRef::from_row_major_slice(v, nr, nc);
        {
            let mut dst = MatMut::from_row_major_slice_mut(out, nr, nc);
            linalg::gemm(dst.as_mut(), self.h_left.as_ref(), psi);
            linalg::gemm_acc(dst.as_mut(), psi, self.h_right.as_ref());
        }
        let de = self.dim_e;
        let b = &self.bond;
        for s in 0..self.dim_s {
            for e in 0..de {
                let idx = |a: usize, bb: usize| ((s * 2 + a) * 2 + bb) * de + e;
                let w = [v[idx(0, 0)], v[idx(0, 1)], v[idx(1, 0)], v[idx(1, 1)]];
                for r in 0..4 {
                    let acc: f64 = (0..4).map(|c| b[(r, c)] * w[c]).sum();
                    out[idx(r / 2, r % 2)] += acc;
                }
            }
        }
    }

    fn solve(&self, guess: Option<Vec<f64>>, opts: LanczosOptions) -> Result<(f64, Vec<f64>)> {
        let dim = self.dim();
        let start = match guess {
            Some(g) if g.len() == dim => g,
            _ => linalg::deterministic_start(dim),
        };
        let res = linalg::lanczos_ground(dim, |v, o| self.apply(v, o), start, Some(&self.mask), opts)?;
        Ok((res.value, res.vector))
    }
}

fn left_density(psi: &[f64], rows: usize, cols: usize) -> Mat<f64> {
    let m = MatRef::from_row_major_slice(psi, rows, cols);
    symmetrize(linalg::mat_product(m, m.transpose()))
}

fn right_density(psi: &[f64], rows: usize, cols: usize) -> Mat<f64> {
    let m = MatRef::from_row_major_slice(psi, rows, cols);
    symmetrize(linalg::mat_product(m.transpose(), m))
}

fn to_row_major(m: MatRef<'_, f64>) -> Vec<f64> {
    let mut out = Vec::with_capacity(m.nrows() * m.ncols());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            out.push(m[(i, j)]);
        }
    }
    out
}

/// Result of a complete ground-state search.
#[derive(Debug, Clone)]
pub struct DmrgRun {
    pub params: ModelParams,
    pub config: DmrgConfig,
    pub chains: Chains,
    /// Final state at the symmetric bond `l = N/2`.
    pub state: SuperblockState,
    /// Energy at the central bond after warmup and after every full sweep.
    pub sweep_energies: Vec<f64>,
    pub converged: bool,
    /// Truncated weight of every decimation in the last full sweep.
    pub step_truncated_weights: Vec<f64>,
    pub max_truncated_weight: f64,
    pub warnings: Vec<String>,
}

/// Mutable engine state shared by warmup and sweeps.
struct Engine<'a> {
    params: &'a ModelParams,
    config: &'a DmrgConfig,
    symmetry: Symmetry,
    chains: Chains,
}

struct Solved {
    left_len: usize,
    energy: f64,
    psi: Vec<f64>,
}

impl<'a> Engine<'a> {
    fn n(&self) -> usize {
        self.params.n_sites
    }

    fn superblock(&self, left_len: usize, right_len: usize, n_sites: usize) -> Superblock {
        Superblock::new(
            self.chains.left_block(left_len),
            self.chains.right_block(right_len),
            self.params,
            Sector::ground(self.symmetry, n_sites),
        )
    }

    fn solve(&self, left_len: usize, guess: Option<Vec<f64>>) -> Result<Solved> {
        let right_len = self.n() - 2 - left_len;
        let sb = self.superblock(left_len, right_len, self.n());
        let (energy, psi) = sb.solve(guess, self.config.lanczos())?;
        Ok(Solved { left_len, energy, psi })
    }

    /// Decimates `S •` into a new left block of `left_len + 1` sites and
    /// predicts the wavefunction one bond to the right.
    fn move_right(&mut self, solved: &Solved) -> Result<(f64, Vec<f64>)> {
        let l = solved.left_len;
        let r = self.n() - 2 - l;
        let left = self.chains.left_block(l).clone();
        let (rows, cols) = (2 * left.dim, 2 * self.chains.right_block(r).dim);
        let rho = left_density(&solved.psi, rows, cols);
        let dec = decimate(rho.as_ref(), &left.enlarged_charges(self.symmetry), self.config.max_kept_states)?;
        let eps = dec.truncated_weight;
        let grown = left.grow(self.params, self.symmetry, dec);

        let psi = MatRef::from_row_major_slice(&solved.psi, rows, cols);
        let k = grown.dim;
        let phi = linalg::mat_product(grown.transform.transpose(), psi);
        let phi = to_row_major(phi.as_ref());
        let right_parent = self.chains.right_block(r);
        let de = right_parent.dim;
        let phi = MatRef::from_row_major_slice(&phi, 2 * k, de);
        let next = linalg::mat_product(phi, right_parent.transform.transpose());
        self.chains.store(grown);
        Ok((eps, to_row_major(next.as_ref())))
    }

    /// Mirror of [`Engine::move_right`].
    fn move_left(&mut self, solved: &Solved) -> Result<(f64, Vec<f64>)> {
        let l = solved.left_len;
        let r = self.n() - 2 - l;
        let right = self.chains.right_block(r).clone();
        let (rows, cols) = (2 * self.chains.left_block(l).dim, 2 * right.dim);
        let rho = right_density(&solved.psi, rows, cols);
        let dec = decimate(rho.as_ref(), &right.enlarged_charges(self.symmetry), self.config.max_kept_states)?;
        let eps = dec.truncated_weight;
        let grown = right.grow(self.params, self.symmetry, dec);

        let psi = MatRef::from_row_major_slice(&solved.psi, rows, cols);
        let k = grown.dim;
        let phi = linalg::mat_product(psi, grown.transform.as_ref());
        let phi = to_row_major(phi.as_ref());
        let left_parent = self.chains.left_block(l);
        let ds = left_parent.dim;
        let phi = MatRef::from_row_major_slice(&phi, ds, 2 * k);
        let next = linalg::mat_product(left_parent.transform.as_ref(), phi);
        self.chains.store(grown);
        Ok((eps, to_row_major(next.as_ref())))
    }

    fn state(&self, solved: &Solved) -> Result<SuperblockState> {
        let l = solved.left_len;
        let r = self.n() - 2 - l;
        let left = self.chains.left_block(l);
        let right = self.chains.right_block(r);
        let rho = left_density(&solved.psi, 2 * left.dim, 2 * right.dim);
        let dec = decimate(rho.as_ref(), &left.enlarged_charges(self.symmetry), self.config.max_kept_states)?;
        Ok(SuperblockState {
            n_sites: self.n(),
            left_len: l,
            right_len: r,
            dim_s: left.dim,
            dim_e: right.dim,
            psi: solved.psi.clone(),
            energy: solved.energy,
            truncated_weight: dec.truncated_weight,
            schmidt_spectrum: dec.weights,
            symmetry: self.symmetry,
            charges_s: left.charges.clone(),
            charges_e: right.charges.clone(),
        })
    }
}

fn check_even_chain(params: &ModelParams) -> Result<()> {
    params.validate()?;
    if params.n_sites < 4 || !params.n_sites.is_multiple_of(2) {
        return Err(Error::InvalidParameter(format!(
            "DMRG needs an even chain of at least 4 sites, got {}",
            params.n_sites
        )));
    }
    Ok(())
}

/// Infinite-system growth from single-site blocks to the full chain.
///
/// Returns block stacks holding `1 ..= N/2 - 1` sites on each side and the
/// superblock ground state of the full chain at the symmetric bond.
pub fn warmup(params: &ModelParams, config: &DmrgConfig) -> Result<(Chains, SuperblockState)> {
    check_even_chain(params)?;
    config.validate()?;
    let symmetry = params.symmetry();
    let mut engine = Engine {
        params,
        config,
        symmetry,
        chains: Chains {
            left: vec![BlockBasis::single_site(Side::Left, params, symmetry)],
            right: vec![BlockBasis::single_site(Side::Right, params, symmetry)],
        },
    };
    let mut len = 1;
    loop {
        let size = 2 * len + 2;
        let sb = engine.superblock(len, len, size);
        let (energy, psi) = sb.solve(None, config.lanczos())?;
        if size == params.n_sites {
            let solved = Solved {
                left_len: len,
                energy,
                psi,
            };
            let state = engine.state(&solved)?;
            return Ok((engine.chains, state));
        }
        let (rows, cols) = (sb.rows(), sb.cols());
        let left = engine.chains.left_block(len).clone();
        let right = engine.chains.right_block(len).clone();
        let dl = decimate(
            left_density(&psi, rows, cols).as_ref(),
            &left.enlarged_charges(symmetry),
            config.max_kept_states,
        )?;
        let dr = decimate(
            right_density(&psi, rows, cols).as_ref(),
            &right.enlarged_charges(symmetry),
            config.max_kept_states,
        )?;
        engine.chains.store(left.grow(params, symmetry, dl));
        engine.chains.store(right.grow(params, symmetry, dr));
        len += 1;
    }
}

/// Outcome of the finite-system sweeps.
#[derive(Debug, Clone)]
pub struct SweepOutcome {
    pub state: SuperblockState,
    pub sweep_energies: Vec<f64>,
    pub converged: bool,
    pub step_truncated_weights: Vec<f64>,
    pub warnings: Vec<String>,
}

/// Finite-system sweeps until the energy at the central bond is stable.
///
/// One full sweep moves the free pair from the centre to the right end,
/// to the left end and back to the centre. Afterwards every left block up
/// to `N/2 - 1` sites was rebuilt on the final rightward pass and every
/// right block on the preceding leftward pass, so both stacks nest
/// consistently into the final state.
pub fn sweep_to_convergence(
    chains: Chains,
    initial: &SuperblockState,
    params: &ModelParams,
    config: &DmrgConfig,
) -> Result<(Chains, SweepOutcome)> {
    check_even_chain(params)?;
    config.validate()?;
    let n = params.n_sites;
    let centre = n / 2 - 1;
    let mut engine = Engine {
        params,
        config,
        symmetry: params.symmetry(),
        chains,
    };
    let mut energies = vec![initial.energy];
    let mut warnings = Vec::new();
    let mut guess = Some(initial.psi.clone());
    let mut converged = false;
    let mut last_weights = Vec::new();
    let mut final_state = None;

    // With only two sites per block pair there is nothing to sweep.
    if n == 4 {
        let solved = engine.solve(1, guess)?;
        let state = engine.state(&solved)?;
        return Ok((
            engine.chains,
            SweepOutcome {
                sweep_energies: vec![initial.energy, state.energy],
                state,
                converged: true,
                step_truncated_weights: Vec::new(),
                warnings,
            },
        ));
    }

    for sweep in 0..config.n_sweeps {
        let mut weights = Vec::with_capacity(2 * n);
        let mut l = centre;
        // centre → right end
        while l < n - 3 {
            let solved = engine.solve(l, guess.take())?;
            let (eps, next) = engine.move_right(&solved)?;
            weights.push(eps);
            guess = Some(next);
            l += 1;
        }
        // right end → left end
        while l > 1 {
            let solved = engine.solve(l, guess.take())?;
            let (eps, next) = engine.move_left(&solved)?;
            weights.push(eps);
            guess = Some(next);
            l -= 1;
        }
        // left end → centre
        while l < centre {
            let solved = engine.solve(l, guess.take())?;
            let (eps, next) = engine.move_right(&solved)?;
            weights.push(eps);
            guess = Some(next);
            l += 1;
        }
        let solved = engine.solve(centre, guess.take())?;
        let energy = solved.energy;
        guess = Some(solved.psi.clone());
        let previous = *energies.last().unwrap();
        energies.push(energy);
        let state = engine.state(&solved)?;
        last_weights = weights;
        final_state = Some(state);

        let scale = energy.abs().max(1.0);
        if energy > previous + 1e-10 * scale {
            let msg = format!("energy rose from {previous} to {energy} in sweep {}", sweep + 1);
            log::warn!("{msg}");
            warnings.push(msg);
        }
        log::debug!("N={n} sweep {} energy {energy:.15}", sweep + 1);
        if sweep >= 1 && (energy - previous).abs() < config.eigensolver_tol * scale {
            converged = true;
            break;
        }
    }
    if !converged {
        let msg = format!("energy not converged after {} sweeps", config.n_sweeps);
        log::warn!("{msg}");
        warnings.push(msg);
    }
    let max_eps = last_weights.iter().copied().fold(0.0, f64::max);
    if max_eps > config.target_epsilon {
        let msg = format!(
            "truncated weight {max_eps:.3e} exceeds target {:.1e}",
            config.target_epsilon
        );
        log::warn!("{msg}");
        warnings.push(msg);
    }
    Ok((
        engine.chains,
        SweepOutcome {
            state: final_state.expect("at least one sweep"),
            sweep_energies: energies,
            converged,
            step_truncated_weights: last_weights,
            warnings,
        },
    ))
}

/// Warmup followed by finite-system sweeps.
pub fn run(params: &ModelParams, config: &DmrgConfig) -> Result<DmrgRun> {
    let (chains, initial) = warmup(params, config)?;
    let (chains, outcome) = sweep_to_convergence(chains, &initial, params, config)?;
    let max_truncated_weight = outcome
        .step_truncated_weights
        .iter()
        .copied()
        .fold(outcome.state.truncated_weight, f64::max);
    Ok(DmrgRun {
        params: *params,
        config: *config,
        chains,
        state: outcome.state,
        sweep_energies: outcome.sweep_energies,
        converged: outcome.converged,
        step_truncated_weights: outcome.step_truncated_weights,
        max_truncated_weight,
        warnings: outcome.warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact;

    fn config(m: usize) -> DmrgConfig {
        DmrgConfig::default().with_kept_states(m)
    }

    #[test]
    fn rejects_odd_or_tiny_chains() {
        let c = config(8);
        assert!(warmup(&ModelParams::new(5, 1.0, 1.0).unwrap(), &c).is_err());
        assert!(warmup(&ModelParams::new(2, 1.0, 1.0).unwrap(), &c).is_err());
        let bad = DmrgConfig {
            max_kept_states: 1,
            ..c
        };
        assert!(warmup(&ModelParams::new(8, 1.0, 1.0).unwrap(), &bad).is_err());
    }

    #[test]
    fn four_sites_are_exact() {
        let p = ModelParams::new(4, 1.0, 1.0).unwrap();
        let (chains, state) = warmup(&p, &config(4)).unwrap();
        let exact = exact::exact_ground_state(&p).unwrap();
        assert!((state.energy - exact.energy).abs() < 1e-10);
        assert_eq!(chains.left.len(), 1);
        assert_eq!(state.bond(), 2);
        assert!((state.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn single_site_blocks() {
        let p = ModelParams::new(6, 0.5, 1.0).unwrap();
        let b = BlockBasis::single_site(Side::Right, &p, Symmetry::Parity);
        assert_eq!(b.charges, vec![0, 1]);
        assert_eq!(b.isometry_deviation(), 0.0);
        assert_eq!(b.block_hamiltonian[(0, 0)], -1.0);
    }

    #[test]
    fn eight_sites_with_full_basis_match_oracle() {
        for &(g, l) in &[(1.0, 1.0), (0.5, 1.0), (0.0, 0.0)] {
            let p = ModelParams::new(8, g, l).unwrap();
            let run = run(&p, &config(16)).unwrap();
            let exact = exact::exact_ground_state(&p).unwrap();
            assert!((run.state.energy - exact.energy).abs() < 1e-10, "γ={g}");
            assert_eq!(run.state.bond(), 4);
            assert!(run.state.is_symmetric());
            for b in run.chains.left.iter().chain(&run.chains.right) {
                assert!(b.isometry_deviation() < 1e-12);
                assert!(b.dim <= 16);
            }
        }
    }

    #[test]
    fn truncated_runs_stay_above_exact_energy() {
        let p = ModelParams::new(12, 1.0, 1.0).unwrap();
        let exact = exact::exact_ground_state(&p).unwrap().energy;
        let mut previous_gap = f64::INFINITY;
        for m in [4, 8, 16] {
            let run = run(&p, &config(m)).unwrap();
            let gap = run.state.energy - exact;
            assert!(gap > -1e-10, "M={m}: variational bound violated ({gap})");
            assert!(gap <= previous_gap + 1e-12);
            previous_gap = gap;
        }
        assert!(previous_gap < 1e-8);
    }

    #[test]
    fn runs_are_bit_reproducible() {
        let p = ModelParams::new(10, 0.5, 1.0).unwrap();
        let a = run(&p, &config(8)).unwrap();
        let b = run(&p, &config(8)).unwrap();
        assert_eq!(a.state.psi, b.state.psi);
        assert_eq!(a.sweep_energies, b.sweep_energies);
    }

    #[test]
    fn schmidt_spectrum_is_a_distribution() {
        let p = ModelParams::new(12, 1.0, 1.0).unwrap();
        let run = run(&p, &config(16)).unwrap();
        let w = &run.state.schmidt_spectrum;
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-10);
        assert!(w.windows(2).all(|p| p[0] >= p[1]));
        assert!(run.state.truncated_weight >= 0.0);
        assert!(schmidt_entropy(&run.state) > 0.0);
    }

    #[test]
    fn entropy_of_product_and_bell_spectra() {
        let mut s = SuperblockState {
            n_sites: 4,
            left_len: 1,
            right_len: 1,
            dim_s: 2,
            dim_e: 2,
            psi: vec![],
            energy: 0.0,
            truncated_weight: 0.0,
            schmidt_spectrum: vec![1.0, 0.0, 0.0],
            symmetry: Symmetry::Parity,
            charges_s: vec![],
            charges_e: vec![],
        };
        assert_eq!(schmidt_entropy(&s), 0.0);
        s.schmidt_spectrum = vec![0.5, 0.5];
        assert!((schmidt_entropy(&s) - 1.0).abs() < 1e-15);
    }
}
