//! Open-boundary XY chain in a transverse field,
//!
//! ```text
//! H = -Σ_{k=1}^{N-1} [ (1+γ)/2 σx_k σx_{k+1} + (1-γ)/2 σy_k σy_{k+1} ] - λ Σ_{k=1}^{N} σz_k
//! ```
//!
//! Basis convention used throughout the crate: `|↑⟩` is index 0, `|↓⟩` is
//! index 1, and in product states site 0 is the most significant (slowest)
//! index. Every matrix element of `H` is real, so all operators are stored
//! as real matrices. The `σy ⊗ σy` coupling is written as `-A ⊗ A` with the
//! real antisymmetric `A = iσy`.

use faer::{c64, Mat};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest chain for which a dense `2^N × 2^N` Hamiltonian is built.
pub const DENSE_MAX_SITES: usize = 13;

/// Largest chain the matrix-free exact routines accept.
pub const EXACT_MAX_SITES: usize = 24;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub n_sites: usize,
    pub gamma: f64,
    pub lambda: f64,
}

impl ModelParams {
    pub fn new(n_sites: usize, gamma: f64, lambda: f64) -> Result<Self> {
        let params = ModelParams {
            n_sites,
            gamma,
            lambda,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_sites < 2 {
            return Err(Error::InvalidParameter(format!(
                "chain needs at least 2 sites, got {}",
                self.n_sites
            )));
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::InvalidParameter(format!(
                "anisotropy gamma = {} outside [0, 1]",
                self.gamma
            )));
        }
        if !self.lambda.is_finite() || self.lambda < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "field lambda = {} must be finite and nonnegative",
                self.lambda
            )));
        }
        Ok(())
    }

    pub fn with_sites(self, n_sites: usize) -> Self {
        ModelParams { n_sites, ..self }
    }

    pub fn with_lambda(self, lambda: f64) -> Self {
        ModelParams { lambda, ..self }
    }

    /// Coefficient of `σx σx` on each bond.
    pub fn xx_coupling(&self) -> f64 {
        0.5 * (1.0 + self.gamma)
    }

    /// Coefficient of `σy σy` on each bond.
    pub fn yy_coupling(&self) -> f64 {
        0.5 * (1.0 - self.gamma)
    }

    /// The conserved quantum number used to label basis states.
    ///
    /// Every instance conserves the spin-flip parity `∏σz`. At `γ = 0` the
    /// number of down spins is conserved as well, which is used at zero
    /// field where the ground state is known to sit at half filling.
    pub fn symmetry(&self) -> Symmetry {
        if self.gamma == 0.0 && self.lambda == 0.0 {
            Symmetry::DownCount
        } else {
            Symmetry::Parity
        }
    }

    /// Symmetry sector holding the ground state of an even chain.
    pub fn ground_sector(&self) -> Sector {
        Sector::ground(self.symmetry(), self.n_sites)
    }
}

/// The three critical points studied: Ising, anisotropic XY and XX at zero field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CriticalPoint {
    Ising,
    Xy,
    Xx,
}

impl CriticalPoint {
    pub const ALL: [CriticalPoint; 3] = [CriticalPoint::Ising, CriticalPoint::Xy, CriticalPoint::Xx];

    pub fn gamma(self) -> f64 {
        match self {
            CriticalPoint::Ising => 1.0,
            CriticalPoint::Xy => 0.5,
            CriticalPoint::Xx => 0.0,
        }
    }

    pub fn lambda(self) -> f64 {
        match self {
            CriticalPoint::Ising | CriticalPoint::Xy => 1.0,
            CriticalPoint::Xx => 0.0,
        }
    }

    pub fn params(self, n_sites: usize) -> ModelParams {
        ModelParams {
            n_sites,
            gamma: self.gamma(),
            lambda: self.lambda(),
        }
    }
}

/// Abelian symmetry used to label block basis states.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Symmetry {
    /// Z2 spin-flip parity; charges are 0 (even) or 1 (odd) down spins.
    Parity,
    /// U(1) number of down spins.
    DownCount,
}

impl Symmetry {
    /// Charge of a single site in state `0 = ↑` or `1 = ↓`.
    pub fn site_charge(self, state: usize) -> i32 {
        (state & 1) as i32
    }

    pub fn fuse(self, a: i32, b: i32) -> i32 {
        match self {
            Symmetry::Parity => (a + b).rem_euclid(2),
            Symmetry::DownCount => a + b,
        }
    }

    /// Charge of a computational basis state of `n_sites` sites.
    pub fn basis_charge(self, index: usize) -> i32 {
        let downs = index.count_ones() as i32;
        match self {
            Symmetry::Parity => downs % 2,
            Symmetry::DownCount => downs,
        }
    }

    pub fn tag(self) -> u8 {
        match self {
            Symmetry::Parity => 0,
            Symmetry::DownCount => 1,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            0 => Some(Symmetry::Parity),
            1 => Some(Symmetry::DownCount),
            _ => None,
        }
    }
}

/// A symmetry together with the charge selected on the full chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Sector {
    pub symmetry: Symmetry,
    pub charge: i32,
}

impl Sector {
    /// Even parity, or half filling for the down-count symmetry.
    pub fn ground(symmetry: Symmetry, n_sites: usize) -> Self {
        let charge = match symmetry {
            Symmetry::Parity => 0,
            Symmetry::DownCount => (n_sites / 2) as i32,
        };
        Sector { symmetry, charge }
    }

    pub fn contains(&self, index: usize) -> bool {
        self.symmetry.basis_charge(index) == self.charge
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Pauli {
    Identity,
    X,
    Y,
    Z,
}

/// A single-site operator in the `{|↑⟩, |↓⟩}` basis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalOperator {
    pub label: Pauli,
    pub matrix: [[c64; 2]; 2],
}

impl LocalOperator {
    pub fn pauli(label: Pauli) -> Self {
        let z = c64::new(0.0, 0.0);
        let one = c64::new(1.0, 0.0);
        let i = c64::new(0.0, 1.0);
        let matrix = match label {
            Pauli::Identity => [[one, z], [z, one]],
            Pauli::X => [[z, one], [one, z]],
            Pauli::Y => [[z, -i], [i, z]],
            Pauli::Z => [[one, z], [z, -one]],
        };
        LocalOperator { label, matrix }
    }

    pub fn mul(&self, other: &LocalOperator) -> [[c64; 2]; 2] {
        let mut out = [[c64::new(0.0, 0.0); 2]; 2];
        for (r, row) in out.iter_mut().enumerate() {
            for (c, v) in row.iter_mut().enumerate() {
                *v = self.matrix[r][0] * other.matrix[0][c] + self.matrix[r][1] * other.matrix[1][c];
            }
        }
        out
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        (0..2).all(|r| (0..2).all(|c| (self.matrix[r][c] - self.matrix[c][r].conj()).norm() <= tol))
    }

    pub fn trace(&self) -> c64 {
        self.matrix[0][0] + self.matrix[1][1]
    }
}

/// Real single-site operators used to assemble Hamiltonians.
pub mod site {
    use faer::Mat;

    pub fn identity() -> Mat<f64> {
        Mat::identity(2, 2)
    }

    pub fn sigma_x() -> Mat<f64> {
        Mat::from_fn(2, 2, |r, c| if r != c { 1.0 } else { 0.0 })
    }

    pub fn sigma_z() -> Mat<f64> {
        Mat::from_fn(2, 2, |r, c| match (r, c) {
            (0, 0) => 1.0,
            (1, 1) => -1.0,
            _ => 0.0,
        })
    }

    /// `A = iσy = |↑⟩⟨↓| - |↓⟩⟨↑|`, so that `σy ⊗ σy = -A ⊗ A`.
    pub fn i_sigma_y() -> Mat<f64> {
        Mat::from_fn(2, 2, |r, c| match (r, c) {
            (0, 1) => 1.0,
            (1, 0) => -1.0,
            _ => 0.0,
        })
    }
}

/// Kronecker product `a ⊗ b` with `a`'s index slow.
pub fn kron(a: faer::MatRef<'_, f64>, b: faer::MatRef<'_, f64>) -> Mat<f64> {
    let (ar, ac) = (a.nrows(), a.ncols());
    let (br, bc) = (b.nrows(), b.ncols());
    let mut out = Mat::zeros(ar * br, ac * bc);
    for i in 0..ar {
        for j in 0..ac {
            let aij = a[(i, j)];
            if aij == 0.0 {
                continue;
            }
            for k in 0..br {
                for l in 0..bc {
                    out[(i * br + k, j * bc + l)] = aij * b[(k, l)];
                }
            }
        }
    }
    out
}

/// Two-site coupling block `-(1+γ)/2 σx⊗σx - (1-γ)/2 σy⊗σy` in the
/// `{↑↑, ↑↓, ↓↑, ↓↓}` basis.
pub fn bond_term(params: &ModelParams) -> Result<Mat<f64>> {
    params.validate()?;
    Ok(bond_matrix(params.xx_coupling(), params.yy_coupling()))
}

pub(crate) fn bond_matrix(jx: f64, jy: f64) -> Mat<f64> {
    let x = site::sigma_x();
    let a = site::i_sigma_y();
    let xx = kron(x.as_ref(), x.as_ref());
    let aa = kron(a.as_ref(), a.as_ref());
    Mat::from_fn(4, 4, |r, c| -jx * xx[(r, c)] + jy * aa[(r, c)])
}

/// Nonzero matrix elements `(j, value)` of `H` in column `i`, including the
/// diagonal. `H` is symmetric, so these are also the elements of row `i`.
pub(crate) fn for_each_element(params: &ModelParams, i: usize, mut f: impl FnMut(usize, f64)) {
    let n = params.n_sites;
    let downs = i.count_ones() as f64;
    f(i, -params.lambda * (n as f64 - 2.0 * downs));
    let same = -params.gamma;
    let opposite = -1.0;
    for k in 0..n - 1 {
        let shift = n - 2 - k;
        let pair = (i >> shift) & 0b11;
        let amp = if pair == 0b00 || pair == 0b11 { same } else { opposite };
        if amp != 0.0 {
            f(i ^ (0b11 << shift), amp);
        }
    }
}

/// `out = H · v` without forming `H`.
pub fn apply_hamiltonian(params: &ModelParams, v: &[f64], out: &mut [f64]) {
    debug_assert_eq!(v.len(), 1usize << params.n_sites);
    for (i, o) in out.iter_mut().enumerate() {
        let mut acc = 0.0;
        for_each_element(params, i, |j, h| acc += h * v[j]);
        *o = acc;
    }
}

pub fn build_dense_hamiltonian(params: &ModelParams) -> Result<Mat<f64>> {
    params.validate()?;
    if params.n_sites > DENSE_MAX_SITES {
        return Err(Error::DimensionOverflow {
            what: "dense Hamiltonian",
            requested: params.n_sites,
            limit: DENSE_MAX_SITES,
        });
    }
    let dim = 1usize << params.n_sites;
    let mut h = Mat::zeros(dim, dim);
    for i in 0..dim {
        for_each_element(params, i, |j, v| h[(j, i)] += v);
    }
    Ok(h)
}
