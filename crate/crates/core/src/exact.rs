//! Brute-force references for small chains: exact ground states, reduced
//! density operators of arbitrary site subsets, and negativities computed
//! without any decimation.

use faer::{Mat, MatRef};

use crate::blocks::{BasisTag, DensityOperator, SectorLabels};
use crate::entanglement;
use crate::error::{Error, Result};
use crate::linalg::{self, LanczosOptions};
use crate::model::{self, ModelParams, Sector, Symmetry, DENSE_MAX_SITES, EXACT_MAX_SITES};

/// Chains up to this length are diagonalized densely.
pub const DENSE_SOLVER_MAX_SITES: usize = 10;

/// Largest number of sites kept in a reduced density operator.
pub const RDM_MAX_SITES: usize = 12;

/// Ground spaces with a gap below this are flagged as degenerate.
pub const DEGENERACY_GAP: f64 = 1e-10;

/// Real amplitudes of an `N`-site state; site 0 is the most significant bit.
#[derive(Debug, Clone, PartialEq)]
pub struct PureState {
    pub n_sites: usize,
    pub amplitudes: Vec<f64>,
}

impl PureState {
    pub fn new(n_sites: usize, amplitudes: Vec<f64>) -> Result<Self> {
        if n_sites > EXACT_MAX_SITES {
            return Err(Error::DimensionOverflow {
                what: "pure state",
                requested: n_sites,
                limit: EXACT_MAX_SITES,
            });
        }
        if amplitudes.len() != 1usize << n_sites {
            return Err(Error::DimensionMismatch(format!(
                "{} amplitudes for {n_sites} sites",
                amplitudes.len()
            )));
        }
        let n = linalg::norm(&amplitudes);
        if (n - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!("state norm is {n}, expected 1")));
        }
        Ok(PureState { n_sites, amplitudes })
    }

    /// Product of single-site states, each given as `(up, down)` amplitudes.
    pub fn product(sites: &[(f64, f64)]) -> Result<Self> {
        let mut amps = vec![1.0];
        for &(u, d) in sites {
            amps = amps.iter().flat_map(|&a| [a * u, a * d]).collect();
        }
        let n = linalg::norm(&amps);
        amps.iter_mut().for_each(|a| *a /= n);
        PureState::new(sites.len(), amps)
    }

    /// Parity or down-count sector the state lies in, if any.
    pub fn definite_charge(&self, symmetry: Symmetry) -> Option<i32> {
        let mut found = None;
        for (i, a) in self.amplitudes.iter().enumerate() {
            if a.abs() > 1e-13 {
                let c = symmetry.basis_charge(i);
                match found {
                    None => found = Some(c),
                    Some(f) if f != c => return None,
                    _ => {}
                }
            }
        }
        found
    }
}

#[derive(Debug, Clone)]
pub struct ExactGroundState {
    pub energy: f64,
    pub state: PureState,
    /// Distance to the next eigenvalue in the searched space.
    pub gap: Option<f64>,
    pub degenerate: bool,
    /// Residual `‖Hψ - Eψ‖`.
    pub residual: f64,
}

fn check_size(params: &ModelParams) -> Result<()> {
    params.validate()?;
    if params.n_sites > EXACT_MAX_SITES {
        return Err(Error::DimensionOverflow {
            what: "exact diagonalization",
            requested: params.n_sites,
            limit: EXACT_MAX_SITES,
        });
    }
    Ok(())
}

/// Lowest eigenpair of the full Hamiltonian.
pub fn exact_ground_state(params: &ModelParams) -> Result<ExactGroundState> {
    solve(params, None)
}

/// Lowest eigenpair within one symmetry sector.
pub fn exact_ground_state_in_sector(params: &ModelParams, sector: Sector) -> Result<ExactGroundState> {
    solve(params, Some(sector))
}

/// Ground state in the sector DMRG targets for this chain. Odd chains fall
/// back to the full space.
pub fn reference_ground_state(params: &ModelParams) -> Result<ExactGroundState> {
    if params.n_sites.is_multiple_of(2) {
        exact_ground_state_in_sector(params, params.ground_sector())
    } else {
        exact_ground_state(params)
    }
}

fn residual(params: &ModelParams, v: &[f64], energy: f64) -> f64 {
    let mut hv = vec![0.0; v.len()];
    model::apply_hamiltonian(params, v, &mut hv);
    hv.iter().zip(v).map(|(h, x)| (h - energy * x).powi(2)).sum::<f64>().sqrt()
}

fn solve(params: &ModelParams, sector: Option<Sector>) -> Result<ExactGroundState> {
    check_size(params)?;
    let dim = 1usize << params.n_sites;
    let indices: Vec<usize> = match sector {
        Some(s) => (0..dim).filter(|&i| s.contains(i)).collect(),
        None => (0..dim).collect(),
    };
    if indices.is_empty() {
        return Err(Error::InvalidParameter("empty symmetry sector".into()));
    }

    let (energy, amplitudes, gap) = if params.n_sites <= DENSE_SOLVER_MAX_SITES.min(DENSE_MAX_SITES) {
        let h = model::build_dense_hamiltonian(params)?;
        let sub = Mat::from_fn(indices.len(), indices.len(), |r, c| h[(indices[r], indices[c])]);
        let (vals, vecs) = linalg::symmetric_eigen(sub.as_ref())?;
        let mut amps = vec![0.0; dim];
        for (r, &i) in indices.iter().enumerate() {
            amps[i] = vecs[(r, 0)];
        }
        (vals[0], amps, vals.get(1).map(|v| v - vals[0]))
    } else {
        let mask: Vec<bool> = match sector {
            Some(s) => (0..dim).map(|i| s.contains(i)).collect(),
            None => vec![true; dim],
        };
        // Keep the Krylov basis within roughly 1 GB.
        let krylov_dim = ((1usize << 27) / dim).clamp(6, 80);
        let opts = LanczosOptions {
            residual_tol: 1e-10,
            krylov_dim,
            max_restarts: 200,
        };
        let res = linalg::lanczos_ground(
            dim,
            |v, o| model::apply_hamiltonian(params, v, o),
            linalg::deterministic_start(dim),
            Some(&mask),
            opts,
        )?;
        (res.value, res.vector, res.next_value.map(|v| v - res.value))
    };

    // Fix the overall sign so the largest amplitude is positive.
    let mut amplitudes = amplitudes;
    let pivot = amplitudes
        .iter()
        .copied()
        .max_by(|a, b| a.abs().total_cmp(&b.abs()))
        .unwrap_or(1.0);
    if pivot < 0.0 {
        amplitudes.iter_mut().for_each(|a| *a = -*a);
    }
    let nrm = linalg::norm(&amplitudes);
    amplitudes.iter_mut().for_each(|a| *a /= nrm);
    let res = residual(params, &amplitudes, energy);
    if res > 1e-8 {
        return Err(Error::Convergence {
            iterations: 0,
            residual: res,
        });
    }
    Ok(ExactGroundState {
        energy,
        state: PureState {
            n_sites: params.n_sites,
            amplitudes,
        },
        degenerate: gap.is_some_and(|g| g < DEGENERACY_GAP),
        gap,
        residual: res,
    })
}

fn validate_sites(n_sites: usize, system: &[usize], environment: &[usize]) -> Result<(Vec<usize>, Vec<usize>)> {
    let mut s = system.to_vec();
    let mut e = environment.to_vec();
    s.sort_unstable();
    e.sort_unstable();
    let mut all: Vec<usize> = s.iter().chain(&e).copied().collect();
    all.sort_unstable();
    if all.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::InvalidSites(format!("repeated site in {system:?} ∪ {environment:?}")));
    }
    if let Some(&bad) = all.iter().find(|&&k| k >= n_sites) {
        return Err(Error::InvalidSites(format!("site {bad} outside a chain of {n_sites} sites")));
    }
    if all.len() > RDM_MAX_SITES {
        return Err(Error::DimensionOverflow {
            what: "reduced density operator",
            requested: all.len(),
            limit: RDM_MAX_SITES,
        });
    }
    Ok((s, e))
}

/// Reduced density operator on `system ∪ environment` (0-based sites).
///
/// Within each group sites are taken in ascending order; system sites form
/// the slow index and environment sites the fast one. The environment may
/// be empty.
pub fn reduced_density_operator(state: &PureState, system: &[usize], environment: &[usize]) -> Result<DensityOperator> {
    let n = state.n_sites;
    let (s, e) = validate_sites(n, system, environment)?;
    let kept: Vec<usize> = s.iter().chain(&e).copied().collect();
    let rest: Vec<usize> = (0..n).filter(|k| !kept.contains(k)).collect();
    let bit = |k: usize| n - 1 - k;

    let (dk, dr) = (1usize << kept.len(), 1usize << rest.len());
    let mut psi = Mat::<f64>::zeros(dk, dr);
    for (idx, &amp) in state.amplitudes.iter().enumerate() {
        if amp == 0.0 {
            continue;
        }
        let mut row = 0;
        for &k in &kept {
            row = (row << 1) | ((idx >> bit(k)) & 1);
        }
        let mut col = 0;
        for &k in &rest {
            col = (col << 1) | ((idx >> bit(k)) & 1);
        }
        psi[(row, col)] = amp;
    }
    let rho = linalg::mat_product(psi.as_ref(), psi.transpose());
    let (ds, de) = (1usize << s.len(), 1usize << e.len());
    let block_len = s.len();
    let separation = separation_between(&s, &e);
    let mut op = DensityOperator::new(rho, ds, de, block_len, separation, BasisTag::Physical)?;
    for symmetry in [Symmetry::DownCount, Symmetry::Parity] {
        if state.definite_charge(symmetry).is_some() {
            op = op.with_sectors(SectorLabels {
                symmetry,
                system: (0..ds).map(|i| symmetry.basis_charge(i)).collect(),
                environment: (0..de).map(|i| symmetry.basis_charge(i)).collect(),
            });
            break;
        }
    }
    Ok(op)
}

/// Number of sites strictly between two blocks (0 when either is empty or
/// they interleave).
fn separation_between(s: &[usize], e: &[usize]) -> usize {
    match (s.last(), e.first(), s.first(), e.last()) {
        (Some(&s_hi), Some(&e_lo), _, _) if s_hi < e_lo => e_lo - s_hi - 1,
        (_, _, Some(&s_lo), Some(&e_hi)) if e_hi < s_lo => s_lo - e_hi - 1,
        _ => 0,
    }
}

/// Sites of two blocks of `block_len` sites separated by `separation`
/// sites, placed symmetrically about the chain centre.
pub fn symmetric_blocks(n_sites: usize, block_len: usize, separation: usize) -> Result<(Vec<usize>, Vec<usize>)> {
    let used = 2 * block_len + separation;
    if block_len == 0 || used > n_sites {
        return Err(Error::InvalidSites(format!(
            "blocks of {block_len} sites at separation {separation} do not fit {n_sites} sites"
        )));
    }
    let offset = (n_sites - used) / 2;
    let s = (offset..offset + block_len).collect();
    let e = (offset + block_len + separation..offset + used).collect();
    Ok((s, e))
}

/// Exact `ρ_SE` of symmetric blocks in the reference ground state.
pub fn exact_block_density(params: &ModelParams, block_len: usize, separation: usize) -> Result<DensityOperator> {
    let gs = reference_ground_state(params)?;
    let (s, e) = symmetric_blocks(params.n_sites, block_len, separation)?;
    reduced_density_operator(&gs.state, &s, &e)
}

/// Negativity of two symmetric blocks computed from the exact ground state.
pub fn oracle_negativity(params: &ModelParams, block_len: usize, separation: usize) -> Result<f64> {
    let rho = exact_block_density(params, block_len, separation)?;
    Ok(entanglement::negativity(&rho)?.negativity)
}

/// Squared Schmidt coefficients of `state` across `system | rest`,
/// descending.
pub fn schmidt_weights(state: &PureState, system: &[usize]) -> Result<Vec<f64>> {
    let n = state.n_sites;
    let (s, _) = validate_sites(n, system, &[])?;
    let rest: Vec<usize> = (0..n).filter(|k| !s.contains(k)).collect();
    let bit = |k: usize| n - 1 - k;
    let mut psi = Mat::<f64>::zeros(1 << s.len(), 1 << rest.len());
    for (idx, &amp) in state.amplitudes.iter().enumerate() {
        let row = s.iter().fold(0, |acc, &k| (acc << 1) | ((idx >> bit(k)) & 1));
        let col = rest.iter().fold(0, |acc, &k| (acc << 1) | ((idx >> bit(k)) & 1));
        psi[(row, col)] = amp;
    }
    singular_weights(psi.as_ref())
}

/// Squared singular values of a coefficient matrix, descending.
pub fn singular_weights(psi: MatRef<'_, f64>) -> Result<Vec<f64>> {
    let sv = psi.singular_values().map_err(|_| Error::Eigen)?;
    let mut w: Vec<f64> = sv.iter().map(|x| x * x).collect();
    w.sort_by(|a, b| b.total_cmp(a));
    Ok(w)
}
