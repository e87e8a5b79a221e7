//! Entanglement between separated blocks of spins in open XY chains.
//!
//! The pipeline is: [`dmrg`] finds the ground state in the `S • • E`
//! superblock form while storing every block-growth transformation,
//! [`blocks`] reads off the reduced density operator of the two outer
//! blocks and repeatedly unnests it to larger separations, and
//! [`entanglement`] evaluates the negativity of each operator. [`exact`]
//! provides brute-force references for small chains, and [`analysis`]
//! drives parameter scans, fits the power-law/exponential ansatz and
//! exports data.

pub mod analysis;
pub mod blocks;
pub mod checkpoint;
pub mod dmrg;
pub mod entanglement;
pub mod error;
pub mod exact;
pub mod linalg;
pub mod model;

pub use blocks::{BasisTag, DensityOperator, MuSeries, MuSeriesEntry, SectorLabels};
pub use dmrg::{BlockBasis, DmrgConfig, DmrgRun, SuperblockState};
pub use entanglement::NegativityResult;
pub use error::{Error, Result};
pub use exact::PureState;
pub use model::{CriticalPoint, ModelParams, Sector, Symmetry};
