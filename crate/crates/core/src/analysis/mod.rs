//! Scans over chain length and field, the ansatz fit and data export.

pub mod config;
pub mod drivers;
pub mod fit;
pub mod records;

pub use config::RunConfig;
pub use drivers::{
    checkpoint_name, crossings, lambda_scan, load_or_run, mu_sweep, mu_sweep_cached, negativity_at, oracle_records, parse_ratio, realize, records_from_run, universality_compare,
    Crossing, LambdaScan, RunFailure, ScanPoint, SweepOutput,
};
pub use fit::{fit_ansatz, FitResult, DEFAULT_WINDOW};
pub use records::{export_fits, export_records, import_records, Format, Provenance, ScalingRecord};
