//! Scaling records and their CSV/JSON serialization.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::fit::FitResult;
use crate::error::{Error, Result};

/// Negativity of one `(Δ, x)` pair of blocks at one chain length.
///
/// `mu` is the correctly rounded quotient `x / Δ`, so equal rational ratios
/// from different chain lengths compare equal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingRecord {
    pub n_sites: usize,
    pub gamma: f64,
    pub lambda: f64,
    /// Decimation cap of the run; 0 for exact-diagonalization records.
    pub kept_states: usize,
    pub block_len: usize,
    pub separation: usize,
    pub mu: f64,
    pub negativity: f64,
    pub log_negativity: f64,
    pub truncated_weight: f64,
}

impl ScalingRecord {
    pub fn mu_of(block_len: usize, separation: usize) -> f64 {
        separation as f64 / block_len as f64
    }

    pub fn validate(&self) -> Result<()> {
        if self.block_len == 0 || 2 * self.block_len + self.separation != self.n_sites {
            return Err(Error::InvalidParameter(format!(
                "record with Δ={} x={} does not tile N={}",
                self.block_len, self.separation, self.n_sites
            )));
        }
        if self.mu != Self::mu_of(self.block_len, self.separation) {
            return Err(Error::InvalidParameter(format!(
                "record μ={} differs from x/Δ = {}/{}",
                self.mu, self.separation, self.block_len
            )));
        }
        Ok(())
    }
}

/// Sort key used before every export: chain length, then ratio.
pub fn sort_records(records: &mut [ScalingRecord]) {
    records.sort_by(|a, b| a.n_sites.cmp(&b.n_sites).then(a.mu.total_cmp(&b.mu)));
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(Error::Config(format!("unknown format {other:?}, expected csv or json"))),
        }
    }

    /// Guesses the format from a file extension.
    pub fn from_path(path: &Path) -> Option<Self> {
        match path.extension()?.to_str()?.to_ascii_lowercase().as_str() {
            "csv" => Some(Format::Csv),
            "json" => Some(Format::Json),
            _ => None,
        }
    }
}

/// What produced a file: crate version, the command and its settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub package: String,
    pub version: String,
    pub checkpoint_format: u32,
    pub command: String,
    pub config: serde_json::Value,
}

impl Provenance {
    pub fn new(command: impl Into<String>, config: serde_json::Value) -> Self {
        Provenance {
            package: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            checkpoint_format: crate::checkpoint::FORMAT_VERSION,
            command: command.into(),
            config,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordFile {
    pub provenance: Provenance,
    pub records: Vec<ScalingRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitFile {
    pub provenance: Provenance,
    pub fits: Vec<FitResult>,
}

const FIT_COLUMNS: [&str; 9] = [
    "h",
    "alpha",
    "amplitude",
    "mu_min",
    "mu_max",
    "residual_norm",
    "n_points",
    "use_log_negativity",
    "covariance",
];

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| Error::io(path, e))
}

pub fn write_records_csv<W: Write>(out: W, records: &[ScalingRecord]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    // Written explicitly so that an empty list still gets its header.
    w.write_record([
        "n_sites",
        "gamma",
        "lambda",
        "kept_states",
        "block_len",
        "separation",
        "mu",
        "negativity",
        "log_negativity",
        "truncated_weight",
    ])?;
    for r in records {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}

pub fn read_records_csv<R: std::io::Read>(input: R) -> Result<Vec<ScalingRecord>> {
    let mut rd = csv::Reader::from_reader(input);
    let mut out = Vec::new();
    for row in rd.deserialize() {
        out.push(row?);
    }
    Ok(out)
}

/// Writes records in the given format; JSON output carries `provenance`.
pub fn export_records(path: &Path, format: Format, records: &[ScalingRecord], provenance: &Provenance) -> Result<()> {
    let mut sorted = records.to_vec();
    sort_records(&mut sorted);
    let mut out = create(path)?;
    match format {
        Format::Csv => write_records_csv(&mut out, &sorted)?,
        Format::Json => {
            let file = RecordFile {
                provenance: provenance.clone(),
                records: sorted,
            };
            serde_json::to_writer_pretty(&mut out, &file)?;
            out.write_all(b"\n").map_err(|e| Error::io(path, e))?;
        }
    }
    out.flush().map_err(|e| Error::io(path, e))
}

pub fn import_records(path: &Path, format: Format) -> Result<Vec<ScalingRecord>> {
    let input = open(path)?;
    let records = match format {
        Format::Csv => read_records_csv(input)?,
        Format::Json => serde_json::from_reader::<_, RecordFile>(input)?.records,
    };
    for r in &records {
        r.validate()?;
    }
    Ok(records)
}

pub fn export_fits(path: &Path, format: Format, fits: &[FitResult], provenance: &Provenance) -> Result<()> {
    let mut out = create(path)?;
    match format {
        Format::Csv => {
            let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(&mut out);
            w.write_record(FIT_COLUMNS)?;
            for f in fits {
                let cov: Vec<String> = f.covariance.iter().flatten().map(|v| v.to_string()).collect();
                w.write_record([
                    f.h.to_string(),
                    f.alpha.to_string(),
                    f.amplitude.to_string(),
                    f.fit_window[0].to_string(),
                    f.fit_window[1].to_string(),
                    f.residual_norm.to_string(),
                    f.n_points.to_string(),
                    f.use_log_negativity.to_string(),
                    cov.join(" "),
                ])?;
            }
            w.flush().map_err(|e| Error::io(path, e))?;
        }
        Format::Json => {
            let file = FitFile {
                provenance: provenance.clone(),
                fits: fits.to_vec(),
            };
            serde_json::to_writer_pretty(&mut out, &file)?;
            out.write_all(b"\n").map_err(|e| Error::io(path, e))?;
        }
    }
    out.flush().map_err(|e| Error::io(path, e))
}
