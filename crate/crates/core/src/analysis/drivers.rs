//! Experiment drivers: μ sweeps, fixed-μ λ scans, exact reference sweeps
//! and the comparison of two record sets.

use std::path::Path;

use num_rational::Ratio;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::records::{sort_records, ScalingRecord};
use crate::blocks::MuSeries;
use crate::checkpoint;
use crate::dmrg::{self, DmrgConfig, DmrgRun};
use crate::entanglement;
use crate::error::{Error, Result};
use crate::exact;
use crate::model::ModelParams;

/// A run that failed while the rest of a sweep went on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunFailure {
    pub n_sites: usize,
    pub lambda: f64,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SweepOutput {
    pub records: Vec<ScalingRecord>,
    pub failures: Vec<RunFailure>,
    pub warnings: Vec<String>,
}

impl SweepOutput {
    pub fn is_partial(&self) -> bool {
        !self.failures.is_empty()
    }
}

fn pool(jobs: usize) -> Result<rayon::ThreadPool> {
    if jobs == 0 {
        return Err(Error::Config("jobs must be at least 1".into()));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Config(format!("cannot start {jobs} workers: {e}")))
}

/// Smallest block length whose ratio `x/Δ` stays at or below `mu_max`.
fn smallest_block(n_sites: usize, mu_max: f64) -> usize {
    (1..n_sites / 2)
        .find(|&d| ScalingRecord::mu_of(d, n_sites - 2 * d) <= mu_max)
        .unwrap_or(n_sites / 2)
}

/// Records for every `(Δ, x)` of a finished run whose ratio lies in
/// `window`. Unnesting stops as soon as the ratio leaves the window.
pub fn records_from_run(run: &DmrgRun, window: [f64; 2]) -> Result<Vec<ScalingRecord>> {
    let p = &run.params;
    let n = p.n_sites;
    let mut out = Vec::new();
    if n / 2 <= smallest_block(n, window[1]) {
        return Ok(out);
    }
    let series = MuSeries::new(&run.state, &run.chains)?.stop_at(smallest_block(n, window[1]));
    for entry in series {
        let entry = entry?;
        if entry.mu < window[0] {
            continue;
        }
        let neg = entanglement::negativity(&entry.rho)?;
        out.push(ScalingRecord {
            n_sites: n,
            gamma: p.gamma,
            lambda: p.lambda,
            kept_states: run.config.max_kept_states,
            block_len: entry.block_len,
            separation: entry.separation,
            mu: entry.mu,
            negativity: neg.negativity,
            log_negativity: neg.log_negativity,
            truncated_weight: run.max_truncated_weight,
        });
    }
    Ok(out)
}

/// File name under which a run is cached in a checkpoint directory.
pub fn checkpoint_name(params: &ModelParams, config: &DmrgConfig) -> String {
    format!(
        "run-N{}-g{}-l{}-M{}.bnck",
        params.n_sites, params.gamma, params.lambda, config.max_kept_states
    )
}

/// Loads the cached run if its setup matches, otherwise runs DMRG and,
/// with a directory given, stores the result.
pub fn load_or_run(params: &ModelParams, config: &DmrgConfig, dir: Option<&Path>) -> Result<DmrgRun> {
    let path = dir.map(|d| d.join(checkpoint_name(params, config)));
    if let Some(path) = path.as_ref().filter(|p| p.exists()) {
        let ck = checkpoint::read_run(path)?;
        if ck.params == *params && ck.config == *config {
            log::info!("loaded {}", path.display());
            return Ok(ck.into_run());
        }
        log::warn!("{} holds a different setup; recomputing", path.display());
    }
    log::info!("dmrg: N={} γ={} λ={} M={}", params.n_sites, params.gamma, params.lambda, config.max_kept_states);
    let run = dmrg::run(params, config)?;
    if let Some(path) = &path {
        checkpoint::write_run(path, &run)?;
    }
    Ok(run)
}

fn one_sweep_run(
    params: &ModelParams,
    config: &DmrgConfig,
    window: [f64; 2],
    dir: Option<&Path>,
) -> Result<(Vec<ScalingRecord>, Vec<String>)> {
    let run = load_or_run(params, config, dir)?;
    let warnings = run.warnings.iter().map(|w| format!("N={}: {w}", params.n_sites)).collect();
    Ok((records_from_run(&run, window)?, warnings))
}

/// Runs DMRG for each chain length and collects the records inside
/// `window`. Failed runs are reported in [`SweepOutput::failures`].
pub fn mu_sweep(gamma: f64, lambda: f64, sizes: &[usize], config: &DmrgConfig, window: [f64; 2], jobs: usize) -> Result<SweepOutput> {
    mu_sweep_cached(gamma, lambda, sizes, config, window, jobs, None)
}

/// [`mu_sweep`] with runs cached as checkpoints in `dir`.
pub fn mu_sweep_cached(
    gamma: f64,
    lambda: f64,
    sizes: &[usize],
    config: &DmrgConfig,
    window: [f64; 2],
    jobs: usize,
    dir: Option<&Path>,
) -> Result<SweepOutput> {
    config.validate()?;
    if let Some(d) = dir {
        std::fs::create_dir_all(d).map_err(|e| Error::io(d, e))?;
    }
    super::fit::validate_window(window)?;
    let params: Vec<ModelParams> = sizes.iter().map(|&n| ModelParams::new(n, gamma, lambda)).collect::<Result<_>>()?;
    let results: Vec<(ModelParams, Result<(Vec<ScalingRecord>, Vec<String>)>)> =
        pool(jobs)?.install(|| params.par_iter().map(|p| (*p, one_sweep_run(p, config, window, dir))).collect());
    let mut out = SweepOutput::default();
    for (p, res) in results {
        match res {
            Ok((recs, warnings)) => {
                out.records.extend(recs);
                out.warnings.extend(warnings);
            }
            Err(e) => {
                log::warn!("run N={} failed: {e}", p.n_sites);
                out.failures.push(RunFailure {
                    n_sites: p.n_sites,
                    lambda: p.lambda,
                    message: e.to_string(),
                });
            }
        }
    }
    sort_records(&mut out.records);
    Ok(out)
}

/// Records from exact diagonalization, for every `(Δ, x)` of an `N`-site
/// chain in `window`.
pub fn oracle_records(params: &ModelParams, window: [f64; 2]) -> Result<Vec<ScalingRecord>> {
    let gs = exact::reference_ground_state(params)?;
    let n = params.n_sites;
    let mut out = Vec::new();
    for d in (1..n / 2).rev() {
        let x = n - 2 * d;
        let mu = ScalingRecord::mu_of(d, x);
        if mu < window[0] || mu > window[1] {
            continue;
        }
        let (s, e) = exact::symmetric_blocks(n, d, x)?;
        let rho = exact::reduced_density_operator(&gs.state, &s, &e)?;
        let neg = entanglement::negativity(&rho)?;
        out.push(ScalingRecord {
            n_sites: n,
            gamma: params.gamma,
            lambda: params.lambda,
            kept_states: 0,
            block_len: d,
            separation: x,
            mu,
            negativity: neg.negativity,
            log_negativity: neg.log_negativity,
            truncated_weight: 0.0,
        });
    }
    Ok(out)
}

/// Parses `"p/q"` or an integer into a positive ratio.
pub fn parse_ratio(s: &str) -> Result<Ratio<u64>> {
    let r: Ratio<u64> = s
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("cannot read {s:?} as a ratio p/q")))?;
    if *r.numer() == 0 {
        return Err(Error::Config("μ must be positive".into()));
    }
    Ok(r)
}

/// `(Δ, x)` with `x/Δ = mu` and `2Δ + x = n_sites`, if one exists.
pub fn realize(mu: Ratio<u64>, n_sites: usize) -> Result<(usize, usize)> {
    let (p, q) = (*mu.numer() as usize, *mu.denom() as usize);
    let period = 2 * q + p;
    let unrealizable = || Error::Unrealizable {
        mu: mu.to_string(),
        n_sites,
    };
    if !n_sites.is_multiple_of(2) || !n_sites.is_multiple_of(period) {
        return Err(unrealizable());
    }
    let k = n_sites / period;
    Ok((k * q, k * p))
}

/// Negativity of the blocks of `block_len` sites in a finished run.
pub fn negativity_at(run: &DmrgRun, block_len: usize) -> Result<entanglement::NegativityResult> {
    let mut series = MuSeries::new(&run.state, &run.chains)?.stop_at(block_len);
    series.skip_to(block_len)?;
    let entry = series
        .next()
        .ok_or_else(|| Error::InvalidParameter(format!("no blocks of {block_len} sites in an {}-site run", run.params.n_sites)))??;
    entanglement::negativity(&entry.rho)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanPoint {
    pub n_sites: usize,
    pub lambda: f64,
    pub block_len: usize,
    pub separation: usize,
    pub negativity: f64,
    pub truncated_weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Crossing {
    pub n_small: usize,
    pub n_large: usize,
    pub lambda: f64,
    pub negativity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaScan {
    pub gamma: f64,
    pub mu: String,
    pub points: Vec<ScanPoint>,
    /// Chain lengths at which the ratio has no integer realization.
    pub skipped: Vec<usize>,
    pub failures: Vec<RunFailure>,
    pub crossings: Vec<Crossing>,
}

impl LambdaScan {
    pub fn is_partial(&self) -> bool {
        !self.failures.is_empty()
    }

    pub fn point(&self, n_sites: usize, lambda: f64) -> Option<&ScanPoint> {
        self.points.iter().find(|p| p.n_sites == n_sites && p.lambda == lambda)
    }
}

/// Negativity at the fixed ratio `mu` for every chain length and field.
pub fn lambda_scan(
    gamma: f64,
    mu: Ratio<u64>,
    sizes: &[usize],
    lambdas: &[f64],
    config: &DmrgConfig,
    jobs: usize,
) -> Result<LambdaScan> {
    config.validate()?;
    if lambdas.is_empty() {
        return Err(Error::Config("λ grid is empty".into()));
    }
    let mut skipped = Vec::new();
    let mut jobs_list = Vec::new();
    for &n in sizes {
        match realize(mu, n) {
            Ok((d, _)) => {
                for &l in lambdas {
                    jobs_list.push((ModelParams::new(n, gamma, l)?, d));
                }
            }
            Err(e) => {
                log::warn!("skipping N={n}: {e}");
                skipped.push(n);
            }
        }
    }
    let results: Vec<(ModelParams, usize, Result<ScanPoint>)> = pool(jobs)?.install(|| {
        jobs_list
            .par_iter()
            .map(|&(p, d)| {
                let point = (|| {
                    log::info!("scan: N={} λ={} Δ={d}", p.n_sites, p.lambda);
                    let run = dmrg::run(&p, config)?;
                    let neg = negativity_at(&run, d)?;
                    Ok(ScanPoint {
                        n_sites: p.n_sites,
                        lambda: p.lambda,
                        block_len: d,
                        separation: p.n_sites - 2 * d,
                        negativity: neg.negativity,
                        truncated_weight: run.max_truncated_weight,
                    })
                })();
                (p, d, point)
            })
            .collect()
    });
    let mut points = Vec::new();
    let mut failures = Vec::new();
    for (p, _, res) in results {
        match res {
            Ok(pt) => points.push(pt),
            Err(e) => failures.push(RunFailure {
                n_sites: p.n_sites,
                lambda: p.lambda,
                message: e.to_string(),
            }),
        }
    }
    points.sort_by(|a, b| a.n_sites.cmp(&b.n_sites).then(a.lambda.total_cmp(&b.lambda)));
    let crossings = crossings(&points);
    Ok(LambdaScan {
        gamma,
        mu: mu.to_string(),
        points,
        skipped,
        failures,
        crossings,
    })
}

/// Where the curves of consecutive chain lengths intersect, by linear
/// interpolation of their difference between adjacent common fields.
pub fn crossings(points: &[ScanPoint]) -> Vec<Crossing> {
    let mut sizes: Vec<usize> = points.iter().map(|p| p.n_sites).collect();
    sizes.sort_unstable();
    sizes.dedup();
    let curve = |n: usize| {
        let mut c: Vec<(f64, f64)> = points.iter().filter(|p| p.n_sites == n).map(|p| (p.lambda, p.negativity)).collect();
        c.sort_by(|a, b| a.0.total_cmp(&b.0));
        c
    };
    let mut out = Vec::new();
    for pair in sizes.windows(2) {
        let (a, b) = (curve(pair[0]), curve(pair[1]));
        let common: Vec<(f64, f64, f64)> = a
            .iter()
            .filter_map(|&(l, na)| b.iter().find(|&&(lb, _)| lb == l).map(|&(_, nb)| (l, na, nb)))
            .collect();
        for w in common.windows(2) {
            let (l0, a0, b0) = w[0];
            let (l1, a1, b1) = w[1];
            let (d0, d1) = (a0 - b0, a1 - b1);
            if d0 == 0.0 {
                out.push(Crossing {
                    n_small: pair[0],
                    n_large: pair[1],
                    lambda: l0,
                    negativity: a0,
                });
            } else if d0 * d1 < 0.0 {
                let t = d0 / (d0 - d1);
                out.push(Crossing {
                    n_small: pair[0],
                    n_large: pair[1],
                    lambda: l0 + t * (l1 - l0),
                    negativity: a0 + t * (a1 - a0),
                });
            }
        }
    }
    out
}

/// Negativity curve as a function of μ, one point per distinct ratio.
/// Where several chain lengths give the same ratio the largest wins.
fn curve(records: &[ScalingRecord], mu_cut: f64) -> Vec<(f64, f64)> {
    let mut sorted: Vec<&ScalingRecord> = records.iter().filter(|r| r.mu <= mu_cut && r.negativity > 0.0).collect();
    sorted.sort_by(|a, b| a.mu.total_cmp(&b.mu).then(b.n_sites.cmp(&a.n_sites)));
    let mut out: Vec<(f64, f64)> = Vec::new();
    for r in sorted {
        if out.last().is_none_or(|&(mu, _)| mu != r.mu) {
            out.push((r.mu, r.negativity.ln()));
        }
    }
    out
}

/// `ln 𝒩` at `mu`, linearly interpolated; `None` outside the curve.
fn interpolate(curve: &[(f64, f64)], mu: f64) -> Option<f64> {
    let i = curve.partition_point(|&(m, _)| m < mu);
    if i < curve.len() && curve[i].0 == mu {
        return Some(curve[i].1);
    }
    if i == 0 || i == curve.len() {
        return None;
    }
    let ((m0, y0), (m1, y1)) = (curve[i - 1], curve[i]);
    Some(y0 + (mu - m0) / (m1 - m0) * (y1 - y0))
}

/// Largest relative deviation `|𝒩_a - 𝒩_b| / min(𝒩_a, 𝒩_b)` over the
/// ratios `μ ≤ mu_cut` covered by both sets. Each set is evaluated at the
/// other's ratios by interpolating `ln 𝒩` linearly in μ.
pub fn universality_compare(records_a: &[ScalingRecord], records_b: &[ScalingRecord], mu_cut: f64) -> Result<f64> {
    let (ca, cb) = (curve(records_a, mu_cut), curve(records_b, mu_cut));
    let mut worst: Option<f64> = None;
    let mut visit = |mu: f64| {
        if let (Some(la), Some(lb)) = (interpolate(&ca, mu), interpolate(&cb, mu)) {
            let dev = (la - lb).abs().exp_m1();
            worst = Some(worst.map_or(dev, |w| w.max(dev)));
        }
    };
    ca.iter().chain(&cb).for_each(|&(mu, _)| visit(mu));
    worst.ok_or(Error::NoOverlap)
}
