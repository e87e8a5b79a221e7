//! Least-squares fit of `𝒩 ≈ A μ^{-h} e^{-αμ}`.
//!
//! Taking logarithms gives `ln 𝒩 = ln A - h ln μ - α μ`, linear in
//! `(ln A, h, α)`, which is solved through an SVD of the column-scaled
//! design matrix.

use faer::Mat;
use serde::{Deserialize, Serialize};

use super::records::ScalingRecord;
use crate::error::{Error, Result};

pub const DEFAULT_WINDOW: [f64; 2] = [0.1, 3.0];
pub const MIN_FIT_POINTS: usize = 6;
/// Design matrices with a larger (column-scaled) condition number are
/// treated as rank deficient.
pub const MAX_CONDITION: f64 = 1e10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub h: f64,
    pub alpha: f64,
    pub amplitude: f64,
    pub fit_window: [f64; 2],
    /// Euclidean norm of the log-space residuals.
    pub residual_norm: f64,
    /// Covariance of `(ln A, h, α)` from the residual variance.
    pub covariance: [[f64; 3]; 3],
    pub n_points: usize,
    pub use_log_negativity: bool,
}

impl FitResult {
    /// Value of the fitted curve at `mu`.
    pub fn evaluate(&self, mu: f64) -> f64 {
        self.amplitude * mu.powf(-self.h) * (-self.alpha * mu).exp()
    }
}

pub fn validate_window(window: [f64; 2]) -> Result<()> {
    let [lo, hi] = window;
    if !(lo > 0.0) || !(hi > lo) || !hi.is_finite() {
        return Err(Error::InvalidParameter(format!("fit window [{lo}, {hi}] must satisfy 0 < min < max")));
    }
    Ok(())
}

/// Fits the ansatz to the records with `μ` inside `window` (inclusive).
/// With `use_log_negativity` the logarithmic negativity is fitted instead.
pub fn fit_ansatz(records: &[ScalingRecord], window: [f64; 2], use_log_negativity: bool) -> Result<FitResult> {
    validate_window(window)?;
    let points: Vec<(f64, f64)> = records
        .iter()
        .filter(|r| r.mu >= window[0] && r.mu <= window[1])
        .map(|r| (r.mu, if use_log_negativity { r.log_negativity } else { r.negativity }))
        .collect();
    if points.len() < MIN_FIT_POINTS {
        return Err(Error::TooFewRecords {
            needed: MIN_FIT_POINTS,
            found: points.len(),
        });
    }
    if let Some(&(mu, value)) = points.iter().find(|(_, v)| !(*v > 0.0)) {
        return Err(Error::NonPositive { mu, value });
    }

    let n = points.len();
    let design = Mat::from_fn(n, 3, |i, j| match j {
        0 => 1.0,
        1 => -points[i].0.ln(),
        _ => -points[i].0,
    });
    let y: Vec<f64> = points.iter().map(|&(_, v)| v.ln()).collect();

    let scale: Vec<f64> = (0..3).map(|j| (0..n).map(|i| design[(i, j)].powi(2)).sum::<f64>().sqrt()).collect();
    if scale.contains(&0.0) {
        return Err(Error::RankDeficient { condition: f64::INFINITY });
    }
    let scaled = Mat::from_fn(n, 3, |i, j| design[(i, j)] / scale[j]);
    let svd = scaled.thin_svd().map_err(|_| Error::Eigen)?;
    let s = svd.S().column_vector();
    let (smax, smin) = (s[0].max(s[2]), s[0].min(s[2]));
    let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    if !(condition <= MAX_CONDITION) {
        return Err(Error::RankDeficient { condition });
    }

    let (u, v) = (svd.U(), svd.V());
    let mut coeffs = [0.0; 3];
    for k in 0..3 {
        let proj: f64 = (0..n).map(|i| u[(i, k)] * y[i]).sum::<f64>() / s[k];
        for (j, c) in coeffs.iter_mut().enumerate() {
            *c += v[(j, k)] * proj;
        }
    }
    for (c, sc) in coeffs.iter_mut().zip(&scale) {
        *c /= sc;
    }

    let residual_sq: f64 = (0..n)
        .map(|i| {
            let model: f64 = (0..3).map(|j| design[(i, j)] * coeffs[j]).sum();
            (y[i] - model).powi(2)
        })
        .sum();
    let variance = residual_sq / (n - 3) as f64;
    let mut covariance = [[0.0; 3]; 3];
    for (a, row) in covariance.iter_mut().enumerate() {
        for (b, entry) in row.iter_mut().enumerate() {
            let g: f64 = (0..3).map(|k| v[(a, k)] * v[(b, k)] / (s[k] * s[k])).sum();
            *entry = variance * g / (scale[a] * scale[b]);
        }
    }

    Ok(FitResult {
        h: coeffs[1],
        alpha: coeffs[2],
        amplitude: coeffs[0].exp(),
        fit_window: window,
        residual_norm: residual_sq.sqrt(),
        covariance,
        n_points: n,
        use_log_negativity,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synthetic(a: f64, h: f64, alpha: f64, pairs: &[(usize, usize)]) -> Vec<ScalingRecord> {
        pairs
            .iter()
            .map(|&(d, x)| {
                let mu = ScalingRecord::mu_of(d, x);
                let neg = a * mu.powf(-h) * (-alpha * mu).exp();
                ScalingRecord {
                    n_sites: 2 * d + x,
                    gamma: 0.0,
                    lambda: 0.0,
                    kept_states: 0,
                    block_len: d,
                    separation: x,
                    mu,
                    negativity: neg,
                    log_negativity: crate::entanglement::log_negativity(neg),
                    truncated_weight: 0.0,
                }
            })
            .collect()
    }

    fn grid() -> Vec<(usize, usize)> {
        (10..=47).map(|d| (d, 96 - 2 * d)).collect()
    }

    #[test]
    fn noise_free_data_is_recovered() {
        let recs = synthetic(1.0, 0.47, 0.96, &grid());
        let fit = fit_ansatz(&recs, DEFAULT_WINDOW, false).unwrap();
        assert!((fit.h - 0.47).abs() < 1e-10, "{}", fit.h);
        assert!((fit.alpha - 0.96).abs() < 1e-10);
        assert!((fit.amplitude - 1.0).abs() < 1e-10);
        assert!(fit.residual_norm < 1e-10);
        assert!(fit.covariance.iter().flatten().all(|c| c.abs() < 1e-18));
        for r in &recs {
            assert!((fit.evaluate(r.mu) / r.negativity - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn window_selects_points() {
        let recs = synthetic(0.3, 0.38, 1.68, &grid());
        let inside = recs.iter().filter(|r| r.mu >= 0.5 && r.mu <= 2.0).count();
        let fit = fit_ansatz(&recs, [0.5, 2.0], false).unwrap();
        assert_eq!(fit.n_points, inside);
        assert_eq!(fit.fit_window, [0.5, 2.0]);
        assert!((fit.amplitude - 0.3).abs() < 1e-10);
    }

    #[test]
    fn covariance_is_symmetric_and_positive_on_noisy_data() {
        let mut recs = synthetic(1.0, 0.4, 1.2, &grid());
        for (i, r) in recs.iter_mut().enumerate() {
            r.negativity *= 1.0 + 0.01 * if i % 2 == 0 { 1.0 } else { -1.0 };
        }
        let fit = fit_ansatz(&recs, DEFAULT_WINDOW, false).unwrap();
        for a in 0..3 {
            assert!(fit.covariance[a][a] > 0.0);
            for b in 0..3 {
                assert!((fit.covariance[a][b] - fit.covariance[b][a]).abs() <= 1e-12 * fit.covariance[a][a].abs().max(1e-300));
            }
        }
        assert!(fit.residual_norm > 0.0);
    }

    #[test]
    fn too_few_points() {
        let recs = synthetic(1.0, 0.5, 1.0, &[(10, 6), (10, 8), (10, 10), (10, 12), (10, 14)]);
        assert!(matches!(
            fit_ansatz(&recs, DEFAULT_WINDOW, false),
            Err(Error::TooFewRecords { needed: 6, found: 5 })
        ));
    }

    #[test]
    fn collinear_mu_is_rank_deficient() {
        // Six records, all at μ = 1.
        let recs = synthetic(1.0, 0.5, 1.0, &[(2, 2), (4, 4), (6, 6), (8, 8), (10, 10), (12, 12)]);
        assert!(matches!(fit_ansatz(&recs, DEFAULT_WINDOW, false), Err(Error::RankDeficient { .. })));
    }

    #[test]
    fn nonpositive_negativity_is_rejected() {
        let mut recs = synthetic(1.0, 0.5, 1.0, &grid());
        recs[20].negativity = 0.0;
        let mu = recs[20].mu;
        assert!(matches!(fit_ansatz(&recs, DEFAULT_WINDOW, false), Err(Error::NonPositive { mu: m, .. }) if m == mu));
    }

    #[test]
    fn log_negativity_flag_fits_the_other_column() {
        let mut recs = synthetic(1.0, 0.33, 0.9, &grid());
        for r in &mut recs {
            std::mem::swap(&mut r.negativity, &mut r.log_negativity);
        }
        let fit = fit_ansatz(&recs, DEFAULT_WINDOW, true).unwrap();
        assert!((fit.h - 0.33).abs() < 1e-10);
        assert!(fit.use_log_negativity);
    }

    #[test]
    fn bad_windows() {
        let recs = synthetic(1.0, 0.5, 1.0, &grid());
        assert!(fit_ansatz(&recs, [0.0, 3.0], false).is_err());
        assert!(fit_ansatz(&recs, [2.0, 1.0], false).is_err());
    }
}
