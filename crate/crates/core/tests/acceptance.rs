//! Acceptance suite: one test per criterion, each printing a PASS/FAIL line.
//!
//! Heavy DMRG runs are shared between criteria through `OnceLock`s, so the
//! whole suite costs roughly one pass over the runs listed below:
//!
//! | run                          | M  | used by |
//! |------------------------------|----|---------|
//! | Ising N = 64, 128, 256 (μ ≤ 3) | 40 | 2, 3, 6, 7, 8 |
//! | Ising N = 128, 256 at λ = 0.95, 1.05 | 40 | 2 |
//! | Ising N = 132, 264 (μ = 1)    | 40 | 7 |
//! | Ising N = 64, 128, 256        | 60 | 8 |
//! | XY γ = 0.5, N = 128           | 40 | 6 |
//! | XX N = 96                     | 60, 40 | 4, 5, 6, 8 |

mod common;

use std::io::Write;
use std::sync::OnceLock;

use blockneg_core::analysis::{self, ScalingRecord};
use blockneg_core::dmrg::{self, DmrgConfig, DmrgRun};
use blockneg_core::entanglement::{self, negativity, partial_transpose, pure_state_negativity};
use blockneg_core::exact;
use blockneg_core::linalg::hermitian_eigenvalues;
use blockneg_core::model::{CriticalPoint, ModelParams};
use blockneg_core::{BasisTag, DensityOperator};
use faer::Mat;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const WINDOW: [f64; 2] = [0.1, 3.0];

/// Written to stderr directly so the line shows even when output is captured.
fn report(id: u32, title: &str, pass: bool, detail: &str) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    let mut err = std::io::stderr().lock();
    let _ = writeln!(err, "[acceptance] criterion {id} {verdict}: {title} | {detail}");
}

fn config(m: usize) -> DmrgConfig {
    DmrgConfig::default().with_kept_states(m)
}

fn run(params: ModelParams, m: usize) -> DmrgRun {
    dmrg::run(&params, &config(m)).expect("dmrg run")
}

fn find(records: &[ScalingRecord], n: usize, block_len: usize) -> &ScalingRecord {
    records
        .iter()
        .find(|r| r.n_sites == n && r.block_len == block_len)
        .unwrap_or_else(|| panic!("no record for N={n} Δ={block_len}"))
}

fn ising_records() -> &'static [ScalingRecord] {
    static CELL: OnceLock<Vec<ScalingRecord>> = OnceLock::new();
    CELL.get_or_init(|| {
        let out = analysis::mu_sweep(1.0, 1.0, &[64, 128, 256], &config(40), WINDOW, 1).expect("ising sweep");
        assert!(out.failures.is_empty(), "{:?}", out.failures);
        out.records
    })
}

fn xy_records() -> &'static [ScalingRecord] {
    static CELL: OnceLock<Vec<ScalingRecord>> = OnceLock::new();
    CELL.get_or_init(|| {
        let out = analysis::mu_sweep(0.5, 1.0, &[128], &config(40), WINDOW, 1).expect("xy sweep");
        assert!(out.failures.is_empty(), "{:?}", out.failures);
        out.records
    })
}

struct XxData {
    records: Vec<ScalingRecord>,
    max_step_weight: f64,
}

fn xx_data() -> &'static XxData {
    static CELL: OnceLock<XxData> = OnceLock::new();
    CELL.get_or_init(|| {
        let r = run(CriticalPoint::Xx.params(96), 60);
        let max_step_weight = r.step_truncated_weights.iter().copied().fold(0.0, f64::max);
        XxData {
            records: analysis::records_from_run(&r, WINDOW).expect("xx records"),
            max_step_weight,
        }
    })
}

#[test]
fn criterion_1_oracle_equivalence() {
    let start = std::time::Instant::now();
    let mut worst: f64 = 0.0;
    let mut compared = 0;
    let mut mismatch = None;
    for n in [8, 12, 14] {
        for cp in CriticalPoint::ALL {
            let p = cp.params(n);
            let all = [f64::MIN_POSITIVE, f64::MAX];
            let oracle = analysis::oracle_records(&p, all).unwrap();
            let dmrg = analysis::records_from_run(&run(p, 32), all).unwrap();
            assert_eq!(oracle.len(), n / 2 - 1);
            assert_eq!(dmrg.len(), oracle.len());
            for (a, b) in dmrg.iter().zip(&oracle) {
                assert_eq!((a.block_len, a.separation), (b.block_len, b.separation));
                let d = (a.negativity - b.negativity).abs();
                if d > worst {
                    worst = d;
                    mismatch = Some((n, cp, a.block_len));
                }
                compared += 1;
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let pass = worst < 1e-6 && secs < 120.0;
    report(
        1,
        "DMRG pipeline vs exact negativity, N ∈ {8,12,14} × 3 points, M=32",
        pass,
        &format!("{compared} pairs, max |Δ𝒩| = {worst:.2e} at {mismatch:?} (< 1e-6), {secs:.1}s (< 120s)"),
    );
    assert!(pass);
}

#[test]
fn criterion_2_fixed_ratio_crossing() {
    let recs = ising_records();
    // μ = 2/3: N=128 → Δ=48, N=256 → Δ=96.
    let at_crit = [find(recs, 128, 48).negativity, find(recs, 256, 96).negativity];
    let scan = analysis::lambda_scan(1.0, analysis::parse_ratio("2/3").unwrap(), &[128, 256], &[0.95, 1.05], &config(40), 1).unwrap();
    assert!(scan.failures.is_empty() && scan.skipped.is_empty());
    let gap = |l: f64| (scan.point(128, l).unwrap().negativity - scan.point(256, l).unwrap().negativity).abs();
    let (below, above) = (gap(0.95), gap(1.05));
    let crit_gap = (at_crit[0] - at_crit[1]).abs();
    let pass = at_crit.iter().all(|v| (v - 0.052).abs() <= 0.004) && crit_gap < 0.002 && below > 0.005 && above > 0.005;
    report(
        2,
        "Ising μ=2/3 crossing at λ=1 with 𝒩 ≈ 0.052",
        pass,
        &format!(
            "𝒩(λ=1): N=128 {:.5}, N=256 {:.5} (0.052 ± 0.004), |diff| {crit_gap:.5} (< 0.002); |diff| at λ=0.95 {below:.5}, at 1.05 {above:.5} (> 0.005)",
            at_crit[0], at_crit[1]
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_3_ising_fit() {
    let fit = analysis::fit_ansatz(ising_records(), WINDOW, false).unwrap();
    let pass = (fit.h - 0.38).abs() <= 0.06 && (fit.alpha - 1.68).abs() <= 0.20;
    report(
        3,
        "critical Ising fit, N ∈ {64,128,256}, μ ∈ [0.1, 3]",
        pass,
        &format!("h = {:.4} (0.38 ± 0.06), α = {:.4} (1.68 ± 0.20), {} points", fit.h, fit.alpha, fit.n_points),
    );
    assert!(pass);
}

#[test]
fn criterion_4_xx_fit() {
    let fit = analysis::fit_ansatz(&xx_data().records, WINDOW, false).unwrap();
    let pass = (fit.h - 0.47).abs() <= 0.07 && (fit.alpha - 0.96).abs() <= 0.15;
    report(
        4,
        "critical XX fit, N = 96, M = 60",
        pass,
        &format!("h = {:.4} (0.47 ± 0.07), α = {:.4} (0.96 ± 0.15), {} points", fit.h, fit.alpha, fit.n_points),
    );
    assert!(pass);
}

#[test]
fn criterion_5_log_negativity_exponent() {
    let fit = analysis::fit_ansatz(&xx_data().records, WINDOW, true).unwrap();
    let pass = (fit.h - 0.33).abs() <= 0.06;
    report(
        5,
        "XX refit with E_LN",
        pass,
        &format!("h = {:.4} (0.33 ± 0.06), α = {:.4}", fit.h, fit.alpha),
    );
    assert!(pass);
}

#[test]
fn criterion_6_universality() {
    let ising_128: Vec<ScalingRecord> = ising_records().iter().filter(|r| r.n_sites == 128).cloned().collect();
    let same_class = analysis::universality_compare(&ising_128, xy_records(), 2.5).unwrap();
    let other_class = analysis::universality_compare(&ising_128, &xx_data().records, 2.5).unwrap();
    let pass = same_class <= 0.10 && other_class > same_class;
    report(
        6,
        "Ising vs γ=0.5 XY vs XX for μ ≤ 2.5",
        pass,
        &format!("Ising/XY max rel. dev. {same_class:.4} (≤ 0.10), Ising/XX {other_class:.4} (> Ising/XY)"),
    );
    assert!(pass);
}

#[test]
fn criterion_7_scale_invariance() {
    let recs = ising_records();
    let mut rows = Vec::new();
    // μ = 2/3 and μ = 2 from the N = 128/256 sweep.
    rows.push(("2/3", find(recs, 128, 48).negativity, find(recs, 256, 96).negativity));
    rows.push(("2", find(recs, 128, 32).negativity, find(recs, 256, 64).negativity));
    // μ = 1 needs N divisible by 3: (Δ, x) = (44, 44) and (88, 88).
    let one = analysis::lambda_scan(1.0, analysis::parse_ratio("1").unwrap(), &[132, 264], &[1.0], &config(40), 1).unwrap();
    assert!(one.failures.is_empty() && one.skipped.is_empty());
    rows.push(("1", one.point(132, 1.0).unwrap().negativity, one.point(264, 1.0).unwrap().negativity));
    let devs: Vec<(&str, f64)> = rows.iter().map(|&(mu, a, b)| (mu, (a - b).abs() / a.min(b))).collect();
    let pass = devs.iter().all(|&(_, d)| d < 0.05);
    let detail: Vec<String> = rows
        .iter()
        .zip(&devs)
        .map(|(&(mu, a, b), &(_, d))| format!("μ={mu}: {a:.5} vs {b:.5} ({:.2}%)", 100.0 * d))
        .collect();
    report(7, "critical Ising 𝒩 at (Δ, x) vs (2Δ, 2x), N ≥ 128", pass, &format!("{} (< 5%)", detail.join(", ")));
    assert!(pass);
}

#[test]
fn criterion_8_accuracy_contract() {
    let mut ising_eps: f64 = 0.0;
    let mut ising_128_m60 = None;
    for n in [64, 128, 256] {
        let r = run(CriticalPoint::Ising.params(n), 60);
        ising_eps = ising_eps.max(r.step_truncated_weights.iter().copied().fold(0.0, f64::max));
        if n == 128 {
            ising_128_m60 = Some(analysis::negativity_at(&r, 48).unwrap().negativity);
        }
    }
    let xx_eps = xx_data().max_step_weight;

    let ising_m40 = find(ising_records(), 128, 48).negativity;
    let ising_m60 = ising_128_m60.unwrap();
    let xx_m60 = find(&xx_data().records, 96, 36).negativity;
    let xx_m40 = analysis::negativity_at(&run(CriticalPoint::Xx.params(96), 40), 36).unwrap().negativity;
    let (d_ising, d_xx) = ((ising_m60 - ising_m40).abs(), (xx_m60 - xx_m40).abs());

    let pass = ising_eps < 1e-10 && xx_eps < 1e-8 && d_ising < 5e-6 && d_xx < 5e-4;
    report(
        8,
        "truncated weight per step and M = 40 → 60 stability",
        pass,
        &format!(
            "Ising N ≤ 256 max ε {ising_eps:.2e} (< 1e-10), XX N=96 max ε {xx_eps:.2e} (< 1e-8); \
             μ=2/3 spot checks: Ising N=128 |Δ𝒩| {d_ising:.1e} (< 5e-6), XX N=96 |Δ𝒩| {d_xx:.1e} (< 5e-4)"
        ),
    );
    assert!(pass);
}

fn bell() -> DensityOperator {
    let v = [1.0 / 2f64.sqrt(), 0.0, 0.0, 1.0 / 2f64.sqrt()];
    DensityOperator::new(Mat::from_fn(4, 4, |i, j| v[i] * v[j]), 2, 2, 1, 0, BasisTag::Physical).unwrap()
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 4.0 * f64::EPSILON
}

#[test]
fn criterion_9_unit_invariants() {
    let mut failures = Vec::new();
    let mut check = |name: &str, ok: bool| {
        if !ok {
            failures.push(name.to_string());
        }
    };

    let b = bell();
    let spec = hermitian_eigenvalues(partial_transpose(&b).unwrap().as_ref()).unwrap();
    check("Bell partial transpose {-½, ½, ½, ½}", spec.iter().zip([-0.5, 0.5, 0.5, 0.5]).all(|(&a, e)| close(a, e)));
    let nb = negativity(&b).unwrap();
    check("Bell 𝒩 = 1", close(nb.negativity, 1.0));
    check("Bell E_LN = 1", close(nb.log_negativity, 1.0));

    let mixed = DensityOperator::new(Mat::from_fn(4, 4, |i, j| if i == j { 0.25 } else { 0.0 }), 2, 2, 1, 0, BasisTag::Physical).unwrap();
    check("I/4 is its own partial transpose", partial_transpose(&mixed).unwrap() == mixed.matrix);
    check("I/4 entropy = 2 bits", close(entanglement::von_neumann_entropy(&mixed).unwrap(), 2.0));

    let rs = [0.7, 0.3];
    let re = [[0.6, 0.2], [0.2, 0.4]];
    let product = DensityOperator::new(
        Mat::from_fn(4, 4, |r, c| if r / 2 == c / 2 { rs[r / 2] * re[r % 2][c % 2] } else { 0.0 }),
        2,
        2,
        1,
        0,
        BasisTag::Physical,
    )
    .unwrap();
    let ps = hermitian_eigenvalues(partial_transpose(&product).unwrap().as_ref()).unwrap();
    check("product state is PPT", ps.iter().all(|&a| a >= 0.0));
    check("product state 𝒩 = 0", negativity(&product).unwrap().negativity == 0.0);
    check("pure projector entropy = 0", entanglement::von_neumann_entropy(&b).unwrap().abs() <= 4.0 * f64::EPSILON);
    let twice = DensityOperator::new(partial_transpose(&b).unwrap(), 2, 2, 1, 0, BasisTag::Physical).unwrap();
    check("partial transpose is an involution", partial_transpose(&twice).unwrap() == b.matrix);

    // Two-site Ising ground state a|↑↑⟩ + b|↓↓⟩ has 𝒩 = 2|ab| = 1/√5.
    let p = ModelParams::new(2, 1.0, 1.0).unwrap();
    let n2 = negativity(&exact::exact_block_density(&p, 1, 0).unwrap()).unwrap().negativity;
    check("two-site Ising 𝒩 = 1/√5", (n2 - 1.0 / 5f64.sqrt()).abs() < 1e-12);

    // 100 random states each for local-unitary invariance and the Schmidt formula.
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut lu_worst: f64 = 0.0;
    let mut schmidt_worst: f64 = 0.0;
    for k in 0..100 {
        let (ds, de) = (1 + k % 4, 1 + (k / 4) % 4);
        let rho = common::random_mixed(&mut rng, ds, de, 1 + k % 5);
        let us = common::random_unitary(&mut rng, ds);
        let ue = common::random_unitary(&mut rng, de);
        let rotated = common::local_rotation(&rho, &us, &ue);
        lu_worst = lu_worst.max((negativity(&rho).unwrap().negativity - negativity(&rotated).unwrap().negativity).abs());

        let (ds, de) = (1 + k % 8, 1 + (k / 8) % 8);
        let psi = common::random_pure(&mut rng, ds, de);
        let direct = negativity(&common::pure_density(&psi)).unwrap().negativity;
        schmidt_worst = schmidt_worst.max((direct - pure_state_negativity(&common::schmidt_weights(&psi))).abs());
    }
    check("local-unitary invariance on 100 states", lu_worst < 1e-10);
    check("pure-state Schmidt formula on 100 states", schmidt_worst < 1e-10);

    let pass = failures.is_empty();
    report(
        9,
        "Bell/product/partial-transpose/entropy examples and random-state invariants",
        pass,
        &format!("local-unitary max dev {lu_worst:.1e}, Schmidt max dev {schmidt_worst:.1e}, failed: {failures:?}"),
    );
    assert!(pass, "{failures:?}");
}
