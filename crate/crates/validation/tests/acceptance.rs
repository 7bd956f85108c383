//! Acceptance criteria, one test each. Every test writes a
//! `criterion N: PASS|FAIL` line with the measured values to stderr (outside
//! the test harness capture) and then asserts the outcome.
//!
//! Long propagations are shared between criteria and computed once. Tests
//! take a global lock so the runtime limits measure one run at a time.

use std::f64::consts::PI;
use std::io::Write;
use std::sync::{Mutex, MutexGuard, OnceLock};
use std::time::{Duration, Instant};

use qsoliton_cli::analyze::Analyzer;
use qsoliton_cli::classical::classical_run;
use qsoliton_cli::config::{OracleConfig, RunConfig};
use qsoliton_cli::oracle::oracle_report;
use qsoliton_cli::simulate::{sweep_series_with, Propagation, SweepSeries};
use qsoliton_core::{
    optimize_cs_pair, optimize_fano_filter, physicality_check, Domain, GaussianState, PairCorrelation,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Box length of the long propagations, in soliton widths.
const LENGTH: f64 = 16.0;
const SITES: usize = 512;
const PHYSICALITY_TOL: f64 = 1e-6;

fn serial() -> MutexGuard<'static, ()> {
    static LOCK: Mutex<()> = Mutex::new(());
    LOCK.lock().unwrap_or_else(|e| e.into_inner())
}

fn report(criterion: u32, passed: bool, detail: &str) {
    let verdict = if passed { "PASS" } else { "FAIL" };
    let _ = writeln!(std::io::stderr(), "criterion {criterion}: {verdict}  {detail}");
    assert!(passed, "criterion {criterion} failed: {detail}");
}

fn base_config() -> RunConfig {
    let mut cfg = RunConfig::default();
    cfg.grid.sites = SITES;
    cfg.grid.length = LENGTH;
    cfg
}

/// Full eigenvalue test of one state.
#[derive(Clone, Debug)]
struct EigenRecord {
    run: &'static str,
    t: f64,
    worst: f64,
    threshold: f64,
    passed: bool,
}

fn eigen_record(run: &'static str, s: &GaussianState) -> EigenRecord {
    let r = physicality_check(s, PHYSICALITY_TOL);
    EigenRecord { run, t: s.t, worst: r.worst_eigenvalue, threshold: r.threshold, passed: r.passed }
}

/// Largest `|F_i (1 - eta_ii) - 1|` reported by an analysis pass.
#[derive(Clone, Debug, Default)]
struct IdentityRecord {
    intervals: usize,
    worst: f64,
}

impl IdentityRecord {
    fn absorb(&mut self, other: &IdentityRecord) {
        self.intervals += other.intervals;
        self.worst = self.worst.max(other.worst);
    }
}

struct LinearRun {
    elapsed: Duration,
    worst_fano: f64,
    worst_eta: f64,
    worst_decay: f64,
    snapshots: usize,
    eigen: Vec<EigenRecord>,
    identity: IdentityRecord,
}

/// Kerr off, `gamma t_d = 0.03`, order 2 over two dispersion times.
fn linear_run() -> &'static LinearRun {
    static RUN: OnceLock<LinearRun> = OnceLock::new();
    RUN.get_or_init(|| {
        let mut cfg = base_config();
        cfg.physics.kerr = false;
        let gamma_td = 0.03;
        let started = Instant::now();
        let prop = Propagation::new(&cfg, 2, gamma_td).unwrap();
        let analyzer = Analyzer::new(&cfg, &prop.grid).unwrap();
        let times: Vec<f64> = (0..=8).map(|i| 0.25 * i as f64).collect();
        let n0 = prop.initial.total_photon_number();
        let (mut worst_fano, mut worst_eta, mut worst_decay) = (0.0_f64, 0.0_f64, 0.0_f64);
        let mut eigen = Vec::new();
        let mut identity = IdentityRecord::default();
        let mut snapshots = 0;
        prop.run(2.0, &times, |s, _| {
            let a = analyzer.analyze(s)?;
            for d in a.domains() {
                for i in 0..d.stats.len() {
                    worst_fano = worst_fano.max((d.stats.fano[i].expect("filters carry photons") - 1.0).abs());
                    for j in 0..d.stats.len() {
                        if let Some(e) = d.stats.eta[[i, j]] {
                            worst_eta = worst_eta.max(e.abs());
                        }
                    }
                }
                identity.intervals += d.stats.len();
                identity.worst = identity.worst.max(d.stats.fano_identity_defect());
            }
            let expected = n0 * (-2.0 * prop.params.gamma * s.t).exp();
            worst_decay = worst_decay.max((s.total_photon_number() / expected - 1.0).abs());
            eigen.push(eigen_record("linear", s));
            snapshots += 1;
            Ok(())
        })
        .unwrap();
        LinearRun { elapsed: started.elapsed(), worst_fano, worst_eta, worst_decay, snapshots, eigen, identity }
    })
}

struct ConservationRun {
    elapsed: Duration,
    drift: f64,
    eigen: Vec<EigenRecord>,
}

/// Lossless order-2 soliton, `dt = 1e-4 t_d`, over two dispersion times.
fn conservation_run() -> &'static ConservationRun {
    static RUN: OnceLock<ConservationRun> = OnceLock::new();
    RUN.get_or_init(|| {
        let mut cfg = base_config();
        cfg.run.dt_td = Some(1e-4);
        let started = Instant::now();
        let prop = Propagation::new(&cfg, 2, 0.0).unwrap();
        let n0 = prop.initial.total_photon_number();
        let times: Vec<f64> = (0..=20).map(|i| 0.1 * i as f64).collect();
        let mut drift = 0.0_f64;
        let mut states = Vec::new();
        prop.run(2.0, &times, |s, _| {
            drift = drift.max((s.total_photon_number() / n0 - 1.0).abs());
            states.push(s.clone());
            Ok(())
        })
        .unwrap();
        let elapsed = started.elapsed();
        let eigen = states.iter().map(|s| eigen_record("conservation", s)).collect();
        ConservationRun { elapsed, drift, eigen }
    })
}

struct Sweep {
    series: SweepSeries,
    eigen: Vec<EigenRecord>,
    identity: IdentityRecord,
}

/// Lossless optimized-filter sweep over `[0, 5 t_d]` for one order, with
/// 8e9 photons in the order-2 soliton.
fn sweep(order: u32) -> &'static Sweep {
    static SWEEPS: [OnceLock<Sweep>; 2] = [OnceLock::new(), OnceLock::new()];
    SWEEPS[order as usize - 1].get_or_init(|| {
        let mut cfg = base_config();
        cfg.soliton.n1 = 2e9;
        cfg.sweep.t_end_td = 5.0;
        cfg.sweep.step_td = 0.1;
        let run = if order == 1 { "sweep N=1" } else { "sweep N=2" };
        let mut eigen = Vec::new();
        let series = sweep_series_with(&cfg, order, 0.0, |s| {
            eigen.push(eigen_record(run, s));
            Ok(())
        })
        .unwrap();
        let defects: Vec<f64> = series.checks.iter().filter(|c| c.name == "fano_identity").map(|c| c.value).collect();
        let identity = IdentityRecord { intervals: defects.len(), worst: defects.iter().copied().fold(0.0, f64::max) };
        Sweep { series, eigen, identity }
    })
}

#[test]
fn criterion_1_linear_and_lossy_evolution_is_exact() {
    let _g = serial();
    let run = linear_run();
    let passed = run.worst_fano <= 1e-9
        && run.worst_eta <= 1e-9
        && run.worst_decay <= 1e-6
        && run.elapsed < Duration::from_secs(60);
    report(
        1,
        passed,
        &format!(
            "max |F - 1| = {:.2e}, max |eta| = {:.2e}, photon decay error {:.2e} over {} snapshots, {:.1} s",
            run.worst_fano,
            run.worst_eta,
            run.worst_decay,
            run.snapshots,
            run.elapsed.as_secs_f64()
        ),
    );
}

#[test]
fn criterion_2_lossless_photon_number_is_conserved() {
    let _g = serial();
    let run = conservation_run();
    let passed = run.drift < 1e-6 && run.elapsed < Duration::from_secs(600);
    report(
        2,
        passed,
        &format!("max relative drift {:.2e} over [0, 2 t_d] at dt = 1e-4 t_d, {:.1} s", run.drift, run.elapsed.as_secs_f64()),
    );
}

#[test]
fn criterion_3_every_snapshot_is_physical() {
    let _g = serial();
    let mut records: Vec<&EigenRecord> = Vec::new();
    records.extend(&linear_run().eigen);
    records.extend(&conservation_run().eigen);
    records.extend(&sweep(1).eigen);
    records.extend(&sweep(2).eigen);
    let failures: Vec<_> = records.iter().filter(|r| !r.passed).collect();
    let tightest = records
        .iter()
        .map(|r| (r.worst / r.threshold.abs(), r))
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .map(|(_, r)| r)
        .expect("runs produced snapshots");
    report(
        3,
        failures.is_empty(),
        &format!(
            "{} snapshots checked, {} below the floor; closest: {} t = {:.2}, eigenvalue {:.2e} vs floor {:.2e}",
            records.len(),
            failures.len(),
            tightest.run,
            tightest.t,
            tightest.worst,
            tightest.threshold
        ),
    );
}

#[test]
fn criterion_4_moments_match_the_fock_oracle() {
    let _g = serial();
    let started = Instant::now();
    let mut lines = Vec::new();
    let mut passed = true;
    for gamma in [0.0, 0.3] {
        let o = OracleConfig {
            sites: 2,
            occupation: 0.5,
            kerr_phase_end: 0.1,
            controlled_window: 0.1,
            tolerance: 1e-3,
            gamma,
            samples: 10,
            cutoff: 12,
        };
        let r = oracle_report(&o).unwrap();
        let worst = |f: fn(&qsoliton_fock::compare::Discrepancy) -> f64| r.rows.iter().map(f).fold(0.0, f64::max);
        let (alpha, normal, anomalous, wick) =
            (worst(|d| d.alpha), worst(|d| d.normal), worst(|d| d.anomalous), worst(|d| d.wick));
        let within = r
            .rows
            .iter()
            .take_while(|d| d.worst_moment().max(d.wick) <= 1e-3)
            .last()
            .map_or(0.0, |d| d.kerr_phase);
        passed &= [alpha, normal, anomalous, wick].iter().all(|&e| e <= 1e-3);
        lines.push(format!(
            "gamma {gamma}: alpha {alpha:.2e}, N {normal:.2e}, A {anomalous:.2e}, Wick {wick:.2e} \
             (within 1e-3 up to |chi_L| t = {within:.2})"
        ));
    }
    let elapsed = started.elapsed();
    passed &= elapsed < Duration::from_secs(120);
    report(4, passed, &format!("{}; {:.1} s", lines.join("; "), elapsed.as_secs_f64()));
}

#[test]
fn criterion_5_fano_identity_holds_on_every_interval() {
    let _g = serial();
    let mut total = IdentityRecord::default();
    total.absorb(&linear_run().identity);
    total.absorb(&sweep(1).identity);
    total.absorb(&sweep(2).identity);
    report(
        5,
        total.worst <= 1e-12,
        &format!("max |F (1 - eta) - 1| = {:.2e} over {} interval checks", total.worst, total.intervals),
    );
}

#[test]
fn criterion_6_classical_breather_returns() {
    let _g = serial();
    let started = Instant::now();
    let mut cfg = base_config();
    cfg.soliton.order = 2;
    cfg.run.t_end_td = PI / 2.0;
    cfg.run.snapshot_times_td = vec![PI / 2.0];
    let run = classical_run(&cfg).unwrap();
    let end = run.rows[0];
    let elapsed = started.elapsed();
    let passed = end.vs_initial <= 0.02 && end.vs_split_step <= 0.02 && elapsed < Duration::from_secs(120);
    report(
        6,
        passed,
        &format!(
            "at t = pi/2 t_d: L_inf vs initial {:.2e}, vs split-step {:.2e}; {:.1} s",
            end.vs_initial,
            end.vs_split_step,
            elapsed.as_secs_f64()
        ),
    );
}

fn within(value: f64, target: f64, tol: f64) -> bool {
    (value - target).abs() <= tol
}

#[test]
fn criterion_7_squeezing_reaches_the_reported_levels() {
    let _g = serial();
    let best = |order: u32, d: Domain| sweep(order).series.best_squeezing(d).map_or((f64::NAN, f64::NAN), |b| b);
    let (p1, f1, p2, f2) =
        (best(1, Domain::Position), best(1, Domain::Frequency), best(2, Domain::Position), best(2, Domain::Frequency));
    // The 6.6/8.4 pair belongs to one domain and the 3.3/9.6 pair to the other.
    let assignment = |first: (f64, f64), second: (f64, f64)| {
        [within(first.0, 6.6, 1.5), within(second.0, 3.3, 1.5), within(first.1, 8.4, 2.0), within(second.1, 9.6, 2.0)]
    };
    let freq_first = assignment((f1.1, f2.1), (p1.1, p2.1));
    let pos_first = assignment((p1.1, p2.1), (f1.1, f2.1));
    let count = |a: [bool; 4]| a.iter().filter(|&&b| b).count();
    let passed = freq_first.iter().all(|&b| b) || pos_first.iter().all(|&b| b);
    report(
        7,
        passed,
        &format!(
            "N=1: frequency {:.2} dB (t = {:.1}), position {:.2} dB (t = {:.1}); \
             N=2: frequency {:.2} dB (t = {:.1}), position {:.2} dB (t = {:.1}); \
             targets met {}/4 with 6.6/8.4 in frequency, {}/4 with 6.6/8.4 in position",
            f1.1,
            f1.0,
            p1.1,
            p1.0,
            f2.1,
            f2.0,
            p2.1,
            p2.0,
            count(freq_first),
            count(pos_first)
        ),
    );
}

#[test]
fn criterion_8_two_soliton_correlation_is_nonclassical() {
    let _g = serial();
    let (one, two) = (&sweep(1).series, &sweep(2).series);
    let near_compression = |t: f64| {
        let phase = (t - PI / 4.0).rem_euclid(PI / 2.0);
        phase.min(PI / 2.0 - phase) <= 0.1 + 1e-9
    };
    let violation = two
        .points
        .iter()
        .filter(|p| near_compression(p.t_over_td))
        .filter_map(|p| Some((p.t_over_td, p.domain, p.cs_d_min?)))
        .min_by(|a, b| a.2.total_cmp(&b.2));
    let mut lines = Vec::new();
    let mut stronger = true;
    for d in [Domain::Position, Domain::Frequency] {
        let (Some(a), Some(b)) = (one.min_discriminant(d), two.min_discriminant(d)) else {
            stronger = false;
            continue;
        };
        stronger &= b.1 < a.1;
        lines.push(format!("{d}: D_min N=1 {:.3e} (t = {:.1}), N=2 {:.3e} (t = {:.1})", a.1, a.0, b.1, b.0));
    }
    let near = violation.filter(|v| v.2 < 0.0);
    let passed = near.is_some() && stronger;
    let near_text = near.map_or("no violation near a compression".to_string(), |(t, d, v)| {
        format!("near compression: D = {v:.3e} in {d} at t = {t:.1}")
    });
    report(8, passed, &format!("{near_text}; {}", lines.join("; ")));
}

fn brute_fano(pc: &PairCorrelation, min_width: usize) -> Option<(std::ops::Range<usize>, f64)> {
    let m = pc.sites();
    let mut best: Option<(std::ops::Range<usize>, f64)> = None;
    for lo in 0..m {
        for hi in lo + min_width..=m {
            let mass: f64 = pc.n_local[lo..hi].iter().sum();
            if !(mass > 0.0) {
                continue;
            }
            let c: f64 = (lo..hi).flat_map(|k| (lo..hi).map(move |l| (k, l))).map(|(k, l)| pc.c_local[[k, l]]).sum();
            let f = 1.0 + c / mass;
            if best.as_ref().is_none_or(|b| f < b.1) {
                best = Some((lo..hi, f));
            }
        }
    }
    best
}

fn brute_cs(pc: &PairCorrelation, width: usize) -> Option<(usize, usize, f64)> {
    let m = pc.sites();
    let block = |a: usize, b: usize| -> f64 {
        (a..a + width).flat_map(|k| (b..b + width).map(move |l| (k, l))).map(|(k, l)| pc.c_local[[k, l]]).sum()
    };
    let mut best: Option<(usize, usize, f64)> = None;
    for i in 0..=m.saturating_sub(2 * width) {
        for j in i + width..=m - width {
            let d = block(i, i) * block(j, j) - block(i, j).powi(2);
            if best.is_none_or(|b| d < b.2) {
                best = Some((i, j, d));
            }
        }
    }
    best
}

/// Integer-valued instance: every partial sum is exact, so any summation
/// order gives the same floats and the comparison can be exact.
fn integer_instance(rng: &mut ChaCha8Rng, m: usize) -> PairCorrelation {
    let n_local: Vec<f64> = (0..m).map(|_| f64::from(rng.gen_range(0..40_u32))).collect();
    let mut c_local = ndarray::Array2::zeros((m, m));
    for k in 0..m {
        for l in k..m {
            let v = f64::from(rng.gen_range(-30..30_i32));
            c_local[[k, l]] = v;
            c_local[[l, k]] = v;
        }
    }
    PairCorrelation { domain: Domain::Position, n_local, c_local }
}

#[test]
fn criterion_9_optimizers_match_brute_force() {
    let _g = serial();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut mismatches = Vec::new();
    for trial in 0..100 {
        let pc = integer_instance(&mut rng, 32);
        let min_width = 1 + trial % 4;
        let width = 1 + trial % 5;
        let fast = optimize_fano_filter(&pc, min_width).unwrap().map(|o| (o.interval, o.fano));
        if fast != brute_fano(&pc, min_width) {
            mismatches.push(format!("fano trial {trial}"));
        }
        let fast = optimize_cs_pair(&pc, width).unwrap().map(|o| (o.first.start, o.second.start, o.d_min));
        if fast != brute_cs(&pc, width) {
            mismatches.push(format!("cs trial {trial}"));
        }
    }
    report(
        9,
        mismatches.is_empty(),
        &format!("100 instances of M = 32, {} mismatches {:?}", mismatches.len(), mismatches),
    );
}
