mod common;

use ndarray::Array2;
use proptest::prelude::*;
use qsoliton_core::{
    dft_state, interval_stats, optimize_cs_pair, optimize_fano_filter, optimize_fano_filter_above,
    pair_correlation_matrix, Domain, Grid, IntervalSet, PairCorrelation,
};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use common::{random_physical_state, rng};

fn direct_mass(pc: &PairCorrelation, lo: usize, hi: usize) -> f64 {
    (lo..hi).map(|k| pc.n_local[k]).sum()
}

fn direct_corr(pc: &PairCorrelation, a: (usize, usize), b: (usize, usize)) -> f64 {
    let mut acc = 0.0;
    for k in a.0..a.1 {
        for l in b.0..b.1 {
            acc += pc.c_local[[k, l]];
        }
    }
    acc
}

/// Brute-force Fano search: every interval summed from scratch.
fn brute_fano(pc: &PairCorrelation, min_width: usize) -> Option<(usize, usize, f64)> {
    let m = pc.sites();
    let mut best: Option<(usize, usize, f64)> = None;
    for lo in 0..m {
        for hi in lo + min_width..=m {
            let mass = direct_mass(pc, lo, hi);
            if mass <= 0.0 {
                continue;
            }
            let f = 1.0 + direct_corr(pc, (lo, hi), (lo, hi)) / mass;
            if best.is_none_or(|b| f < b.2) {
                best = Some((lo, hi, f));
            }
        }
    }
    best
}

/// Brute-force Cauchy-Schwarz search over disjoint equal-width pairs.
fn brute_cs(pc: &PairCorrelation, w: usize) -> Option<(usize, usize, f64)> {
    let m = pc.sites();
    if 2 * w > m {
        return None;
    }
    let mut best: Option<(usize, usize, f64)> = None;
    for i in 0..=m - 2 * w {
        for j in i + w..=m - w {
            let cii = direct_corr(pc, (i, i + w), (i, i + w));
            let cjj = direct_corr(pc, (j, j + w), (j, j + w));
            let cij = direct_corr(pc, (i, i + w), (j, j + w));
            let d = cii * cjj - cij * cij;
            if best.is_none_or(|b| d < b.2) {
                best = Some((i, j, d));
            }
        }
    }
    best
}

/// Small-integer instance: every partial sum is exact in floating point, so
/// prefix sums and direct sums agree bit for bit and ties are common.
fn integer_instance(r: &mut ChaCha8Rng, m: usize) -> PairCorrelation {
    let n_local = (0..m).map(|_| f64::from(r.gen_range(0u8..6))).collect();
    let mut c_local = Array2::zeros((m, m));
    for k in 0..m {
        for l in k..m {
            let v = f64::from(r.gen_range(-4i8..=4));
            c_local[[k, l]] = v;
            c_local[[l, k]] = v;
        }
    }
    PairCorrelation { domain: Domain::Position, n_local, c_local }
}

fn physical_instance(r: &mut ChaCha8Rng, m: usize) -> PairCorrelation {
    let s = random_physical_state(r, Grid::position(m, 4.0).unwrap(), 2.0);
    pair_correlation_matrix(&s)
}

#[test]
fn fano_optimizer_equals_brute_force_on_integer_instances() {
    let mut r = rng(100);
    for trial in 0..100 {
        let pc = integer_instance(&mut r, 32);
        let min_width = 1 + trial % 4;
        let got = optimize_fano_filter(&pc, min_width).unwrap().map(|o| (o.interval.start, o.interval.end, o.fano));
        assert_eq!(got, brute_fano(&pc, min_width), "trial {trial}");
    }
}

#[test]
fn cs_optimizer_equals_brute_force_on_integer_instances() {
    let mut r = rng(200);
    for trial in 0..100 {
        let pc = integer_instance(&mut r, 32);
        let w = 1 + trial % 5;
        let got = optimize_cs_pair(&pc, w).unwrap().map(|o| (o.first.start, o.second.start, o.d_min));
        assert_eq!(got, brute_cs(&pc, w), "trial {trial}");
    }
}

#[test]
fn optimizers_agree_with_brute_force_on_physical_states() {
    let mut r = rng(300);
    for trial in 0..100 {
        let pc = physical_instance(&mut r, 32);
        let fano = optimize_fano_filter(&pc, 1).unwrap().unwrap();
        let (lo, hi, f) = brute_fano(&pc, 1).unwrap();
        assert_eq!((fano.interval.start, fano.interval.end), (lo, hi), "trial {trial}");
        assert!((fano.fano - f).abs() <= 1e-12 * f.abs().max(1.0));

        let w = 1 + trial % 3;
        let cs = optimize_cs_pair(&pc, w).unwrap().unwrap();
        let (i, j, d) = brute_cs(&pc, w).unwrap();
        assert_eq!((cs.first.start, cs.second.start), (i, j), "trial {trial}");
        assert!((cs.d_min - d).abs() <= 1e-10 * d.abs().max(1.0));
    }
}

#[test]
fn mass_floor_only_removes_light_candidates() {
    let mut r = rng(7);
    let pc = integer_instance(&mut r, 24);
    let floor = 6.0;
    let got = optimize_fano_filter_above(&pc, 1, floor).unwrap().unwrap();
    assert!(got.mass > floor);
    let m = pc.sites();
    for lo in 0..m {
        for hi in lo + 1..=m {
            let mass = direct_mass(&pc, lo, hi);
            if mass > floor {
                assert!(1.0 + direct_corr(&pc, (lo, hi), (lo, hi)) / mass >= got.fano);
            }
        }
    }
    assert!(optimize_fano_filter_above(&pc, 1, -1.0).is_err());
    assert!(optimize_fano_filter_above(&pc, 1, 1e9).unwrap().is_none());
}

#[test]
fn partition_photon_number_agrees_across_domains() {
    let mut r = rng(9);
    for m in [8, 33, 64] {
        let s = random_physical_state(&mut r, Grid::position(m, 6.0).unwrap(), 3.0);
        let f = dft_state(&s).unwrap();
        let total = |pc: &PairCorrelation| {
            let cut = [0, m / 3, m / 2, m];
            let ranges = cut.windows(2).map(|w| w[0]..w[1]).collect();
            let set = IntervalSet::new(pc.domain, m, ranges, false).unwrap();
            interval_stats(pc, &set, 0.0).unwrap().m.iter().sum::<f64>()
        };
        let (a, b) = (total(&pair_correlation_matrix(&s)), total(&pair_correlation_matrix(&f)));
        assert!(((a - b) / a).abs() <= 1e-10, "M = {m}");
    }
}

#[test]
fn interval_stats_rejects_foreign_domains() {
    let mut r = rng(10);
    let s = random_physical_state(&mut r, Grid::position(8, 2.0).unwrap(), 1.0);
    let set = IntervalSet::new(Domain::Frequency, 8, vec![0..4], false).unwrap();
    assert!(interval_stats(&pair_correlation_matrix(&s), &set, 0.0).is_err());
    assert!(IntervalSet::new(Domain::Position, 8, vec![0..4, 3..6], false).is_err());
    assert!(IntervalSet::new(Domain::Position, 8, vec![2..2], true).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn eta_bounds_and_fano_identity_hold(seed in any::<u64>(), m in 2usize..20, freq in any::<bool>(), parts in 1usize..6) {
        let mut r = rng(seed);
        let mut s = random_physical_state(&mut r, Grid::position(m, 5.0).unwrap(), 2.0);
        if freq {
            s = dft_state(&s).unwrap();
        }
        let pc = pair_correlation_matrix(&s);
        let parts = parts.min(m);
        let edges: Vec<usize> = (0..=parts).map(|i| i * m / parts).collect();
        let ranges = edges.windows(2).map(|w| w[0]..w[1]).collect();
        let set = IntervalSet::new(s.grid.domain(), m, ranges, false).unwrap();
        let stats = interval_stats(&pc, &set, 0.0).unwrap();
        prop_assert!(stats.eta_bound_excess() <= 1e-12, "excess {}", stats.eta_bound_excess());
        prop_assert!(stats.fano_identity_defect() <= 1e-12);
        for i in 0..stats.len() {
            for j in 0..stats.len() {
                prop_assert_eq!(stats.c[[i, j]], stats.c[[j, i]]);
            }
        }
    }

    #[test]
    fn overlapping_windows_still_satisfy_the_diagonal_bound(seed in any::<u64>(), m in 4usize..16) {
        let mut r = rng(seed);
        let s = random_physical_state(&mut r, Grid::position(m, 5.0).unwrap(), 1.0);
        let set = IntervalSet::new(Domain::Position, m, vec![0..m / 2 + 1, m / 2 - 1..m], true).unwrap();
        let stats = interval_stats(&pair_correlation_matrix(&s), &set, 0.0).unwrap();
        for i in 0..2 {
            prop_assert!(stats.eta_diag(i).unwrap() <= 1.0 + 1e-12);
        }
    }
}
