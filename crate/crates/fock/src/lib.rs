//! Brute-force master-equation integration on a truncated Fock space of at
//! most three lattice sites.
//!
//! This is the reference against which the Gaussian moment equations and the
//! Wick-based photon statistics are validated. It integrates
//!
//! ```text
//! d rho / dt = -i [H, rho] + g sum_k (2 a_k rho a_k^dagger - a_k^dagger a_k rho - rho a_k^dagger a_k)
//! H = -(omega2 / 2) sum_kl a_k^dagger Lap_kl a_l + (c / 2) sum_k a_k^dagger a_k^dagger a_k a_k
//! ```
//!
//! with the same periodic second difference `Lap` and on-site Kerr constant
//! `c = chi / dx` as the lattice model.

use nalgebra::DMatrix;
use ndarray::{Array1, Array2};
use num_complex::Complex64;
use qsoliton_core::PhysicsParams;
use thiserror::Error;

pub mod compare;

pub const MAX_SITES: usize = 3;
pub const MAX_DIMENSION: usize = 13 * 13 * 13;
pub const DEFAULT_CUTOFF: usize = 12;
/// Largest mean occupation per site the oracle accepts at cutoff 12.
pub const MAX_MEAN_OCCUPATION: f64 = 1.0;

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };
const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("oracle configuration error: {0}")]
    Config(String),
    #[error("oracle integration aborted at t = {t}: {reason}")]
    Abort { t: f64, reason: String },
}

pub type Result<T> = std::result::Result<T, OracleError>;

/// Sparse operator stored by rows.
#[derive(Clone, Debug, Default)]
pub struct SparseOp {
    dim: usize,
    rows: Vec<Vec<(usize, Complex64)>>,
}

impl SparseOp {
    fn zeros(dim: usize) -> SparseOp {
        SparseOp { dim, rows: vec![Vec::new(); dim] }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn push(&mut self, row: usize, col: usize, v: Complex64) {
        if v == ZERO {
            return;
        }
        if let Some(e) = self.rows[row].iter_mut().find(|(c, _)| *c == col) {
            e.1 += v;
        } else {
            self.rows[row].push((col, v));
        }
    }

    pub fn to_dense(&self) -> Array2<Complex64> {
        let mut d = Array2::zeros((self.dim, self.dim));
        for (r, row) in self.rows.iter().enumerate() {
            for &(c, v) in row {
                d[[r, c]] += v;
            }
        }
        d
    }

    pub fn adjoint(&self) -> SparseOp {
        let mut out = SparseOp::zeros(self.dim);
        for (r, row) in self.rows.iter().enumerate() {
            for &(c, v) in row {
                out.push(c, r, v.conj());
            }
        }
        out
    }

    pub fn matmul(&self, other: &SparseOp) -> SparseOp {
        let mut out = SparseOp::zeros(self.dim);
        for (r, row) in self.rows.iter().enumerate() {
            for &(k, v) in row {
                for &(c, w) in &other.rows[k] {
                    out.push(r, c, v * w);
                }
            }
        }
        out
    }

    fn add_scaled(&mut self, other: &SparseOp, s: Complex64) {
        for (r, row) in other.rows.iter().enumerate() {
            for &(c, v) in row {
                self.push(r, c, v * s);
            }
        }
    }

    /// Upper bound on the spectral norm: `sqrt(max row sum * max column sum)`.
    pub fn norm_bound(&self) -> f64 {
        let mut col = vec![0.0; self.dim];
        let mut row_max: f64 = 0.0;
        for row in &self.rows {
            let mut s = 0.0;
            for &(c, v) in row {
                s += v.norm();
                col[c] += v.norm();
            }
            row_max = row_max.max(s);
        }
        (row_max * col.iter().copied().fold(0.0, f64::max)).sqrt()
    }

    /// `out = self * rho`.
    fn left_mul(&self, rho: &Array2<Complex64>, out: &mut Array2<Complex64>) {
        out.fill(ZERO);
        for (r, row) in self.rows.iter().enumerate() {
            for &(k, v) in row {
                let src = rho.row(k);
                let mut dst = out.row_mut(r);
                dst.zip_mut_with(&src, |d, s| *d += v * s);
            }
        }
    }

    /// `trace(self * rho)`.
    pub fn expectation(&self, rho: &Array2<Complex64>) -> Complex64 {
        let mut acc = ZERO;
        for (r, row) in self.rows.iter().enumerate() {
            for &(c, v) in row {
                acc += v * rho[[c, r]];
            }
        }
        acc
    }
}

/// Truncated product Fock basis: index `sum_k n_k (cutoff + 1)^k`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FockSpace {
    pub sites: usize,
    pub cutoff: usize,
}

impl FockSpace {
    pub fn new(sites: usize, cutoff: usize) -> Result<FockSpace> {
        if sites == 0 || sites > MAX_SITES {
            return Err(OracleError::Config(format!("oracle supports 1..={MAX_SITES} sites, got {sites}")));
        }
        if cutoff == 0 {
            return Err(OracleError::Config("cutoff must be at least 1".into()));
        }
        (cutoff + 1)
            .checked_pow(sites as u32)
            .filter(|&d| d <= MAX_DIMENSION)
            .ok_or_else(|| {
                OracleError::Config(format!(
                    "Fock dimension (cutoff {cutoff} + 1)^{sites} exceeds {MAX_DIMENSION}"
                ))
            })?;
        Ok(FockSpace { sites, cutoff })
    }

    pub fn dim(&self) -> usize {
        (self.cutoff + 1).pow(self.sites as u32)
    }

    pub fn occupation(&self, index: usize, site: usize) -> usize {
        (index / (self.cutoff + 1).pow(site as u32)) % (self.cutoff + 1)
    }

    fn lowering(&self, site: usize) -> SparseOp {
        let stride = (self.cutoff + 1).pow(site as u32);
        let mut op = SparseOp::zeros(self.dim());
        for idx in 0..self.dim() {
            let n = self.occupation(idx, site);
            if n > 0 {
                op.push(idx - stride, idx, Complex64::new((n as f64).sqrt(), 0.0));
            }
        }
        op
    }
}

/// Per-site lowering operators, Hamiltonian, and damping rate.
#[derive(Clone, Debug)]
pub struct Operators {
    pub space: FockSpace,
    pub lowering: Vec<SparseOp>,
    pub raising: Vec<SparseOp>,
    pub number: Vec<SparseOp>,
    pub hamiltonian: SparseOp,
    pub gamma: f64,
    /// Sum of `a_k^dagger a_k` over sites, used for the anticommutator term.
    total_number: SparseOp,
}

/// Periodic second difference on `sites` sites with spacing `dx`.
pub fn periodic_laplacian(sites: usize, dx: f64) -> Array2<f64> {
    let inv = 1.0 / (dx * dx);
    let mut lap = Array2::zeros((sites, sites));
    for k in 0..sites {
        lap[[k, k]] -= 2.0 * inv;
        lap[[k, (k + 1) % sites]] += inv;
        lap[[k, (k + sites - 1) % sites]] += inv;
    }
    lap
}

pub fn build_operators(sites: usize, cutoff: usize, dx: f64, p: &PhysicsParams) -> Result<Operators> {
    if !(dx > 0.0) {
        return Err(OracleError::Config(format!("lattice spacing must be positive, got {dx}")));
    }
    let space = FockSpace::new(sites, cutoff)?;
    let dim = space.dim();
    let lowering: Vec<SparseOp> = (0..sites).map(|k| space.lowering(k)).collect();
    let raising: Vec<SparseOp> = lowering.iter().map(SparseOp::adjoint).collect();
    let number: Vec<SparseOp> = (0..sites).map(|k| raising[k].matmul(&lowering[k])).collect();

    let lap = periodic_laplacian(sites, dx);
    let kerr = p.kerr_lattice(dx);
    let mut h = SparseOp::zeros(dim);
    for k in 0..sites {
        for l in 0..sites {
            let w = lap[[k, l]];
            if w != 0.0 {
                h.add_scaled(&raising[k].matmul(&lowering[l]), Complex64::new(-0.5 * p.omega2 * w, 0.0));
            }
        }
        let pair = raising[k].matmul(&raising[k]).matmul(&lowering[k]).matmul(&lowering[k]);
        h.add_scaled(&pair, Complex64::new(0.5 * kerr, 0.0));
    }
    let mut total_number = SparseOp::zeros(dim);
    for n in &number {
        total_number.add_scaled(n, Complex64::new(1.0, 0.0));
    }
    Ok(Operators { space, lowering, raising, number, hamiltonian: h, gamma: p.gamma, total_number })
}

#[derive(Clone, Debug, PartialEq)]
pub struct FockOracleState {
    pub sites: usize,
    pub cutoff: usize,
    pub rho: Array2<Complex64>,
    pub t: f64,
}

impl FockOracleState {
    pub fn trace(&self) -> Complex64 {
        self.rho.diag().sum()
    }

    /// Product of truncated coherent states, renormalized after truncation.
    pub fn coherent(ops: &Operators, alphas: &[Complex64]) -> Result<FockOracleState> {
        let space = &ops.space;
        if alphas.len() != space.sites {
            return Err(OracleError::Config("one amplitude per site required".into()));
        }
        if let Some(a) = alphas.iter().find(|a| a.norm_sqr() > MAX_MEAN_OCCUPATION) {
            return Err(OracleError::Config(format!(
                "|alpha|^2 = {} exceeds the oracle limit {MAX_MEAN_OCCUPATION}",
                a.norm_sqr()
            )));
        }
        let dim = space.dim();
        let mut psi = vec![ZERO; dim];
        for (idx, amp) in psi.iter_mut().enumerate() {
            let mut v = Complex64::new(1.0, 0.0);
            for (k, a) in alphas.iter().enumerate() {
                let n = space.occupation(idx, k);
                v *= a.powu(n as u32) / factorial(n).sqrt();
            }
            *amp = v;
        }
        let norm: f64 = psi.iter().map(|z| z.norm_sqr()).sum();
        let rho = Array2::from_shape_fn((dim, dim), |(r, c)| psi[r] * psi[c].conj() / norm);
        Ok(FockOracleState { sites: space.sites, cutoff: space.cutoff, rho, t: 0.0 })
    }

    /// Pure product number state `|n_0, n_1, ...>`.
    pub fn number_state(ops: &Operators, occupations: &[usize]) -> Result<FockOracleState> {
        let space = &ops.space;
        if occupations.len() != space.sites || occupations.iter().any(|&n| n > space.cutoff) {
            return Err(OracleError::Config("occupations must match sites and stay below the cutoff".into()));
        }
        let idx: usize = occupations
            .iter()
            .enumerate()
            .map(|(k, &n)| n * (space.cutoff + 1).pow(k as u32))
            .sum();
        let dim = space.dim();
        let mut rho = Array2::zeros((dim, dim));
        rho[[idx, idx]] = Complex64::new(1.0, 0.0);
        Ok(FockOracleState { sites: space.sites, cutoff: space.cutoff, rho, t: 0.0 })
    }

    /// Single-mode thermal state with mean `n`, truncated and renormalized.
    pub fn thermal_single(ops: &Operators, n: f64) -> Result<FockOracleState> {
        if ops.space.sites != 1 || !(n >= 0.0) {
            return Err(OracleError::Config("thermal state needs one site and n >= 0".into()));
        }
        let dim = ops.space.dim();
        let q = n / (1.0 + n);
        let weights: Vec<f64> = (0..dim).map(|k| q.powi(k as i32)).collect();
        let z: f64 = weights.iter().sum();
        let mut rho = Array2::zeros((dim, dim));
        for (k, w) in weights.iter().enumerate() {
            rho[[k, k]] = Complex64::new(w / z, 0.0);
        }
        Ok(FockOracleState { sites: 1, cutoff: ops.space.cutoff, rho, t: 0.0 })
    }

    /// Smallest eigenvalue of `rho`.
    pub fn min_eigenvalue(&self) -> f64 {
        let n = self.rho.nrows();
        let m = DMatrix::from_fn(n, n, |r, c| self.rho[[r, c]]);
        m.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min)
    }
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

struct Liouvillian<'a> {
    ops: &'a Operators,
    scratch: Array2<Complex64>,
    scratch2: Array2<Complex64>,
}

impl<'a> Liouvillian<'a> {
    fn new(ops: &'a Operators) -> Liouvillian<'a> {
        let d = ops.space.dim();
        Liouvillian { ops, scratch: Array2::zeros((d, d)), scratch2: Array2::zeros((d, d)) }
    }

    /// `out = -i[H, rho] + g sum_k (2 a rho a^dagger - {a^dagger a, rho})`.
    fn apply(&mut self, rho: &Array2<Complex64>, out: &mut Array2<Complex64>) {
        let ops = self.ops;
        // H rho; rho H = (H rho)^dagger for Hermitian rho and H.
        ops.hamiltonian.left_mul(rho, &mut self.scratch);
        let hr = &self.scratch;
        ndarray::Zip::indexed(&mut *out).for_each(|(r, c), o| {
            *o = -I * (hr[[r, c]] - hr[[c, r]].conj());
        });
        if ops.gamma == 0.0 {
            return;
        }
        let g = ops.gamma;
        ops.total_number.left_mul(rho, &mut self.scratch);
        let nr = &self.scratch;
        ndarray::Zip::indexed(&mut *out).for_each(|(r, c), o| {
            *o -= g * (nr[[r, c]] + nr[[c, r]].conj());
        });
        for k in 0..ops.space.sites {
            // a rho a^dagger = a (a rho)^dagger
            ops.lowering[k].left_mul(rho, &mut self.scratch);
            let ar_dag = self.scratch.t().mapv(|z| z.conj());
            ops.lowering[k].left_mul(&ar_dag, &mut self.scratch2);
            out.zip_mut_with(&self.scratch2, |o, s| *o += 2.0 * g * s);
        }
    }
}

/// RK4 on the full Liouvillian from `st.t` to `t_end` with steps of at most `dt`.
pub fn evolve_density(st: &FockOracleState, ops: &Operators, t_end: f64, dt: f64) -> Result<FockOracleState> {
    if !(dt > 0.0) {
        return Err(OracleError::Config(format!("time step must be positive, got {dt}")));
    }
    let h_norm = ops.hamiltonian.norm_bound() + 4.0 * ops.gamma * ops.space.sites as f64 * ops.space.cutoff as f64;
    if dt * h_norm > 0.1 {
        return Err(OracleError::Config(format!(
            "dt = {dt} too coarse for generator norm bound {h_norm:.3} (need dt * norm <= 0.1)"
        )));
    }
    if st.rho.nrows() != ops.space.dim() {
        return Err(OracleError::Config("state dimension does not match operators".into()));
    }
    let d = ops.space.dim();
    let mut l = Liouvillian::new(ops);
    let mut rho = st.rho.clone();
    let mut t = st.t;
    let (mut k, mut acc, mut stage) = (Array2::zeros((d, d)), Array2::zeros((d, d)), Array2::zeros((d, d)));
    while t_end - t > 1e-12 * dt {
        let h = dt.min(t_end - t);
        l.apply(&rho, &mut k);
        acc.assign(&rho);
        acc.scaled_add(Complex64::new(h / 6.0, 0.0), &k);
        stage.assign(&rho);
        stage.scaled_add(Complex64::new(h / 2.0, 0.0), &k);
        l.apply(&stage, &mut k);
        acc.scaled_add(Complex64::new(h / 3.0, 0.0), &k);
        stage.assign(&rho);
        stage.scaled_add(Complex64::new(h / 2.0, 0.0), &k);
        l.apply(&stage, &mut k);
        acc.scaled_add(Complex64::new(h / 3.0, 0.0), &k);
        stage.assign(&rho);
        stage.scaled_add(Complex64::new(h, 0.0), &k);
        l.apply(&stage, &mut k);
        acc.scaled_add(Complex64::new(h / 6.0, 0.0), &k);
        // Hermitize.
        for r in 0..d {
            for c in r..d {
                let v = 0.5 * (acc[[r, c]] + acc[[c, r]].conj());
                rho[[r, c]] = v;
                rho[[c, r]] = v.conj();
            }
        }
        t += h;
        let tr = rho.diag().sum();
        if (tr - 1.0).norm() > 1e-6 || !tr.is_finite() {
            return Err(OracleError::Abort { t, reason: format!("trace drifted to {tr}") });
        }
    }
    Ok(FockOracleState { sites: st.sites, cutoff: st.cutoff, rho, t: t_end })
}

/// First and second moments in the convention of the Gaussian state.
#[derive(Clone, Debug, PartialEq)]
pub struct Moments {
    pub alpha: Array1<Complex64>,
    pub normal: Array2<Complex64>,
    pub anomalous: Array2<Complex64>,
}

pub fn extract_moments(st: &FockOracleState, ops: &Operators) -> Moments {
    let m = ops.space.sites;
    let alpha = Array1::from_shape_fn(m, |k| ops.lowering[k].expectation(&st.rho));
    let normal = Array2::from_shape_fn((m, m), |(k, l)| {
        ops.raising[k].matmul(&ops.lowering[l]).expectation(&st.rho) - alpha[k].conj() * alpha[l]
    });
    let anomalous = Array2::from_shape_fn((m, m), |(k, l)| {
        ops.lowering[k].matmul(&ops.lowering[l]).expectation(&st.rho) - alpha[k] * alpha[l]
    });
    Moments { alpha, normal, anomalous }
}

/// `<:dn_I dn_J:>` for site groups `I`, `J`, evaluated directly as
/// `sum_{k in I, l in J} <a_k^dagger a_l^dagger a_l a_k> - <n_I><n_J>`.
pub fn normally_ordered_covariance(st: &FockOracleState, ops: &Operators, first: &[usize], second: &[usize]) -> f64 {
    let mean = |set: &[usize]| -> f64 { set.iter().map(|&k| ops.number[k].expectation(&st.rho).re).sum() };
    let mut pair = 0.0;
    for &k in first {
        for &l in second {
            let op = ops.raising[k].matmul(&ops.raising[l]).matmul(&ops.lowering[l]).matmul(&ops.lowering[k]);
            pair += op.expectation(&st.rho).re;
        }
    }
    pair - mean(first) * mean(second)
}

/// Exact single-mode Kerr mean `alpha exp(|alpha|^2 (exp(-i c t) - 1))` for
/// `H = (c/2) a^dagger a^dagger a a` and a coherent input.
pub fn kerr_mean(alpha: Complex64, kerr: f64, t: f64) -> Complex64 {
    alpha * (alpha.norm_sqr() * (Complex64::from_polar(1.0, -kerr * t) - 1.0)).exp()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(chi_l: f64, gamma: f64) -> PhysicsParams {
        // With dx = 1 the lattice Kerr constant equals chi.
        PhysicsParams { omega2: 1.0, chi: chi_l, gamma }
    }

    #[test]
    fn truncated_commutator() {
        let ops = build_operators(1, 12, 1.0, &params(0.0, 0.0)).unwrap();
        let a = ops.lowering[0].to_dense();
        let ad = ops.raising[0].to_dense();
        let comm = ad.dot(&a);
        let comm = a.dot(&ad) - comm;
        for r in 0..13 {
            for c in 0..13 {
                let want = if r == c && r < 12 {
                    1.0
                } else if r == 12 && c == 12 {
                    -12.0
                } else {
                    0.0
                };
                assert!((comm[[r, c]] - want).norm() < 1e-12, "({r},{c})");
            }
        }
    }

    #[test]
    fn hamiltonian_is_hermitian() {
        let ops = build_operators(2, 12, 0.7, &params(-0.8, 0.1)).unwrap();
        let h = ops.hamiltonian.to_dense();
        let defect = (&h - &h.t().mapv(|z| z.conj())).iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert!(defect < 1e-14);
    }

    #[test]
    fn dimension_limits() {
        assert!(build_operators(4, 2, 1.0, &params(0.0, 0.0)).is_err());
        assert!(build_operators(3, 13, 1.0, &params(0.0, 0.0)).is_err());
        assert!(build_operators(3, 12, 1.0, &params(0.0, 0.0)).is_ok());
    }

    #[test]
    fn coherent_truncation_error() {
        let ops = build_operators(1, 12, 1.0, &params(0.0, 0.0)).unwrap();
        let a = Complex64::new(0.5_f64.sqrt(), 0.0);
        let st = FockOracleState::coherent(&ops, &[a]).unwrap();
        let n = ops.number[0].expectation(&st.rho).re;
        assert!((n - 0.5).abs() < 1e-9);
        let mom = extract_moments(&st, &ops);
        assert!(mom.normal[[0, 0]].norm() < 1e-9 && mom.anomalous[[0, 0]].norm() < 1e-9);
        assert!(FockOracleState::coherent(&ops, &[Complex64::new(1.1, 0.0)]).is_err());
    }

    #[test]
    fn fock_one_moments() {
        let ops = build_operators(1, 12, 1.0, &params(0.0, 0.0)).unwrap();
        let st = FockOracleState::number_state(&ops, &[1]).unwrap();
        let mom = extract_moments(&st, &ops);
        assert!(mom.alpha[0].norm() < 1e-15);
        assert!((mom.normal[[0, 0]].re - 1.0).abs() < 1e-15);
        assert!(mom.anomalous[[0, 0]].norm() < 1e-15);
    }

    #[test]
    fn vacuum_is_stationary_under_damping() {
        let ops = build_operators(2, 4, 1.0, &params(-1.0, 0.5)).unwrap();
        let st = FockOracleState::number_state(&ops, &[0, 0]).unwrap();
        let out = evolve_density(&st, &ops, 0.5, 1e-3).unwrap();
        assert!((&out.rho - &st.rho).iter().all(|z| z.norm() < 1e-14));
    }

    #[test]
    fn lossy_linear_oscillator_decays_coherently() {
        let p = PhysicsParams { omega2: 0.0, chi: 0.0, gamma: 0.2 };
        let ops = build_operators(1, 12, 1.0, &p).unwrap();
        let a = Complex64::new(0.6, -0.3);
        let st = FockOracleState::coherent(&ops, &[a]).unwrap();
        let out = evolve_density(&st, &ops, 1.0, 2e-3).unwrap();
        let mom = extract_moments(&out, &ops);
        assert!((mom.alpha[0] - a * (-0.2_f64).exp()).norm() < 1e-6);
        assert!((out.trace() - 1.0).norm() < 1e-8);
    }

    #[test]
    fn kerr_mean_matches_analytic_solution() {
        let chi_l = -1.0;
        let ops = build_operators(1, 12, 1.0, &params(chi_l, 0.0)).unwrap();
        let a = Complex64::new(0.5_f64.sqrt(), 0.0);
        let st = FockOracleState::coherent(&ops, &[a]).unwrap();
        let out = evolve_density(&st, &ops, 0.3, 1e-3).unwrap();
        let mean = ops.lowering[0].expectation(&out.rho);
        assert!((mean - kerr_mean(a, chi_l, 0.3)).norm() < 1e-6, "{mean} vs {}", kerr_mean(a, chi_l, 0.3));
        assert!(out.min_eigenvalue() > -1e-8);
    }

    #[test]
    fn thermal_normally_ordered_variance() {
        let ops = build_operators(1, 12, 1.0, &params(0.0, 0.0)).unwrap();
        let n = 0.3;
        let st = FockOracleState::thermal_single(&ops, n).unwrap();
        let c = normally_ordered_covariance(&st, &ops, &[0], &[0]);
        // Truncation at 12 quanta: q^13 ~ 1e-8.
        assert!((c - n * n).abs() < 1e-6);
    }
}
