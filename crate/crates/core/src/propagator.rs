//! Closed equations of motion for `(alpha, N, A)` under the lossy Kerr
//! master equation with Gaussian (second-cumulant) closure, and a fixed-step
//! RK4 integrator.
//!
//! With `h = omega2 / 2`, lattice Kerr constant `c = chi / dx`,
//! `U_k = alpha_k^2 + A_kk` and `W_k = |alpha_k|^2 + N_kk`:
//!
//! ```text
//! d alpha_k = i h (Lap alpha)_k - g alpha_k - i c [(|alpha_k|^2 + 2 N_kk) alpha_k + A_kk conj(alpha_k)]
//! d N_kl    = i h (N Lap - Lap N)_kl - 2 g N_kl
//!             + i c [conj(U_k) A_kl - U_l conj(A_kl) + 2 (W_k - W_l) N_kl]
//! d A_kl    = i h (Lap A + A Lap)_kl - 2 g A_kl
//!             - i c [U_l N_lk + U_k N_kl + delta_kl U_k + 2 (W_k + W_l) A_kl]
//! ```
//!
//! The `delta_kl U_k` term comes from reordering `a_k a_l^dagger` in
//! `d<a_k a_l>`; for a single mode it reproduces `d<aa>/dt = -i c <(2 a^dagger a + 1) a a>`.

use ndarray::{Array1, Array2};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::lattice::Domain;
use crate::state::{is_physical_fast, snapshot_eigen_floor, GaussianState, PhysicsParams};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Which moments feed back into the dynamics.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Closure {
    /// Full Gaussian closure: mean and second cumulants evolve together.
    #[default]
    Gaussian,
    /// Classical mean-field evolution; `N` and `A` are frozen and ignored.
    MeanField,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MomentDerivative {
    pub dalpha: Array1<Complex64>,
    pub dnormal: Array2<Complex64>,
    pub danomalous: Array2<Complex64>,
}

impl MomentDerivative {
    fn zeros(m: usize) -> MomentDerivative {
        MomentDerivative {
            dalpha: Array1::zeros(m),
            dnormal: Array2::zeros((m, m)),
            danomalous: Array2::zeros((m, m)),
        }
    }
}

#[derive(Clone, Copy, Debug)]
struct Coefficients {
    m: usize,
    hop: f64,
    gamma: f64,
    kerr: f64,
    closure: Closure,
}

impl Coefficients {
    fn new(s: &GaussianState, p: &PhysicsParams, closure: Closure) -> Result<Coefficients> {
        if s.grid.domain() != Domain::Position {
            return Err(Error::contract("moment equations are defined on the position grid"));
        }
        let dx = s.grid.spacing();
        Ok(Coefficients {
            m: s.sites(),
            hop: 0.5 * p.omega2 / (dx * dx),
            gamma: p.gamma,
            kerr: p.kerr_lattice(dx),
            closure,
        })
    }
}

struct Slices<'a> {
    alpha: &'a [Complex64],
    normal: &'a [Complex64],
    anomalous: &'a [Complex64],
}

impl<'a> Slices<'a> {
    fn of(s: &'a GaussianState) -> Slices<'a> {
        Slices {
            alpha: s.alpha.as_slice().expect("contiguous"),
            normal: s.normal.as_slice().expect("row-major"),
            anomalous: s.anomalous.as_slice().expect("row-major"),
        }
    }
}

/// Per-site `U_k`, `W_k` and the mean-field derivative.
fn mean_rhs(
    co: &Coefficients,
    x: &Slices<'_>,
    u: &mut [Complex64],
    w: &mut [f64],
    dalpha: &mut [Complex64],
) {
    let m = co.m;
    for k in 0..m {
        let a = x.alpha[k];
        let (nkk, akk) = if co.closure == Closure::Gaussian {
            (x.normal[k * m + k].re, x.anomalous[k * m + k])
        } else {
            (0.0, Complex64::new(0.0, 0.0))
        };
        u[k] = a * a + akk;
        w[k] = a.norm_sqr() + nkk;
        let next = x.alpha[(k + 1) % m];
        let prev = x.alpha[(k + m - 1) % m];
        let lap = next + prev - 2.0 * a;
        let kerr = (a.norm_sqr() + 2.0 * nkk) * a + akk * a.conj();
        dalpha[k] = I * co.hop * lap - co.gamma * a - I * co.kerr * kerr;
    }
}

/// `i z` without a full complex multiply.
#[inline(always)]
fn times_i(z: Complex64) -> Complex64 {
    Complex64::new(-z.im, z.re)
}

/// Row-constant factors of the fluctuation equations, pre-scaled by the
/// lattice Kerr constant `c`.
#[derive(Clone, Copy)]
struct RowFactors {
    /// `c conj(U_k)`
    cu_conj: Complex64,
    /// `c U_k`
    cu: Complex64,
    /// `2 c W_k`
    cw: f64,
}

#[inline(always)]
fn fluct_entry(
    co: &Coefficients,
    row: &RowFactors,
    n_kl: Complex64,
    lap_n: Complex64,
    a_kl: Complex64,
    lap_a: Complex64,
    cu_l: Complex64,
    cw_l: f64,
) -> (Complex64, Complex64) {
    let damp = 2.0 * co.gamma;
    let dn = times_i(lap_n * co.hop + row.cu_conj * a_kl - cu_l * a_kl.conj() + n_kl * (row.cw - cw_l))
        - n_kl * damp;
    let da = times_i(lap_a * co.hop - cu_l * n_kl.conj() - row.cu * n_kl - a_kl * (row.cw + cw_l))
        - a_kl * damp;
    (dn, da)
}

/// Which entries of the second-moment blocks to compute.
#[derive(Clone, Copy, PartialEq, Eq)]
enum Coverage {
    /// Every `(k, l)`.
    Full,
    /// `l >= k` only; the lower triangle is mirrored afterwards. Valid when
    /// `N` is exactly Hermitian and `A` exactly symmetric.
    Upper,
}

/// Second-moment derivatives. `N_lk` is taken as `conj(N_kl)`, which holds
/// for every state the integrator produces.
#[allow(clippy::too_many_arguments)]
fn fluct_rhs(
    co: &Coefficients,
    x: &Slices<'_>,
    u: &[Complex64],
    w: &[f64],
    dnormal: &mut [Complex64],
    danomalous: &mut [Complex64],
    coverage: Coverage,
) {
    let m = co.m;
    let cu: Vec<Complex64> = u.iter().map(|&z| z * co.kerr).collect();
    let cw: Vec<f64> = w.iter().map(|&v| 2.0 * co.kerr * v).collect();
    for k in 0..m {
        let kp = (k + 1) % m;
        let km = (k + m - 1) % m;
        let rows = Rows {
            nk: &x.normal[k * m..(k + 1) * m],
            np: &x.normal[kp * m..(kp + 1) * m],
            nm: &x.normal[km * m..(km + 1) * m],
            ak: &x.anomalous[k * m..(k + 1) * m],
            ap: &x.anomalous[kp * m..(kp + 1) * m],
            am: &x.anomalous[km * m..(km + 1) * m],
        };
        let dn_row = &mut dnormal[k * m..(k + 1) * m];
        let da_row = &mut danomalous[k * m..(k + 1) * m];
        let row = RowFactors { cu_conj: cu[k].conj(), cu: cu[k], cw: cw[k] };
        let first = if coverage == Coverage::Upper { k } else { 0 };

        let mut edge = |l: usize| {
            let (lp, lm) = ((l + 1) % m, (l + m - 1) % m);
            let lap_n = rows.nk[lp] + rows.nk[lm] - rows.np[l] - rows.nm[l];
            let lap_a = rows.ap[l] + rows.am[l] + rows.ak[lp] + rows.ak[lm] - 4.0 * rows.ak[l];
            let (dn, da) = fluct_entry(co, &row, rows.nk[l], lap_n, rows.ak[l], lap_a, cu[l], cw[l]);
            dn_row[l] = dn;
            da_row[l] = da;
        };
        if first == 0 {
            edge(0);
        }
        edge(m - 1);

        // Interior columns, free of wrap-around indexing.
        let lo = first.max(1);
        let hi = m - 1;
        if lo < hi {
            let len = hi - lo;
            let n_left = &rows.nk[lo - 1..hi - 1];
            let n_mid = &rows.nk[lo..hi];
            let n_right = &rows.nk[lo + 1..hi + 1];
            let n_up = &rows.np[lo..hi];
            let n_down = &rows.nm[lo..hi];
            let a_left = &rows.ak[lo - 1..hi - 1];
            let a_mid = &rows.ak[lo..hi];
            let a_right = &rows.ak[lo + 1..hi + 1];
            let a_up = &rows.ap[lo..hi];
            let a_down = &rows.am[lo..hi];
            let cu_col = &cu[lo..hi];
            let cw_col = &cw[lo..hi];
            let dn_out = &mut dn_row[lo..hi];
            let da_out = &mut da_row[lo..hi];
            for j in 0..len {
                let lap_n = n_right[j] + n_left[j] - n_up[j] - n_down[j];
                let lap_a = a_up[j] + a_down[j] + a_right[j] + a_left[j] - 4.0 * a_mid[j];
                let (dn, da) = fluct_entry(co, &row, n_mid[j], lap_n, a_mid[j], lap_a, cu_col[j], cw_col[j]);
                dn_out[j] = dn;
                da_out[j] = da;
            }
        }
        da_row[k] -= times_i(row.cu);
    }
    if coverage == Coverage::Upper {
        mirror_lower(m, dnormal, danomalous);
    }
}

struct Rows<'a> {
    nk: &'a [Complex64],
    np: &'a [Complex64],
    nm: &'a [Complex64],
    ak: &'a [Complex64],
    ap: &'a [Complex64],
    am: &'a [Complex64],
}

/// Fill `l < k` from `l > k`: `N` Hermitian, `A` symmetric. Blocked so both
/// the row and the column walk stay cache resident.
fn mirror_lower(m: usize, normal: &mut [Complex64], anomalous: &mut [Complex64]) {
    const BLOCK: usize = 32;
    for kb in (0..m).step_by(BLOCK) {
        for lb in (0..=kb).step_by(BLOCK) {
            for k in kb..(kb + BLOCK).min(m) {
                for l in lb..(lb + BLOCK).min(k) {
                    normal[k * m + l] = normal[l * m + k].conj();
                    anomalous[k * m + l] = anomalous[l * m + k];
                }
            }
        }
    }
}

fn fluctuations_vanish(s: &GaussianState) -> bool {
    s.normal.iter().chain(s.anomalous.iter()).all(|z| z.re == 0.0 && z.im == 0.0)
}

fn rhs_into(
    co: &Coefficients,
    x: &Slices<'_>,
    evolve_fluct: bool,
    coverage: Coverage,
    u: &mut [Complex64],
    w: &mut [f64],
    out: &mut MomentDerivative,
) {
    mean_rhs(co, x, u, w, out.dalpha.as_slice_mut().expect("contiguous"));
    if evolve_fluct {
        fluct_rhs(
            co,
            x,
            u,
            w,
            out.dnormal.as_slice_mut().expect("row-major"),
            out.danomalous.as_slice_mut().expect("row-major"),
            coverage,
        );
    }
}

/// Right-hand side of the closed moment equations under the Gaussian closure.
pub fn moment_rhs(s: &GaussianState, p: &PhysicsParams) -> Result<MomentDerivative> {
    moment_rhs_with(s, p, Closure::Gaussian)
}

pub fn moment_rhs_with(s: &GaussianState, p: &PhysicsParams, closure: Closure) -> Result<MomentDerivative> {
    let co = Coefficients::new(s, p, closure)?;
    let m = co.m;
    let mut out = MomentDerivative::zeros(m);
    let mut u = vec![Complex64::new(0.0, 0.0); m];
    let mut w = vec![0.0; m];
    rhs_into(&co, &Slices::of(s), closure == Closure::Gaussian, Coverage::Full, &mut u, &mut w, &mut out);
    Ok(out)
}

/// Default step: `min(0.25 dx^2 / |omega2|, 0.05 / (|c| max W), 0.05 / gamma)`.
pub fn default_dt(s: &GaussianState, p: &PhysicsParams) -> f64 {
    let dx = s.grid.spacing();
    let mut dt = 0.25 * dx * dx / p.omega2.abs().max(f64::MIN_POSITIVE);
    let kerr = p.kerr_lattice(dx).abs();
    let w_max = (0..s.sites())
        .map(|k| s.alpha[k].norm_sqr() + s.normal[[k, k]].re)
        .fold(0.0, f64::max);
    if kerr * w_max > 0.0 {
        dt = dt.min(0.05 / (kerr * w_max));
    }
    if p.gamma > 0.0 {
        dt = dt.min(0.05 / p.gamma);
    }
    dt
}

/// Classical RK4 over all three moment blocks with reusable buffers.
pub struct Rk4 {
    params: PhysicsParams,
    closure: Closure,
    k: MomentDerivative,
    acc: GaussianState,
    stage: GaussianState,
    u: Vec<Complex64>,
    w: Vec<f64>,
}

impl Rk4 {
    pub fn new(template: &GaussianState, params: PhysicsParams, closure: Closure) -> Rk4 {
        let m = template.sites();
        Rk4 {
            params,
            closure,
            k: MomentDerivative::zeros(m),
            acc: template.clone(),
            stage: template.clone(),
            u: vec![Complex64::new(0.0, 0.0); m],
            w: vec![0.0; m],
        }
    }

    pub fn params(&self) -> &PhysicsParams {
        &self.params
    }

    /// Advance `s` by `dt` in place and re-symmetrize `N`, `A`.
    pub fn step(&mut self, s: &mut GaussianState, dt: f64) -> Result<()> {
        self.step_raw(s, dt)?;
        if self.evolves_fluctuations(s) {
            s.resymmetrize();
        }
        Ok(())
    }

    fn evolves_fluctuations(&self, s: &GaussianState) -> bool {
        self.closure == Closure::Gaussian && !(self.params.chi == 0.0 && fluctuations_vanish(s))
    }

    /// RK4 update without the trailing re-symmetrization.
    pub fn step_raw(&mut self, s: &mut GaussianState, dt: f64) -> Result<()> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::config(format!("time step must be positive, got {dt}")));
        }
        let co = Coefficients::new(s, &self.params, self.closure)?;
        if self.acc.sites() != co.m {
            return Err(Error::contract("integrator buffers sized for a different grid"));
        }
        let fluct = self.evolves_fluctuations(s);

        // Stage weights for the accumulator and the next stage argument.
        let weights = [(1.0 / 6.0, 0.5), (1.0 / 3.0, 0.5), (1.0 / 3.0, 1.0), (1.0 / 6.0, 0.0)];
        for (stage, &(acc_w, next_w)) in weights.iter().enumerate() {
            {
                let x = if stage == 0 { Slices::of(s) } else { Slices::of(&self.stage) };
                rhs_into(&co, &x, fluct, Coverage::Upper, &mut self.u, &mut self.w, &mut self.k);
            }
            let first = stage == 0;
            let last = stage == 3;
            combine(
                s.alpha.as_slice().unwrap(),
                self.k.dalpha.as_slice().unwrap(),
                self.acc.alpha.as_slice_mut().unwrap(),
                self.stage.alpha.as_slice_mut().unwrap(),
                dt * acc_w,
                dt * next_w,
                first,
                last,
            );
            if fluct {
                combine(
                    s.normal.as_slice().unwrap(),
                    self.k.dnormal.as_slice().unwrap(),
                    self.acc.normal.as_slice_mut().unwrap(),
                    self.stage.normal.as_slice_mut().unwrap(),
                    dt * acc_w,
                    dt * next_w,
                    first,
                    last,
                );
                combine(
                    s.anomalous.as_slice().unwrap(),
                    self.k.danomalous.as_slice().unwrap(),
                    self.acc.anomalous.as_slice_mut().unwrap(),
                    self.stage.anomalous.as_slice_mut().unwrap(),
                    dt * acc_w,
                    dt * next_w,
                    first,
                    last,
                );
            }
        }
        std::mem::swap(&mut s.alpha, &mut self.acc.alpha);
        if fluct {
            std::mem::swap(&mut s.normal, &mut self.acc.normal);
            std::mem::swap(&mut s.anomalous, &mut self.acc.anomalous);
        }
        s.t += dt;
        Ok(())
    }
}

/// `acc (+)= a_w k` (seeded from `base` on the first stage) and
/// `stage = base + n_w k` (skipped on the last stage).
#[allow(clippy::too_many_arguments)]
fn combine(
    base: &[Complex64],
    k: &[Complex64],
    acc: &mut [Complex64],
    stage: &mut [Complex64],
    a_w: f64,
    n_w: f64,
    first: bool,
    last: bool,
) {
    if first {
        for ((o, b), d) in acc.iter_mut().zip(base).zip(k) {
            *o = *b + *d * a_w;
        }
    } else {
        for (o, d) in acc.iter_mut().zip(k) {
            *o += *d * a_w;
        }
    }
    if !last {
        for ((o, b), d) in stage.iter_mut().zip(base).zip(k) {
            *o = *b + *d * n_w;
        }
    }
}

/// One RK4 step of the Gaussian moment equations, checked for physicality.
pub fn rk4_step(s: &GaussianState, p: &PhysicsParams, dt: f64) -> Result<GaussianState> {
    let mut out = s.clone();
    let mut rk = Rk4::new(s, *p, Closure::Gaussian);
    rk.step(&mut out, dt)?;
    check_snapshot(&out)?;
    Ok(out)
}

fn check_snapshot(s: &GaussianState) -> Result<()> {
    if !s.is_finite() {
        return Err(Error::NumericalAbort { t: s.t, reason: "non-finite moments".into() });
    }
    if !is_physical_fast(s, snapshot_eigen_floor(s)) {
        let report = crate::state::physicality_with_threshold(s, snapshot_eigen_floor(s), 1e-6);
        return Err(Error::NumericalAbort {
            t: s.t,
            reason: format!(
                "moment matrix lost positivity (worst eigenvalue {:.3e}, floor {:.3e}); step too large?",
                report.worst_eigenvalue, report.threshold
            ),
        });
    }
    Ok(())
}

/// Integration settings for [`evolve_with`].
#[derive(Clone, Copy, Debug)]
pub struct EvolveOptions {
    pub dt: f64,
    pub closure: Closure,
    /// Run the positivity check on every delivered snapshot.
    pub check_physicality: bool,
}

impl EvolveOptions {
    pub fn new(dt: f64) -> EvolveOptions {
        EvolveOptions { dt, closure: Closure::Gaussian, check_physicality: true }
    }
}

/// Integrate from `s0` and hand each state at `snapshot_times` to `visit`.
///
/// Steps are of fixed size `dt`; the last step before each snapshot is
/// shortened so the snapshot lands exactly. An empty snapshot list means
/// "deliver the state at `t_end`".
pub fn evolve_with<F>(
    s0: &GaussianState,
    p: &PhysicsParams,
    t_end: f64,
    snapshot_times: &[f64],
    opts: EvolveOptions,
    mut visit: F,
) -> Result<GaussianState>
where
    F: FnMut(&GaussianState) -> Result<()>,
{
    if !(opts.dt > 0.0) || !opts.dt.is_finite() {
        return Err(Error::config(format!("time step must be positive, got {}", opts.dt)));
    }
    if !(t_end >= s0.t) || !t_end.is_finite() {
        return Err(Error::config(format!("t_end = {t_end} precedes the initial time {}", s0.t)));
    }
    let end_only = [t_end];
    let times: &[f64] = if snapshot_times.is_empty() { &end_only } else { snapshot_times };
    if times.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::config("snapshot times must be sorted"));
    }
    if let Some(bad) = times.iter().find(|&&t| t < s0.t || t > t_end) {
        return Err(Error::config(format!("snapshot time {bad} outside [{}, {t_end}]", s0.t)));
    }

    let mut s = s0.clone();
    let mut rk = Rk4::new(&s, *p, opts.closure);
    for &target in times {
        loop {
            let remaining = target - s.t;
            if remaining <= 1e-12 * opts.dt {
                break;
            }
            let h = if remaining > opts.dt * (1.0 + 1e-12) { opts.dt } else { remaining };
            rk.step(&mut s, h)?;
            if !s.alpha.iter().all(|z| z.is_finite()) {
                return Err(Error::NumericalAbort { t: s.t, reason: "non-finite mean field".into() });
            }
        }
        s.t = target;
        if opts.check_physicality && opts.closure == Closure::Gaussian {
            check_snapshot(&s)?;
        }
        visit(&s)?;
    }
    Ok(s)
}

/// Integrate from `s0` and collect the states at `snapshot_times`.
pub fn evolve(
    s0: &GaussianState,
    p: &PhysicsParams,
    t_end: f64,
    dt: f64,
    snapshot_times: &[f64],
) -> Result<Vec<GaussianState>> {
    let mut out = Vec::with_capacity(snapshot_times.len().max(1));
    evolve_with(s0, p, t_end, snapshot_times, EvolveOptions::new(dt), |s| {
        out.push(s.clone());
        Ok(())
    })?;
    Ok(out)
}
