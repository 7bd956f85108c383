//! Gaussian moment state of the lattice field: mean `alpha_k = <a_k>`,
//! normal moments `N_kl = <da_k^dagger da_l>` and anomalous moments
//! `A_kl = <da_k da_l>`.

use nalgebra::DMatrix;
use ndarray::{Array1, Array2};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::lattice::{Domain, Grid};

/// Model constants in soliton units (`x0 = 1`, `t_d = x0^2 / |omega2|`).
///
/// `chi` is the continuum (density-normalized) Kerr constant; the on-site
/// lattice constant is `chi / dx`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhysicsParams {
    pub omega2: f64,
    pub chi: f64,
    pub gamma: f64,
}

impl PhysicsParams {
    /// Bright-soliton parameters for a fundamental soliton carrying `n1`
    /// photons: `omega2 = +1`, `chi = -2 / n1`, so `a0^2 |chi| = 1`.
    pub fn soliton_units(n1: f64, gamma: f64) -> Result<PhysicsParams> {
        if !(n1 > 0.0) || !n1.is_finite() {
            return Err(Error::config(format!("n1 must be positive and finite, got {n1}")));
        }
        PhysicsParams { omega2: 1.0, chi: -2.0 / n1, gamma }.validated()
    }

    pub fn validated(self) -> Result<PhysicsParams> {
        if !self.omega2.is_finite() || !self.chi.is_finite() || !self.gamma.is_finite() {
            return Err(Error::config("physics parameters must be finite"));
        }
        if self.gamma < 0.0 {
            return Err(Error::config(format!("damping must be nonnegative, got {}", self.gamma)));
        }
        Ok(self)
    }

    /// On-site Kerr constant for lattice modes `sqrt(dx) a(x_k)`.
    pub fn kerr_lattice(&self, dx: f64) -> f64 {
        self.chi / dx
    }

    /// Focusing nonlinearity with anomalous dispersion (or the mirror case).
    pub fn supports_bright_solitons(&self) -> bool {
        self.chi * self.omega2 < 0.0
    }

    /// Dispersion time `t_d = x0^2 / |omega2|` for unit `x0`.
    pub fn dispersion_time(&self) -> f64 {
        1.0 / self.omega2.abs()
    }
}

/// Classical N-soliton initial profile `N a0 sech(x / x0)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolitonSpec {
    pub order: u32,
    pub a0: f64,
    pub x0: f64,
    /// Photon number of the fundamental soliton, `2 a0^2 x0`.
    pub n1: f64,
}

impl SolitonSpec {
    /// Soliton of the given order in units with `x0 = 1`.
    pub fn new(order: u32, n1: f64) -> Result<SolitonSpec> {
        if order == 0 {
            return Err(Error::config("soliton order must be at least 1"));
        }
        if !(n1 > 0.0) || !n1.is_finite() {
            return Err(Error::config(format!("n1 must be positive and finite, got {n1}")));
        }
        Ok(SolitonSpec { order, a0: (0.5 * n1).sqrt(), x0: 1.0, n1 })
    }

    /// Whether `a0^2 = |omega2| / (|chi| x0^2)` holds to the given relative tolerance.
    pub fn satisfies_existence(&self, p: &PhysicsParams, rel_tol: f64) -> bool {
        let want = p.omega2.abs() / (p.chi.abs() * self.x0 * self.x0);
        ((self.a0 * self.a0 - want) / want).abs() <= rel_tol
    }

    /// Continuum photon number `N^2 n1`.
    pub fn photon_number(&self) -> f64 {
        let n = self.order as f64;
        n * n * self.n1
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GaussianState {
    pub grid: Grid,
    pub alpha: Array1<Complex64>,
    pub normal: Array2<Complex64>,
    pub anomalous: Array2<Complex64>,
    pub t: f64,
}

impl GaussianState {
    /// Multimode coherent state with the given lattice-mode amplitudes.
    pub fn coherent(grid: Grid, alpha: Array1<Complex64>) -> Result<GaussianState> {
        let m = grid.sites();
        if alpha.len() != m {
            return Err(Error::contract(format!(
                "mean vector length {} does not match grid size {m}",
                alpha.len()
            )));
        }
        Ok(GaussianState {
            grid,
            alpha,
            normal: Array2::zeros((m, m)),
            anomalous: Array2::zeros((m, m)),
            t: 0.0,
        })
    }

    pub fn vacuum(grid: Grid) -> GaussianState {
        let m = grid.sites();
        GaussianState::coherent(grid, Array1::zeros(m)).expect("shapes agree")
    }

    pub fn sites(&self) -> usize {
        self.grid.sites()
    }

    /// `sum_k |alpha_k|^2 + N_kk`.
    pub fn total_photon_number(&self) -> f64 {
        self.alpha.iter().map(|a| a.norm_sqr()).sum::<f64>() + self.normal_trace()
    }

    pub fn normal_trace(&self) -> f64 {
        self.normal.diag().iter().map(|z| z.re).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.alpha.iter().all(|z| z.is_finite())
            && self.normal.iter().all(|z| z.is_finite())
            && self.anomalous.iter().all(|z| z.is_finite())
    }

    /// `max |N - N^dagger|` and `max |A - A^T|`.
    pub fn symmetry_defects(&self) -> (f64, f64) {
        let m = self.sites();
        let mut herm: f64 = 0.0;
        let mut sym: f64 = 0.0;
        for k in 0..m {
            for l in k..m {
                herm = herm.max((self.normal[[k, l]] - self.normal[[l, k]].conj()).norm());
                sym = sym.max((self.anomalous[[k, l]] - self.anomalous[[l, k]]).norm());
            }
        }
        (herm, sym)
    }

    /// Replace `N` by `(N + N^dagger)/2` and `A` by `(A + A^T)/2`.
    pub fn resymmetrize(&mut self) {
        const BLOCK: usize = 32;
        let m = self.sites();
        let normal = self.normal.as_slice_mut().expect("row-major");
        let anomalous = self.anomalous.as_slice_mut().expect("row-major");
        for k in 0..m {
            normal[k * m + k].im = 0.0;
        }
        // Tiles keep the transposed walk inside cache.
        for kb in (0..m).step_by(BLOCK) {
            for lb in (kb..m).step_by(BLOCK) {
                for k in kb..(kb + BLOCK).min(m) {
                    for l in lb.max(k + 1)..(lb + BLOCK).min(m) {
                        let (upper, lower) = (k * m + l, l * m + k);
                        let n = 0.5 * (normal[upper] + normal[lower].conj());
                        normal[upper] = n;
                        normal[lower] = n.conj();
                        let a = 0.5 * (anomalous[upper] + anomalous[lower]);
                        anomalous[upper] = a;
                        anomalous[lower] = a;
                    }
                }
            }
        }
    }

    /// Hermitian `2M x 2M` matrix `[[N, conj(A)], [A, N^T + I]]` of second
    /// moments `<xi_a^dagger xi_b>` for `xi = (da, da^dagger)`.
    pub fn moment_block_matrix(&self) -> DMatrix<Complex64> {
        let m = self.sites();
        let mut g = DMatrix::zeros(2 * m, 2 * m);
        for k in 0..m {
            for l in 0..m {
                g[(k, l)] = self.normal[[k, l]];
                g[(k, m + l)] = self.anomalous[[k, l]].conj();
                g[(m + k, l)] = self.anomalous[[k, l]];
                g[(m + k, m + l)] = self.normal[[l, k]];
            }
            g[(m + k, m + k)] += Complex64::new(1.0, 0.0);
        }
        g
    }
}

pub fn init_nsoliton_state(grid: &Grid, spec: &SolitonSpec) -> Result<GaussianState> {
    if grid.domain() != Domain::Position {
        return Err(Error::contract("initial soliton state must live on a position grid"));
    }
    let amp = grid.spacing().sqrt() * spec.order as f64 * spec.a0;
    let alpha = grid
        .coords()
        .iter()
        .map(|&x| Complex64::new(amp / (x / spec.x0).cosh(), 0.0))
        .collect();
    GaussianState::coherent(grid.clone(), alpha)
}

pub fn total_photon_number(s: &GaussianState) -> f64 {
    s.total_photon_number()
}

#[derive(Clone, Debug, PartialEq)]
pub struct PhysicalityReport {
    pub passed: bool,
    /// Smallest eigenvalue of the moment block matrix.
    pub worst_eigenvalue: f64,
    /// Eigenvalue floor used for the decision.
    pub threshold: f64,
    pub hermiticity_defect: f64,
    pub symmetry_defect: f64,
}

/// Full eigenvalue test of the Gaussian physicality condition.
///
/// Passes iff the smallest eigenvalue of `[[N, conj A], [A, N^T + I]]` is at
/// least `-tol * max(1, tr N)` and `N`, `A` are Hermitian/symmetric within
/// `tol * max(1, max|entry|)`.
pub fn physicality_check(s: &GaussianState, tol: f64) -> PhysicalityReport {
    let scale = s.normal_trace().max(1.0);
    physicality_with_threshold(s, -tol * scale, tol)
}

/// Eigenvalue floor for snapshot invariants, `-1e-6 max(1, tr N)`.
///
/// Pure states sit exactly on the positivity boundary, so a fixed-step
/// integrator lands a little below it; the floor has to absorb that.
pub fn snapshot_eigen_floor(s: &GaussianState) -> f64 {
    -1e-6 * s.normal_trace().max(1.0)
}

pub fn physicality_with_threshold(s: &GaussianState, threshold: f64, sym_tol: f64) -> PhysicalityReport {
    let (herm, sym) = s.symmetry_defects();
    let entry_scale = s
        .normal
        .iter()
        .chain(s.anomalous.iter())
        .fold(1.0_f64, |acc, z| acc.max(z.norm()));
    let worst = if s.is_finite() {
        s.moment_block_matrix()
            .symmetric_eigenvalues()
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    } else {
        f64::NAN
    };
    let passed = worst >= threshold && herm <= sym_tol * entry_scale && sym <= sym_tol * entry_scale;
    PhysicalityReport {
        passed,
        worst_eigenvalue: worst,
        threshold,
        hermiticity_defect: herm,
        symmetry_defect: sym,
    }
}

/// Cholesky test of `G - threshold I > 0`, i.e. smallest eigenvalue of the
/// block matrix above `threshold`. Same predicate as the eigenvalue test at a
/// fraction of the cost.
pub fn is_physical_fast(s: &GaussianState, threshold: f64) -> bool {
    if !s.is_finite() {
        return false;
    }
    let g = s.moment_block_matrix();
    let n = g.nrows();
    // Row-major lower triangle so both inner products run over contiguous rows.
    let mut l = vec![Complex64::new(0.0, 0.0); n * n];
    for i in 0..n {
        for j in 0..=i {
            l[i * n + j] = g[(i, j)];
        }
        l[i * n + i] -= Complex64::new(threshold, 0.0);
    }
    hermitian_cholesky_in_place(&mut l, n)
}

/// In-place Cholesky of a Hermitian matrix given by its row-major lower
/// triangle. Returns false as soon as a pivot is not strictly positive.
fn hermitian_cholesky_in_place(l: &mut [Complex64], n: usize) -> bool {
    for j in 0..n {
        let (head, tail) = l.split_at_mut(j * n);
        let row_j = &mut tail[..n];
        // Finish row j against the already factored rows.
        for k in 0..j {
            let row_k = &head[k * n..k * n + k + 1];
            let mut acc = row_j[k];
            for (a, b) in row_j[..k].iter().zip(&row_k[..k]) {
                acc -= a * b.conj();
            }
            row_j[k] = acc / row_k[k].re;
        }
        let d = row_j[j].re - row_j[..j].iter().map(|z| z.norm_sqr()).sum::<f64>();
        if !(d > 0.0) {
            return false;
        }
        row_j[j] = Complex64::new(d.sqrt(), 0.0);
    }
    true
}

/// Transmittance `G_k` on the grid of one domain.
#[derive(Clone, Debug, PartialEq)]
pub struct FilterSpec {
    pub domain: Domain,
    pub transmittance: Vec<Complex64>,
}

impl FilterSpec {
    pub fn new(domain: Domain, transmittance: Vec<Complex64>) -> Result<FilterSpec> {
        if let Some((k, g)) = transmittance.iter().enumerate().find(|(_, g)| !(g.norm() <= 1.0)) {
            return Err(Error::config(format!("filter transmittance |G_{k}| = {} exceeds 1", g.norm())));
        }
        Ok(FilterSpec { domain, transmittance })
    }

    /// Square bandpass: `G_k = 1` where `|nu_k - center| <= half_width`, else 0.
    pub fn square(grid: &Grid, center: f64, half_width: f64) -> FilterSpec {
        let transmittance = grid
            .coords()
            .iter()
            .map(|&nu| {
                if (nu - center).abs() <= half_width {
                    Complex64::new(1.0, 0.0)
                } else {
                    Complex64::new(0.0, 0.0)
                }
            })
            .collect();
        FilterSpec { domain: grid.domain(), transmittance }
    }

    pub fn uniform(grid: &Grid, g: Complex64) -> Result<FilterSpec> {
        FilterSpec::new(grid.domain(), vec![g; grid.sites()])
    }
}

/// Passive filter `b_k = G_k a_k + sqrt(1 - |G_k|^2) f_k` with vacuum `f`.
/// The noise port adds nothing to normally ordered moments.
pub fn apply_filter(s: &GaussianState, f: &FilterSpec) -> Result<GaussianState> {
    if f.domain != s.grid.domain() {
        return Err(Error::contract(format!(
            "filter domain {} does not match state domain {}",
            f.domain,
            s.grid.domain()
        )));
    }
    let m = s.sites();
    if f.transmittance.len() != m {
        return Err(Error::contract("filter length does not match grid size"));
    }
    if let Some(g) = f.transmittance.iter().find(|g| !(g.norm() <= 1.0)) {
        return Err(Error::config(format!("filter transmittance |G| = {} exceeds 1", g.norm())));
    }
    let g = &f.transmittance;
    let alpha = Array1::from_shape_fn(m, |k| g[k] * s.alpha[k]);
    let normal = Array2::from_shape_fn((m, m), |(k, l)| g[k].conj() * g[l] * s.normal[[k, l]]);
    let anomalous = Array2::from_shape_fn((m, m), |(k, l)| g[k] * g[l] * s.anomalous[[k, l]]);
    Ok(GaussianState { grid: s.grid.clone(), alpha, normal, anomalous, t: s.t })
}
