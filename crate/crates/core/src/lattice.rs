//! Uniform periodic lattice, the discrete Laplacian, and the unitary DFT that
//! maps moment states between the position and frequency domains.
//!
//! Lattice modes are normalized as `a_k = sqrt(dx) * a(x_k)` so that
//! `[a_k, a_l^dagger] = delta_kl`. The transform used throughout is
//! `U_jk = M^{-1/2} exp(+i omega_j x_k)`.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use ndarray::{Array1, Array2, ArrayViewMut1, Axis};
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::state::GaussianState;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Domain {
    Position,
    Frequency,
}

impl Domain {
    pub fn name(self) -> &'static str {
        match self {
            Domain::Position => "position",
            Domain::Frequency => "frequency",
        }
    }

    pub fn other(self) -> Domain {
        match self {
            Domain::Position => Domain::Frequency,
            Domain::Frequency => Domain::Position,
        }
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Uniform 1D grid with periodic boundaries.
///
/// `period` is always the position-domain box length `L`, so a frequency grid
/// can be mapped back without extra bookkeeping. Coordinates are sorted
/// ascending in both domains.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    sites: usize,
    period: f64,
    spacing: f64,
    domain: Domain,
    coords: Vec<f64>,
}

impl Grid {
    /// Position-domain grid with `sites` cells over `[-L/2, L/2)`; site
    /// centers sit at `-L/2 + (k + 1/2) dx`.
    pub fn position(sites: usize, length: f64) -> Result<Grid> {
        if sites == 0 {
            return Err(Error::config("grid needs at least one site"));
        }
        if !(length > 0.0) || !length.is_finite() {
            return Err(Error::config(format!("grid length must be positive, got {length}")));
        }
        let dx = length / sites as f64;
        let coords = (0..sites)
            .map(|k| -0.5 * length + (k as f64 + 0.5) * dx)
            .collect();
        Ok(Grid { sites, period: length, spacing: dx, domain: Domain::Position, coords })
    }

    /// Frequency-domain grid conjugate to a position grid of `sites` cells
    /// over length `length`: `omega_j = (j - floor(M/2)) 2 pi / L`.
    pub fn frequency(sites: usize, length: f64) -> Result<Grid> {
        let pos = Grid::position(sites, length)?;
        Ok(pos.reciprocal())
    }

    /// The grid of the other domain.
    pub fn reciprocal(&self) -> Grid {
        match self.domain {
            Domain::Position => {
                let dw = 2.0 * PI / self.period;
                let center = (self.sites / 2) as f64;
                let coords = (0..self.sites).map(|j| (j as f64 - center) * dw).collect();
                Grid {
                    sites: self.sites,
                    period: self.period,
                    spacing: dw,
                    domain: Domain::Frequency,
                    coords,
                }
            }
            Domain::Frequency => {
                Grid::position(self.sites, self.period).expect("frequency grid built from a valid position grid")
            }
        }
    }

    pub fn sites(&self) -> usize {
        self.sites
    }

    /// Position-domain box length `L`.
    pub fn period(&self) -> f64 {
        self.period
    }

    /// Site spacing in this grid's own domain (`dx` or `2 pi / L`).
    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    fn require_position(&self, what: &str) -> Result<()> {
        if self.domain != Domain::Position {
            return Err(Error::contract(format!("{what} requires a position-domain grid")));
        }
        Ok(())
    }

    /// Periodic second difference `(v[k+1] - 2 v[k] + v[k-1]) / dx^2`.
    pub fn laplacian_apply(&self, v: &[Complex64]) -> Result<Vec<Complex64>> {
        self.require_position("laplacian")?;
        if v.len() != self.sites {
            return Err(Error::contract(format!(
                "vector length {} does not match grid size {}",
                v.len(),
                self.sites
            )));
        }
        let m = self.sites;
        let inv = 1.0 / (self.spacing * self.spacing);
        Ok((0..m)
            .map(|k| {
                let next = v[(k + 1) % m];
                let prev = v[(k + m - 1) % m];
                (next - 2.0 * v[k] + prev) * inv
            })
            .collect())
    }

    /// Dense real matrix of the periodic Laplacian. For `M = 2` both
    /// neighbours coincide, so the off-diagonal entry is `2 / dx^2`; for
    /// `M = 1` the operator vanishes.
    pub fn laplacian_matrix(&self) -> Result<Array2<f64>> {
        self.require_position("laplacian")?;
        let m = self.sites;
        let inv = 1.0 / (self.spacing * self.spacing);
        let mut lap = Array2::zeros((m, m));
        for k in 0..m {
            lap[[k, k]] -= 2.0 * inv;
            lap[[k, (k + 1) % m]] += inv;
            lap[[k, (k + m - 1) % m]] += inv;
        }
        Ok(lap)
    }

    /// Eigenvalue of the periodic Laplacian for the plane wave `exp(i q x_k)`.
    pub fn laplacian_eigenvalue(&self, q: f64) -> f64 {
        -2.0 / (self.spacing * self.spacing) * (1.0 - (q * self.spacing).cos())
    }
}

/// FFT-backed application of `U` (position to frequency) and `U^dagger`.
///
/// With `omega_j x_k = (2 pi / M)(j - j0)(k - k0)`, `j0 = floor(M/2)` and
/// `k0 = (M - 1)/2`, the transform factors into a pre-twiddle, an
/// unnormalized `exp(+2 pi i jk / M)` FFT, and a post-twiddle.
pub struct Dft {
    sites: usize,
    plus: Arc<dyn Fft<f64>>,
    minus: Arc<dyn Fft<f64>>,
    pre: Vec<Complex64>,
    post: Vec<Complex64>,
}

impl Dft {
    pub fn new(sites: usize) -> Dft {
        let mut planner = FftPlanner::new();
        let plus = planner.plan_fft_inverse(sites);
        let minus = planner.plan_fft_forward(sites);
        let m = sites as f64;
        let j0 = (sites / 2) as f64;
        let k0 = (m - 1.0) / 2.0;
        let pre = (0..sites)
            .map(|k| Complex64::from_polar(1.0, -2.0 * PI * j0 * k as f64 / m))
            .collect();
        let post = (0..sites)
            .map(|j| {
                Complex64::from_polar(m.sqrt().recip(), 2.0 * PI * (j0 * k0 - j as f64 * k0) / m)
            })
            .collect();
        Dft { sites, plus, minus, pre, post }
    }

    pub fn sites(&self) -> usize {
        self.sites
    }

    /// `v <- U v`.
    pub fn forward(&self, v: &mut [Complex64]) {
        for (x, p) in v.iter_mut().zip(&self.pre) {
            *x *= p;
        }
        self.plus.process(v);
        for (x, p) in v.iter_mut().zip(&self.post) {
            *x *= p;
        }
    }

    /// `v <- U^dagger v`.
    pub fn inverse(&self, v: &mut [Complex64]) {
        for (x, p) in v.iter_mut().zip(&self.post) {
            *x *= p.conj();
        }
        self.minus.process(v);
        for (x, p) in v.iter_mut().zip(&self.pre) {
            *x *= p.conj();
        }
    }

    /// Apply `U` or `U^dagger`, optionally sandwiched by complex conjugation
    /// (`conj(T conj(v))`).
    fn apply(&self, v: &mut [Complex64], direction: Direction, conjugated: bool) {
        if conjugated {
            v.iter_mut().for_each(|x| *x = x.conj());
        }
        match direction {
            Direction::Forward => self.forward(v),
            Direction::Inverse => self.inverse(v),
        }
        if conjugated {
            v.iter_mut().for_each(|x| *x = x.conj());
        }
    }

    /// Dense `U`, built entry by entry from the defining exponential.
    pub fn dense_matrix(grid: &Grid) -> Array2<Complex64> {
        let (pos, freq) = match grid.domain() {
            Domain::Position => (grid.clone(), grid.reciprocal()),
            Domain::Frequency => (grid.reciprocal(), grid.clone()),
        };
        let m = grid.sites();
        let norm = (m as f64).sqrt().recip();
        Array2::from_shape_fn((m, m), |(j, k)| {
            Complex64::from_polar(norm, freq.coords()[j] * pos.coords()[k])
        })
    }
}

#[derive(Clone, Copy)]
enum Direction {
    Forward,
    Inverse,
}

fn transform_axis(
    dft: &Dft,
    mat: &mut Array2<Complex64>,
    axis: Axis,
    direction: Direction,
    conjugated: bool,
) {
    let mut buf = vec![Complex64::new(0.0, 0.0); dft.sites()];
    for mut lane in mat.lanes_mut(axis) {
        copy_out(&lane, &mut buf);
        dft.apply(&mut buf, direction, conjugated);
        copy_in(&mut lane, &buf);
    }
}

fn copy_out(lane: &ArrayViewMut1<'_, Complex64>, buf: &mut [Complex64]) {
    for (b, x) in buf.iter_mut().zip(lane.iter()) {
        *b = *x;
    }
}

fn copy_in(lane: &mut ArrayViewMut1<'_, Complex64>, buf: &[Complex64]) {
    for (x, b) in lane.iter_mut().zip(buf) {
        *x = *b;
    }
}

fn transform_state(s: &GaussianState, dft: &Dft, direction: Direction) -> GaussianState {
    let mut alpha: Array1<Complex64> = s.alpha.clone();
    dft.apply(alpha.as_slice_mut().expect("contiguous"), direction, false);

    // N_kl = <da_k^dagger da_l> picks up conj(T) on the first index and T on
    // the second; A_kl = <da_k da_l> picks up T on both.
    let mut normal = s.normal.clone();
    transform_axis(dft, &mut normal, Axis(0), direction, true);
    transform_axis(dft, &mut normal, Axis(1), direction, false);

    let mut anomalous = s.anomalous.clone();
    transform_axis(dft, &mut anomalous, Axis(0), direction, false);
    transform_axis(dft, &mut anomalous, Axis(1), direction, false);

    GaussianState { grid: s.grid.reciprocal(), alpha, normal, anomalous, t: s.t }
}

/// Position-domain state to its frequency-domain representation.
pub fn dft_state(s: &GaussianState) -> Result<GaussianState> {
    dft_state_with(s, &Dft::new(s.grid.sites()))
}

/// As [`dft_state`] but reusing a prepared transform.
pub fn dft_state_with(s: &GaussianState, dft: &Dft) -> Result<GaussianState> {
    if s.grid.domain() != Domain::Position {
        return Err(Error::contract("dft_state expects a position-domain state"));
    }
    if dft.sites() != s.grid.sites() {
        return Err(Error::contract("transform size does not match the state grid"));
    }
    Ok(transform_state(s, dft, Direction::Forward))
}

/// Frequency-domain state back to the position domain.
pub fn idft_state(s: &GaussianState) -> Result<GaussianState> {
    if s.grid.domain() != Domain::Frequency {
        return Err(Error::contract("idft_state expects a frequency-domain state"));
    }
    let dft = Dft::new(s.grid.sites());
    Ok(transform_state(s, &dft, Direction::Inverse))
}
