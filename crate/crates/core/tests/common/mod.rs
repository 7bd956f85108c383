#![allow(dead_code)]

use nalgebra::DMatrix;
use ndarray::{Array1, Array2};
use num_complex::Complex64;
use qsoliton_core::{GaussianState, Grid};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn complex_normal(rng: &mut ChaCha8Rng) -> Complex64 {
    // Box-Muller; the scale does not matter for the uses here.
    let u1: f64 = rng.gen_range(1e-12..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    Complex64::from_polar((-u1.ln()).sqrt(), 2.0 * std::f64::consts::PI * u2)
}

/// Haar-ish random unitary from the QR factor of a complex Gaussian matrix.
pub fn random_unitary(rng: &mut ChaCha8Rng, m: usize) -> DMatrix<Complex64> {
    let z = DMatrix::from_fn(m, m, |_, _| complex_normal(rng));
    z.qr().q()
}

/// Squeezed thermal modes mixed by a random passive unitary, plus a random
/// mean. Physical by construction.
pub fn random_physical_state(rng: &mut ChaCha8Rng, grid: Grid, mean_scale: f64) -> GaussianState {
    let m = grid.sites();
    let v = random_unitary(rng, m);
    let mut n_modes = Vec::with_capacity(m);
    let mut a_modes = Vec::with_capacity(m);
    for _ in 0..m {
        let thermal: f64 = rng.gen_range(0.0..1.0);
        let r: f64 = rng.gen_range(0.0..0.8);
        let phase: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
        n_modes.push((thermal + 0.5) * (2.0 * r).cosh() - 0.5);
        a_modes.push(Complex64::from_polar((thermal + 0.5) * (2.0 * r).sinh(), phase));
    }
    let normal = Array2::from_shape_fn((m, m), |(k, l)| {
        (0..m).map(|j| v[(k, j)].conj() * v[(l, j)] * n_modes[j]).sum()
    });
    let anomalous = Array2::from_shape_fn((m, m), |(k, l)| {
        (0..m).map(|j| v[(k, j)] * v[(l, j)] * a_modes[j]).sum()
    });
    let alpha = Array1::from_shape_fn(m, |_| complex_normal(rng) * mean_scale);
    let mut s = GaussianState { grid, alpha, normal, anomalous, t: 0.0 };
    s.resymmetrize();
    s
}

pub fn max_abs_diff(a: &Array2<Complex64>, b: &Array2<Complex64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

pub fn max_abs(a: &Array2<Complex64>) -> f64 {
    a.iter().map(|z| z.norm()).fold(0.0, f64::max)
}
