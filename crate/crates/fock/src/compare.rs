//! Side-by-side runs of the Gaussian moment propagator and the Fock-space
//! oracle on one or two sites.

use ndarray::{Array1, Array2};
use num_complex::Complex64;
use qsoliton_core::{evolve, pair_correlation_matrix, GaussianState, Grid, PhysicsParams};

use crate::{
    build_operators, evolve_density, extract_moments, normally_ordered_covariance, FockOracleState, OracleError,
    Result, DEFAULT_CUTOFF,
};

/// One small-lattice validation run. The lattice spacing is `length / sites`,
/// so the on-site Kerr constant is `chi * sites / length`.
#[derive(Clone, Debug, PartialEq)]
pub struct Comparison {
    pub amplitudes: Vec<Complex64>,
    pub length: f64,
    pub params: PhysicsParams,
    pub t_end: f64,
    /// Number of equally spaced comparison times in `(0, t_end]`.
    pub samples: usize,
    pub gaussian_dt: f64,
    pub oracle_dt: f64,
    pub cutoff: usize,
}

impl Comparison {
    /// Equal-magnitude amplitudes `sqrt(occupation) e^{0.3 i k}` with step
    /// sizes well inside both integrators' accuracy range.
    pub fn uniform(sites: usize, occupation: f64, length: f64, params: PhysicsParams, t_end: f64) -> Comparison {
        let amplitudes = (0..sites).map(|k| Complex64::from_polar(occupation.sqrt(), 0.3 * k as f64)).collect();
        Comparison {
            amplitudes,
            length,
            params,
            t_end,
            samples: 10,
            gaussian_dt: 1e-4,
            oracle_dt: 2e-4,
            cutoff: DEFAULT_CUTOFF,
        }
    }

    pub fn sites(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn spacing(&self) -> f64 {
        self.length / self.sites() as f64
    }

    pub fn kerr_lattice(&self) -> f64 {
        self.params.kerr_lattice(self.spacing())
    }
}

/// Block-normwise relative discrepancies at one time: `max |g - f| / max |f|`
/// over the entries of each block, `f` from the oracle.
#[derive(Clone, Debug, PartialEq)]
pub struct Discrepancy {
    pub t: f64,
    /// `|c| t`, the accumulated on-site nonlinear phase per photon.
    pub kerr_phase: f64,
    pub alpha: f64,
    pub normal: f64,
    pub anomalous: f64,
    /// Wick formula on the oracle's own moments against the direct trace.
    pub wick: f64,
    /// Wick formula on the propagated Gaussian state against the direct trace.
    pub propagated_correlation: f64,
    /// `max |c_wick - c_direct| / max_k <n_k>`: the Wick error in units of
    /// the Fano factor. Meaningful even where `c` itself vanishes, as it
    /// does identically for a single lossless Kerr mode.
    pub wick_fano: f64,
}

impl Discrepancy {
    pub fn worst_moment(&self) -> f64 {
        self.alpha.max(self.normal).max(self.anomalous)
    }
}

fn relative<'a>(got: impl Iterator<Item = &'a Complex64>, want: impl Iterator<Item = &'a Complex64>) -> f64 {
    let (mut diff, mut scale): (f64, f64) = (0.0, 0.0);
    for (g, w) in got.zip(want) {
        diff = diff.max((g - w).norm());
        scale = scale.max(w.norm());
    }
    if scale == 0.0 {
        if diff == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        diff / scale
    }
}

fn relative_real(got: &Array2<f64>, want: &Array2<f64>) -> f64 {
    let as_complex = |a: &Array2<f64>| a.mapv(|x| Complex64::new(x, 0.0));
    let (g, w) = (as_complex(got), as_complex(want));
    relative(g.iter(), w.iter())
}

fn fano_scaled(got: &Array2<f64>, want: &Array2<f64>, s: &GaussianState) -> f64 {
    let diff = got.iter().zip(want.iter()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let mass = (0..s.sites()).map(|k| s.alpha[k].norm_sqr() + s.normal[[k, k]].re).fold(0.0, f64::max);
    diff / mass
}

/// Direct Fock-basis `<:dn_k dn_l:>` for every site pair.
pub fn direct_pair_correlation(st: &FockOracleState, ops: &crate::Operators) -> Array2<f64> {
    let m = ops.space.sites;
    Array2::from_shape_fn((m, m), |(k, l)| normally_ordered_covariance(st, ops, &[k], &[l]))
}

fn gaussian_from(grid: &Grid, alpha: Array1<Complex64>, normal: Array2<Complex64>, anomalous: Array2<Complex64>) -> GaussianState {
    GaussianState { grid: grid.clone(), alpha, normal, anomalous, t: 0.0 }
}

/// Run both integrators and report discrepancies at each sample time.
pub fn run(cmp: &Comparison) -> Result<Vec<Discrepancy>> {
    if cmp.samples == 0 || !(cmp.t_end > 0.0) {
        return Err(OracleError::Config("comparison needs t_end > 0 and at least one sample".into()));
    }
    let sites = cmp.sites();
    let ops = build_operators(sites, cmp.cutoff, cmp.spacing(), &cmp.params)?;
    let grid = Grid::position(sites, cmp.length).map_err(|e| OracleError::Config(e.to_string()))?;
    let times: Vec<f64> = (1..=cmp.samples).map(|i| cmp.t_end * i as f64 / cmp.samples as f64).collect();

    let g0 = GaussianState::coherent(grid.clone(), Array1::from_vec(cmp.amplitudes.clone()))
        .map_err(|e| OracleError::Config(e.to_string()))?;
    let gaussian = evolve(&g0, &cmp.params, cmp.t_end, cmp.gaussian_dt, &times).map_err(|e| match e {
        qsoliton_core::Error::NumericalAbort { t, reason } => OracleError::Abort { t, reason },
        other => OracleError::Config(other.to_string()),
    })?;

    let mut rho = FockOracleState::coherent(&ops, &cmp.amplitudes)?;
    let mut out = Vec::with_capacity(times.len());
    for (g, &t) in gaussian.iter().zip(&times) {
        rho = evolve_density(&rho, &ops, t, cmp.oracle_dt)?;
        let mom = extract_moments(&rho, &ops);
        let direct = direct_pair_correlation(&rho, &ops);
        let oracle_state = gaussian_from(&grid, mom.alpha.clone(), mom.normal.clone(), mom.anomalous.clone());
        let wick = pair_correlation_matrix(&oracle_state).c_local;
        let propagated = pair_correlation_matrix(g).c_local;
        out.push(Discrepancy {
            t,
            kerr_phase: cmp.kerr_lattice().abs() * t,
            alpha: relative(g.alpha.iter(), mom.alpha.iter()),
            normal: relative(g.normal.iter(), mom.normal.iter()),
            anomalous: relative(g.anomalous.iter(), mom.anomalous.iter()),
            wick: relative_real(&wick, &direct),
            propagated_correlation: relative_real(&propagated, &direct),
            wick_fano: fano_scaled(&wick, &direct, &oracle_state),
        });
    }
    Ok(out)
}
