//! Gaussian-moment simulation of quantum N-soliton propagation in a lossy
//! Kerr medium, with photon-number correlation and squeezing analysis of
//! square-filtered output in the position and frequency domains.

pub mod analysis;
pub mod classical;
pub mod error;
pub mod lattice;
pub mod propagator;
pub mod snapshot;
pub mod state;

pub use analysis::{
    cs_test, interval_stats, optimize_cs_pair, optimize_fano_filter, optimize_fano_filter_above, pair_correlation_matrix, squeezing_db,
    CorrelationStats, CsOptimum, FanoOptimum, IntervalSet, PairCorrelation, PrefixSums,
};
pub use error::{Error, Result};
pub use lattice::{dft_state, dft_state_with, idft_state, Dft, Domain, Grid};
pub use propagator::{
    default_dt, evolve, evolve_with, moment_rhs, moment_rhs_with, rk4_step, Closure, EvolveOptions,
    MomentDerivative, Rk4,
};
pub use state::{
    apply_filter, init_nsoliton_state, is_physical_fast, physicality_check, snapshot_eigen_floor,
    total_photon_number, FilterSpec, GaussianState, PhysicalityReport, PhysicsParams, SolitonSpec,
};
