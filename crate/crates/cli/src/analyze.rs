//! Per-snapshot statistics in both domains, their invariant checks, and the
//! files they are written to.

use std::path::{Path, PathBuf};

use qsoliton_core::{
    dft_state_with, interval_stats, is_physical_fast, optimize_cs_pair, optimize_fano_filter_above,
    pair_correlation_matrix, snapshot_eigen_floor, squeezing_db, CorrelationStats, CsOptimum, Dft, Domain,
    FanoOptimum, GaussianState, Grid, IntervalSet,
};

use crate::config::{FilterConfig, OptimizeConfig, RunConfig};
use crate::error::{CliError, Result};
use crate::format::{self, CurveCsv, Table};
use crate::manifest::{Check, Tolerances};

/// Best single square filter and the most nonclassical pair of filters.
#[derive(Clone, Debug)]
pub struct Optimum {
    pub fano: FanoOptimum,
    pub squeezing_db: Option<f64>,
    pub center: f64,
    pub cs: Option<CsOptimum>,
}

#[derive(Clone, Debug)]
pub struct DomainAnalysis {
    pub domain: Domain,
    pub grid: Grid,
    pub intervals: IntervalSet,
    pub stats: CorrelationStats,
    pub total_photons: f64,
    pub optimum: Option<Optimum>,
}

#[derive(Clone, Debug)]
pub struct SnapshotAnalysis {
    pub t: f64,
    pub position: DomainAnalysis,
    pub frequency: DomainAnalysis,
    pub checks: Vec<Check>,
}

impl SnapshotAnalysis {
    pub fn domains(&self) -> [&DomainAnalysis; 2] {
        [&self.position, &self.frequency]
    }
}

/// Filter layout and transform for one grid, reused across snapshots.
pub struct Analyzer {
    filters: FilterConfig,
    optimize: OptimizeConfig,
    dft: Dft,
    x_intervals: IntervalSet,
    w_intervals: IntervalSet,
}

/// Width in sites of the filter centered on the origin.
fn filter_sites(set: &IntervalSet) -> usize {
    set.ranges()[set.len() / 2].len()
}

impl Analyzer {
    pub fn new(cfg: &RunConfig, grid: &Grid) -> Result<Analyzer> {
        let f = &cfg.filters;
        let tile = |grid: &Grid, width: f64, window: f64| {
            IntervalSet::tiling(grid, width, window).map_err(|e| {
                CliError::Config(format!(
                    "{} filters: {e} (full width {} against grid spacing {})",
                    grid.domain(),
                    2.0 * width,
                    grid.spacing()
                ))
            })
        };
        let x_intervals = tile(grid, f.dx_width, f.x_window)?;
        let w_intervals = tile(&grid.reciprocal(), f.domega_width, f.omega_window)?;
        Ok(Analyzer {
            filters: f.clone(),
            optimize: cfg.optimize.clone(),
            dft: Dft::new(grid.sites()),
            x_intervals,
            w_intervals,
        })
    }

    pub fn filters(&self) -> &FilterConfig {
        &self.filters
    }

    fn domain(&self, s: &GaussianState, intervals: &IntervalSet, checks: &mut Vec<Check>) -> Result<DomainAnalysis> {
        let pc = pair_correlation_matrix(s);
        let stats = interval_stats(&pc, intervals, s.t)?;
        let total_photons = s.total_photon_number();
        let domain = s.grid.domain();
        checks.push(Check::at_most("eta_bounds", Some(domain), s.t, stats.eta_bound_excess(), Tolerances::ETA_BOUND));
        checks.push(Check::at_most(
            "fano_identity",
            Some(domain),
            s.t,
            stats.fano_identity_defect(),
            Tolerances::FANO_IDENTITY,
        ));

        let optimum = if self.optimize.enable {
            let min_mass = self.optimize.min_mass_fraction * total_photons;
            optimize_fano_filter_above(&pc, self.optimize.min_width, min_mass)?
                .map(|fano| -> Result<Optimum> {
                    let coords = s.grid.coords();
                    let center = 0.5 * (coords[fano.interval.start] + coords[fano.interval.end - 1]);
                    let cs = optimize_cs_pair(&pc, filter_sites(intervals))?;
                    Ok(Optimum { squeezing_db: squeezing_db(fano.fano).ok(), center, cs, fano })
                })
                .transpose()?
        } else {
            None
        };
        Ok(DomainAnalysis { domain, grid: s.grid.clone(), intervals: intervals.clone(), stats, total_photons, optimum })
    }

    /// Statistics of a position-domain state and of its transform.
    pub fn analyze(&self, s: &GaussianState) -> Result<SnapshotAnalysis> {
        if s.grid.domain() != Domain::Position {
            return Err(CliError::Internal("snapshots are stored in the position domain".into()));
        }
        let mut checks = Vec::new();
        let position = self.domain(s, &self.x_intervals, &mut checks)?;
        let spectral = dft_state_with(s, &self.dft)?;
        let frequency = self.domain(&spectral, &self.w_intervals, &mut checks)?;
        let balance = (frequency.total_photons - position.total_photons).abs() / position.total_photons.max(f64::MIN_POSITIVE);
        checks.push(Check::at_most("domain_photon_balance", None, s.t, balance, Tolerances::DOMAIN_BALANCE));
        Ok(SnapshotAnalysis { t: s.t, position, frequency, checks })
    }
}

/// Positivity certificate for a state that did not come from the
/// integrator (which checks its own snapshots).
pub fn physicality_check(s: &GaussianState) -> Check {
    let floor = snapshot_eigen_floor(s);
    Check::certificate("physicality", s.t, is_physical_fast(s, floor), floor)
}

/// Accumulates the per-snapshot curve files and η maps of one run.
pub struct SnapshotWriter {
    dir: PathBuf,
    eta_maps: bool,
    curves: Option<[DomainCurves; 2]>,
    written: Vec<PathBuf>,
    index: usize,
}

struct DomainCurves {
    mean: CurveCsv,
    eta_diag: CurveCsv,
    fano: CurveCsv,
    optimum: Table,
}

pub const OPTIMUM_HEADER: [&str; 12] = [
    "t_over_td",
    "photon_number",
    "lo",
    "hi",
    "interval_center",
    "fano",
    "squeezing_db",
    "cs_first_center",
    "cs_second_center",
    "cs_d_min",
    "cs_v_norm",
    "cs_width",
];

impl DomainCurves {
    fn new() -> Self {
        DomainCurves { mean: CurveCsv::new(), eta_diag: CurveCsv::new(), fano: CurveCsv::new(), optimum: Table::new(&OPTIMUM_HEADER) }
    }
}

pub fn optimum_row(t_over_td: f64, d: &DomainAnalysis) -> Option<Vec<String>> {
    let o = d.optimum.as_ref()?;
    let coords = d.grid.coords();
    let mid = |r: &std::ops::Range<usize>| 0.5 * (coords[r.start] + coords[r.end - 1]);
    let cs = o.cs.as_ref();
    Some(vec![
        format::float(t_over_td),
        format::float(d.total_photons),
        o.fano.interval.start.to_string(),
        o.fano.interval.end.to_string(),
        format::float(o.center),
        format::float(o.fano.fano),
        format::opt_float(o.squeezing_db),
        format::opt_float(cs.map(|c| mid(&c.first))),
        format::opt_float(cs.map(|c| mid(&c.second))),
        format::opt_float(cs.map(|c| c.d_min)),
        format::opt_float(cs.and_then(|c| c.v_norm)),
        cs.map_or_else(|| format::MISSING.to_string(), |c| c.first.len().to_string()),
    ])
}

impl SnapshotWriter {
    pub fn new(dir: &Path, curves: bool, eta_maps: bool) -> Result<SnapshotWriter> {
        std::fs::create_dir_all(dir)?;
        Ok(SnapshotWriter {
            dir: dir.to_path_buf(),
            eta_maps,
            curves: curves.then(|| [DomainCurves::new(), DomainCurves::new()]),
            written: Vec::new(),
            index: 0,
        })
    }

    fn write(&mut self, relative: PathBuf, contents: &str) -> Result<()> {
        let path = self.dir.join(&relative);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        std::fs::write(path, contents)?;
        self.written.push(relative);
        Ok(())
    }

    pub fn record(&mut self, a: &SnapshotAnalysis, t_d: f64) -> Result<()> {
        let t = a.t / t_d;
        for (k, d) in a.domains().into_iter().enumerate() {
            if let Some(curves) = self.curves.as_mut() {
                let c = &mut curves[k];
                for i in 0..d.stats.len() {
                    let center = d.intervals.center(i, &d.grid);
                    c.mean.push(t, center, Some(d.stats.m[i]));
                    c.eta_diag.push(t, center, d.stats.eta_diag(i));
                    c.fano.push(t, center, d.stats.fano[i]);
                }
                if let Some(row) = optimum_row(t, d) {
                    c.optimum.push(&row);
                }
            }
            if self.eta_maps {
                let n = d.stats.len();
                let text = format::matrix(d.grid.sites(), t, n, n, |i, j| d.stats.eta[[i, j]]);
                let name = PathBuf::from(format!("eta_{}", d.domain.name())).join(format!("t{:04}.txt", self.index));
                self.write(name, &text)?;
            }
        }
        self.index += 1;
        Ok(())
    }

    /// Flush the curve files; returns every path written, relative to the run directory.
    pub fn finish(mut self) -> Result<Vec<PathBuf>> {
        if let Some(curves) = self.curves.take() {
            for (domain, c) in [Domain::Position, Domain::Frequency].into_iter().zip(curves) {
                let name = domain.name();
                self.write(PathBuf::from(format!("{name}_mean_photons.csv")), &c.mean.into_string())?;
                self.write(PathBuf::from(format!("{name}_eta_diag.csv")), &c.eta_diag.into_string())?;
                self.write(PathBuf::from(format!("{name}_fano.csv")), &c.fano.into_string())?;
                self.write(PathBuf::from(format!("{name}_optimum.csv")), &c.optimum.into_string())?;
            }
        }
        Ok(self.written)
    }
}
