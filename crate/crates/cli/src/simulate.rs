//! Propagation runs: the snapshot pipeline and the optimized-filter sweep.

use std::path::{Path, PathBuf};
use std::time::Instant;

use qsoliton_core::{
    default_dt, evolve_with, Closure, init_nsoliton_state, snapshot, snapshot_eigen_floor, Domain, EvolveOptions, GaussianState,
    Grid, PhysicsParams,
};

use crate::analyze::{optimum_row, Analyzer, SnapshotAnalysis, SnapshotWriter, OPTIMUM_HEADER};
use crate::config::RunConfig;
use crate::error::{CliError, Result};
use crate::format::Table;
use crate::manifest::{Abort, Check, DecayTracker, Manifest};

/// A propagation set up from the configuration.
pub struct Propagation {
    pub grid: Grid,
    pub params: PhysicsParams,
    pub initial: GaussianState,
    /// Step in simulation time units.
    pub dt: f64,
    pub t_d: f64,
    pub closure: Closure,
}

impl Propagation {
    pub fn new(cfg: &RunConfig, order: u32, gamma_td: f64) -> Result<Propagation> {
        let grid = Grid::position(cfg.grid.sites, cfg.grid.length)?;
        let params = cfg.physics_params()?;
        let t_d = params.dispersion_time();
        let params = PhysicsParams { gamma: gamma_td / t_d, ..params };
        let initial = init_nsoliton_state(&grid, &cfg.soliton_spec(order)?)?;
        let dt = match cfg.run.dt_td {
            Some(dt) => dt * t_d,
            None => default_dt(&initial, &params),
        };
        Ok(Propagation { grid, params, initial, dt, t_d, closure: Closure::Gaussian })
    }

    /// Integrate to `t_end_td`, delivering the state at each of `times_td`.
    /// Under the Gaussian closure every delivered state has passed the
    /// positivity check, recorded in the entry handed to `visit` with it.
    pub fn run<F>(&self, t_end_td: f64, times_td: &[f64], mut visit: F) -> Result<GaussianState>
    where
        F: FnMut(&GaussianState, Check) -> Result<()>,
    {
        let times: Vec<f64> = times_td.iter().map(|t| t * self.t_d).collect();
        let mut failure: Option<CliError> = None;
        let opts = EvolveOptions { closure: self.closure, ..EvolveOptions::new(self.dt) };
        let result = evolve_with(&self.initial, &self.params, t_end_td * self.t_d, &times, opts, |s| {
            let check = Check::certificate("physicality", s.t / self.t_d, true, snapshot_eigen_floor(s));
            visit(s, check).map_err(|e| {
                failure = Some(e);
                qsoliton_core::Error::Contract("snapshot visitor failed".into())
            })
        });
        match (result, failure) {
            (_, Some(e)) => Err(e),
            (r, None) => Ok(r?),
        }
    }
}

fn record_abort(manifest: &mut Manifest, err: &CliError) {
    if let CliError::Abort { t, reason } = err {
        manifest.status = "numerical_abort";
        manifest.abort = Some(Abort { t: *t, reason: reason.clone() });
    } else {
        manifest.status = "error";
        manifest.warnings.push(err.to_string());
    }
}

/// Finish timing and status, write the manifest, and hand back the outcome.
fn finalize(mut manifest: Manifest, dir: &Path, started: Instant, outcome: Result<()>) -> Result<Manifest> {
    manifest.wall_time_s = started.elapsed().as_secs_f64();
    if let Err(e) = &outcome {
        record_abort(&mut manifest, e);
    } else if !manifest.invariants_passed {
        manifest.status = "invariant_violation";
    }
    manifest.write(dir)?;
    outcome.map(|()| manifest)
}

/// `simulate`: propagate the configured soliton, analyze each snapshot in
/// both domains, then run the optimized-filter sweep if enabled.
pub fn run_simulate(cfg: &RunConfig) -> Result<Manifest> {
    let started = Instant::now();
    let dir = cfg.output.directory.clone();
    std::fs::create_dir_all(&dir)?;
    let mut manifest = Manifest::new("simulate", cfg);
    let outcome = simulate_into(cfg, &dir, &mut manifest);
    finalize(manifest, &dir, started, outcome)
}

fn simulate_into(cfg: &RunConfig, dir: &Path, manifest: &mut Manifest) -> Result<()> {
    let prop = Propagation::new(cfg, cfg.soliton.order, cfg.physics.gamma_td)?;
    manifest.dt_td = Some(prop.dt / prop.t_d);
    let analyzer = Analyzer::new(cfg, &prop.grid)?;
    let mut writer = SnapshotWriter::new(dir, cfg.wants("csv"), cfg.wants("eta"))?;
    let mut decay = DecayTracker::new(prop.params.gamma);
    let mut snapshots = Vec::new();
    let save = cfg.wants("snapshots");

    prop.run(cfg.run.t_end_td, &cfg.run.snapshot_times_td, |s, physical| {
        let a = analyzer.analyze(s)?;
        manifest.push_checks(std::iter::once(physical).chain(a.checks.iter().cloned()));
        decay.observe(s.t, a.position.total_photons);
        writer.record(&a, prop.t_d)?;
        if save {
            let name = PathBuf::from("snapshots").join(format!("t{:04}.qsnap", snapshots.len()));
            std::fs::create_dir_all(dir.join("snapshots"))?;
            snapshot::save(&dir.join(&name), s)?;
            snapshots.push(name);
        }
        Ok(())
    })?;
    manifest.push_decay(decay.record(format!("order {}", cfg.soliton.order), cfg.physics.gamma_td));
    manifest.files.extend(writer.finish()?);
    manifest.files.extend(snapshots);

    if cfg.sweep.enable {
        manifest.sweep_horizon_td = Some(cfg.sweep.t_end_td);
        for &order in &cfg.sweep.orders {
            for &gamma_td in &cfg.sweep.gammas_td {
                let series = sweep_series(cfg, order, gamma_td)?;
                manifest.push_checks(series.checks.iter().cloned());
                manifest.push_decay(series.decay.clone());
                manifest.files.push(series.write(dir)?);
            }
        }
    }
    Ok(())
}

/// Optimized-filter measures of one domain at one sweep time.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepPoint {
    pub t_over_td: f64,
    pub domain: Domain,
    pub photons: f64,
    pub fano: Option<f64>,
    pub squeezing_db: Option<f64>,
    pub cs_d_min: Option<f64>,
    pub cs_v_norm: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct SweepSeries {
    pub order: u32,
    pub gamma_td: f64,
    pub dt_td: f64,
    pub points: Vec<SweepPoint>,
    pub checks: Vec<Check>,
    pub decay: crate::manifest::DecayRecord,
    table: String,
}

impl SweepSeries {
    pub fn in_domain(&self, domain: Domain) -> impl Iterator<Item = &SweepPoint> {
        self.points.iter().filter(move |p| p.domain == domain)
    }

    /// Strongest squeezing over the scan, `(t_over_td, dB)`.
    pub fn best_squeezing(&self, domain: Domain) -> Option<(f64, f64)> {
        self.in_domain(domain)
            .filter_map(|p| Some((p.t_over_td, p.squeezing_db?)))
            .fold(None, |best: Option<(f64, f64)>, cur| match best {
                Some(b) if b.1 >= cur.1 => Some(b),
                _ => Some(cur),
            })
    }

    /// Most negative Cauchy-Schwarz discriminant over the scan, `(t_over_td, D)`.
    pub fn min_discriminant(&self, domain: Domain) -> Option<(f64, f64)> {
        self.in_domain(domain)
            .filter_map(|p| Some((p.t_over_td, p.cs_d_min?)))
            .fold(None, |best: Option<(f64, f64)>, cur| match best {
                Some(b) if b.1 <= cur.1 => Some(b),
                _ => Some(cur),
            })
    }

    pub fn file_name(&self) -> PathBuf {
        PathBuf::from("sweep").join(format!("order{}_gamma{}.csv", self.order, self.gamma_td))
    }

    /// Write the sweep table under `dir`; returns its relative path.
    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        let name = self.file_name();
        std::fs::create_dir_all(dir.join("sweep"))?;
        std::fs::write(dir.join(&name), &self.table)?;
        Ok(name)
    }
}

pub fn sweep_times(t_end_td: f64, step_td: f64) -> Vec<f64> {
    let n = (t_end_td / step_td + 1e-9).floor() as usize;
    (0..=n).map(|i| (i as f64 * step_td).min(t_end_td)).collect()
}

/// One propagation of the sweep grid with optimized filters at every sample.
pub fn sweep_series(cfg: &RunConfig, order: u32, gamma_td: f64) -> Result<SweepSeries> {
    sweep_series_with(cfg, order, gamma_td, |_| Ok(()))
}

/// As [`sweep_series`], also handing every sampled state to `inspect`.
pub fn sweep_series_with<F>(cfg: &RunConfig, order: u32, gamma_td: f64, mut inspect: F) -> Result<SweepSeries>
where
    F: FnMut(&GaussianState) -> Result<()>,
{
    let mut cfg = cfg.clone();
    cfg.optimize.enable = true;
    let prop = Propagation::new(&cfg, order, gamma_td)?;
    let analyzer = Analyzer::new(&cfg, &prop.grid)?;
    let times = sweep_times(cfg.sweep.t_end_td, cfg.sweep.step_td);
    let mut table = optimum_table();
    let mut points = Vec::new();
    let mut checks = Vec::new();
    let mut decay = DecayTracker::new(prop.params.gamma);

    prop.run(cfg.sweep.t_end_td, &times, |s, physical| {
        inspect(s)?;
        let a: SnapshotAnalysis = analyzer.analyze(s)?;
        checks.push(physical);
        checks.extend(a.checks.iter().cloned());
        decay.observe(s.t, a.position.total_photons);
        let t = s.t / prop.t_d;
        for d in a.domains() {
            if let Some(row) = optimum_row(t, d) {
                let mut cells = vec![d.domain.name().to_string()];
                cells.extend(row);
                table.push(&cells);
            }
            let o = d.optimum.as_ref();
            points.push(SweepPoint {
                t_over_td: t,
                domain: d.domain,
                photons: d.total_photons,
                fano: o.map(|o| o.fano.fano),
                squeezing_db: o.and_then(|o| o.squeezing_db),
                cs_d_min: o.and_then(|o| o.cs.as_ref()).map(|c| c.d_min),
                cs_v_norm: o.and_then(|o| o.cs.as_ref()).and_then(|c| c.v_norm),
            });
        }
        Ok(())
    })?;
    let decay = decay.record(format!("sweep order {order}"), gamma_td);
    Ok(SweepSeries { order, gamma_td, dt_td: prop.dt / prop.t_d, points, checks, decay, table: table.into_string() })
}

/// Per-domain optimum rows, as in the snapshot `*_optimum.csv` files plus a domain column.
fn optimum_table() -> Table {
    let mut header = vec!["domain"];
    header.extend(OPTIMUM_HEADER);
    Table::new(&header)
}

/// `analyze` / `optimize`: rerun the statistics on saved snapshots.
pub fn run_reanalysis(cfg: &RunConfig, input: &Path, optimize_only: bool) -> Result<Manifest> {
    let started = Instant::now();
    let dir = cfg.output.directory.clone();
    std::fs::create_dir_all(&dir)?;
    let command = if optimize_only { "optimize" } else { "analyze" };
    let mut manifest = Manifest::new(command, cfg);
    let outcome = reanalyze_into(cfg, input, &dir, optimize_only, &mut manifest);
    finalize(manifest, &dir, started, outcome)
}

pub fn snapshot_files(input: &Path) -> Result<Vec<PathBuf>> {
    let folder = if input.join("snapshots").is_dir() { input.join("snapshots") } else { input.to_path_buf() };
    let mut files: Vec<PathBuf> = std::fs::read_dir(&folder)
        .map_err(|e| CliError::Config(format!("cannot list snapshots in {}: {e}", folder.display())))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "qsnap"))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(CliError::Config(format!("no .qsnap snapshots in {}", folder.display())));
    }
    Ok(files)
}

fn reanalyze_into(cfg: &RunConfig, input: &Path, dir: &Path, optimize_only: bool, manifest: &mut Manifest) -> Result<()> {
    let mut cfg = cfg.clone();
    if optimize_only {
        cfg.optimize.enable = true;
    }
    let t_d = cfg.physics_params()?.dispersion_time();
    let mut analyzer: Option<(Grid, Analyzer)> = None;
    let mut writer = SnapshotWriter::new(dir, true, !optimize_only && cfg.wants("eta"))?;
    let mut optimum = optimum_table();
    for path in snapshot_files(input)? {
        let s = snapshot::load(&path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        if analyzer.as_ref().is_none_or(|(g, _)| g != &s.grid) {
            analyzer = Some((s.grid.clone(), Analyzer::new(&cfg, &s.grid)?));
        }
        let a = analyzer.as_ref().expect("set above").1.analyze(&s)?;
        manifest.push_checks(std::iter::once(crate::analyze::physicality_check(&s)).chain(a.checks.iter().cloned()));
        if optimize_only {
            for d in a.domains() {
                if let Some(row) = optimum_row(s.t / t_d, d) {
                    optimum.push(&std::iter::once(d.domain.name().to_string()).chain(row).collect::<Vec<_>>());
                }
            }
        } else {
            writer.record(&a, t_d)?;
        }
    }
    if optimize_only {
        std::fs::write(dir.join("optimum.csv"), optimum.into_string())?;
        manifest.files.push(PathBuf::from("optimum.csv"));
    } else {
        manifest.files.extend(writer.finish()?);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sweep_grid_includes_both_ends() {
        let t = sweep_times(5.0, 0.1);
        assert_eq!(t.len(), 51);
        assert_eq!(t[50], 5.0);
        assert_eq!(sweep_times(0.25, 0.1).len(), 3);
    }

    #[test]
    fn optimum_table_leads_with_the_domain() {
        assert!(optimum_table().into_string().starts_with("domain,t_over_td,photon_number,lo,hi,"));
    }
}
