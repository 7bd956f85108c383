//! `classical`: mean-field evolution of the configured soliton, checked
//! against an independent split-step solver and against its own start.

use std::path::PathBuf;
use std::time::Instant;

use qsoliton_core::classical::{intensity_linf, split_step};
use qsoliton_core::Closure;

use crate::config::RunConfig;
use crate::error::Result;
use crate::format::{float, CurveCsv, Table};
use crate::manifest::Manifest;
use crate::simulate::Propagation;

/// Largest split-step size of the reference solver.
const REFERENCE_STEP: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProfileComparison {
    pub t_over_td: f64,
    /// `max |I(t) - I(0)| / max I(0)` for `I = |alpha|^2`.
    pub vs_initial: f64,
    /// Same norm against the split-step solution at `t`.
    pub vs_split_step: f64,
}

pub struct ClassicalRun {
    pub rows: Vec<ProfileComparison>,
    intensity: CurveCsv,
}

pub fn classical_run(cfg: &RunConfig) -> Result<ClassicalRun> {
    let mut prop = Propagation::new(cfg, cfg.soliton.order, cfg.physics.gamma_td)?;
    prop.closure = Closure::MeanField;
    let start: Vec<_> = prop.initial.alpha.to_vec();
    let mut rows = Vec::new();
    let mut intensity = CurveCsv::new();
    prop.run(cfg.run.t_end_td, &cfg.run.snapshot_times_td, |s, _| {
        let now: Vec<_> = s.alpha.to_vec();
        let steps = ((s.t / REFERENCE_STEP).ceil() as usize).max(1);
        let reference = split_step(&prop.grid, &prop.params, &start, s.t, steps)?;
        let t = s.t / prop.t_d;
        rows.push(ProfileComparison {
            t_over_td: t,
            vs_initial: intensity_linf(&now, &start),
            vs_split_step: intensity_linf(&now, &reference),
        });
        for (x, z) in prop.grid.coords().iter().zip(&now) {
            intensity.push(t, *x, Some(z.norm_sqr()));
        }
        Ok(())
    })?;
    Ok(ClassicalRun { rows, intensity })
}

pub fn run_classical(cfg: &RunConfig) -> Result<(Manifest, Vec<ProfileComparison>)> {
    let started = Instant::now();
    let dir = cfg.output.directory.clone();
    std::fs::create_dir_all(&dir)?;
    let mut manifest = Manifest::new("classical", cfg);
    let run = classical_run(cfg)?;
    let mut summary = Table::new(&["t_over_td", "linf_vs_initial", "linf_vs_split_step"]);
    for r in &run.rows {
        summary.push(&[float(r.t_over_td), float(r.vs_initial), float(r.vs_split_step)]);
    }
    std::fs::write(dir.join("classical_intensity.csv"), run.intensity.into_string())?;
    std::fs::write(dir.join("classical_summary.csv"), summary.into_string())?;
    manifest.files.extend(["classical_intensity.csv", "classical_summary.csv"].map(PathBuf::from));
    manifest.wall_time_s = started.elapsed().as_secs_f64();
    manifest.write(&dir)?;
    Ok((manifest, run.rows))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fundamental_soliton_is_stationary() {
        let mut cfg = RunConfig::default();
        cfg.grid.sites = 256;
        cfg.soliton.order = 1;
        cfg.run.t_end_td = 1.0;
        cfg.run.snapshot_times_td = vec![0.0, 1.0];
        let run = classical_run(&cfg).unwrap();
        assert_eq!(run.rows[0].vs_initial, 0.0);
        let end = run.rows[1];
        // Lattice dispersion differs from the continuum at order dx^2.
        assert!(end.vs_initial < 5e-3, "{end:?}");
        assert!(end.vs_split_step < 5e-3, "{end:?}");
    }
}
