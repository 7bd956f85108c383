//! Run manifest: configuration identity, timings and every invariant check.

use std::path::{Path, PathBuf};

use qsoliton_core::Domain;
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::Result;
use crate::format::FLOAT_FORMAT;

pub struct Tolerances;

impl Tolerances {
    /// Slack on `eta_ii <= 1` and `|eta_ij| <= 1` for rounding in the sums.
    pub const ETA_BOUND: f64 = 1e-9;
    pub const FANO_IDENTITY: f64 = 1e-12;
    pub const DOMAIN_BALANCE: f64 = 1e-10;
    pub const PHOTON_DECAY: f64 = 1e-4;
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub domain: Option<&'static str>,
    pub t: f64,
    /// Measured defect, or for certificates the eigenvalue floor certified.
    pub value: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
    pub passed: bool,
}

impl Check {
    pub fn at_most(name: &'static str, domain: Option<Domain>, t: f64, value: f64, tolerance: f64) -> Check {
        Check { name, domain: domain.map(Domain::name), t, value, tolerance: Some(tolerance), passed: value <= tolerance }
    }

    /// Pass/fail outcome of a test that certifies `value` as a lower bound.
    pub fn certificate(name: &'static str, t: f64, passed: bool, value: f64) -> Check {
        Check { name, domain: None, t, value, tolerance: None, passed }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Abort {
    pub t: f64,
    pub reason: String,
}

/// Photon-number decay of one propagation against `exp(-2 gamma t)`.
#[derive(Clone, Debug, Serialize)]
pub struct DecayRecord {
    pub run: String,
    pub gamma_td: f64,
    pub max_relative_deviation: f64,
    pub tolerance: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct Manifest {
    pub command: String,
    pub code_version: &'static str,
    pub config_sha256: String,
    pub config: RunConfig,
    pub status: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub abort: Option<Abort>,
    pub wall_time_s: f64,
    pub float_format: &'static str,
    pub dt_td: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep_horizon_td: Option<f64>,
    pub invariants_passed: bool,
    pub checks: Vec<Check>,
    pub photon_decay: Vec<DecayRecord>,
    pub warnings: Vec<String>,
    pub files: Vec<PathBuf>,
}

impl Manifest {
    pub const FILE: &'static str = "manifest.json";

    pub fn new(command: &str, cfg: &RunConfig) -> Manifest {
        Manifest {
            command: command.to_string(),
            code_version: env!("CARGO_PKG_VERSION"),
            config_sha256: cfg.hash(),
            config: cfg.clone(),
            status: "ok",
            abort: None,
            wall_time_s: 0.0,
            float_format: FLOAT_FORMAT,
            dt_td: None,
            sweep_horizon_td: None,
            invariants_passed: true,
            checks: Vec::new(),
            photon_decay: Vec::new(),
            warnings: Vec::new(),
            files: Vec::new(),
        }
    }

    pub fn push_checks(&mut self, checks: impl IntoIterator<Item = Check>) {
        for c in checks {
            self.invariants_passed &= c.passed;
            self.checks.push(c);
        }
    }

    pub fn push_decay(&mut self, record: DecayRecord) {
        self.invariants_passed &= record.passed;
        self.photon_decay.push(record);
    }

    pub fn failed_checks(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        std::fs::write(dir.join(Self::FILE), text + "\n")?;
        Ok(())
    }
}

/// Running maximum of `|n(t) / (n(0) exp(-2 gamma t)) - 1|`.
#[derive(Clone, Debug)]
pub struct DecayTracker {
    gamma: f64,
    initial: Option<f64>,
    worst: f64,
}

impl DecayTracker {
    pub fn new(gamma: f64) -> DecayTracker {
        DecayTracker { gamma, initial: None, worst: 0.0 }
    }

    pub fn observe(&mut self, t: f64, photons: f64) {
        let n0 = *self.initial.get_or_insert(photons);
        let expected = n0 * (-2.0 * self.gamma * t).exp();
        self.worst = self.worst.max((photons / expected - 1.0).abs());
    }

    pub fn record(&self, run: String, gamma_td: f64) -> DecayRecord {
        let tolerance = Tolerances::PHOTON_DECAY;
        DecayRecord { run, gamma_td, max_relative_deviation: self.worst, tolerance, passed: self.worst <= tolerance }
    }
}
