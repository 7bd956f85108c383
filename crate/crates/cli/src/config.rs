//! Run configuration: TOML file, `QSOLITON_OUTPUT_DIR`, then `--section.key value`
//! overrides, applied in that order on top of the built-in defaults.

use std::path::{Path, PathBuf};

use qsoliton_core::{PhysicsParams, SolitonSpec};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

pub const OUTPUT_DIR_ENV: &str = "QSOLITON_OUTPUT_DIR";

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub grid: GridConfig,
    pub soliton: SolitonConfig,
    pub physics: PhysicsConfig,
    pub run: RunSection,
    pub filters: FilterConfig,
    pub optimize: OptimizeConfig,
    pub sweep: SweepConfig,
    pub output: OutputConfig,
    pub oracle: OracleConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    #[serde(rename = "M")]
    pub sites: usize,
    /// Box length in units of the soliton width `x0`.
    #[serde(rename = "L")]
    pub length: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolitonConfig {
    pub order: u32,
    /// Photon number of the fundamental soliton; order `N` carries `N^2 n1`.
    pub n1: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhysicsConfig {
    /// Sign of the dispersion constant. The Kerr sign follows it so the
    /// bright-soliton condition always holds.
    pub omega2_sign: i32,
    pub gamma_td: f64,
    /// `false` switches the nonlinearity off: the `n1 -> infinity` limit
    /// with the initial amplitudes kept.
    pub kerr: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub t_end_td: f64,
    /// Fixed RK4 step; the stability-based default is used when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dt_td: Option<f64>,
    pub snapshot_times_td: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterConfig {
    /// Half-width of the position-domain square filters, in `x0`.
    pub dx_width: f64,
    /// Half-width of the frequency-domain square filters, in `1 / x0`.
    pub domega_width: f64,
    /// Filters tile `[-x_window, x_window]`.
    pub x_window: f64,
    /// Filters tile `[-omega_window, omega_window]`.
    pub omega_window: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizeConfig {
    pub enable: bool,
    pub min_width: usize,
    /// Candidate filters must pass more than this fraction of all photons.
    pub min_mass_fraction: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub enable: bool,
    pub t_end_td: f64,
    pub step_td: f64,
    pub orders: Vec<u32>,
    pub gammas_td: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub directory: PathBuf,
    /// Any of `csv`, `eta`, `snapshots`.
    pub formats: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleConfig {
    pub sites: usize,
    /// Mean photon number per site of the coherent input.
    pub occupation: f64,
    /// Final accumulated on-site phase `|chi_L| t`.
    pub kerr_phase_end: f64,
    /// Samples with `|chi_L| t` up to this value must agree within `tolerance`.
    pub controlled_window: f64,
    pub tolerance: f64,
    /// Damping rate in units of `|chi_L|`.
    pub gamma: f64,
    pub samples: usize,
    pub cutoff: usize,
}

pub const FORMATS: [&str; 3] = ["csv", "eta", "snapshots"];


impl Default for GridConfig {
    fn default() -> Self {
        GridConfig { sites: 512, length: 16.0 }
    }
}

impl Default for SolitonConfig {
    fn default() -> Self {
        SolitonConfig { order: 2, n1: 2e9 }
    }
}

impl Default for PhysicsConfig {
    fn default() -> Self {
        PhysicsConfig { omega2_sign: 1, gamma_td: 0.0, kerr: true }
    }
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection { t_end_td: 0.8, dt_td: None, snapshot_times_td: vec![0.0, 0.2, 0.4, 0.6, 0.8] }
    }
}

impl Default for FilterConfig {
    fn default() -> Self {
        FilterConfig { dx_width: 0.05, domega_width: 0.25, x_window: 4.0, omega_window: 4.0 }
    }
}

impl Default for OptimizeConfig {
    fn default() -> Self {
        OptimizeConfig { enable: true, min_width: 1, min_mass_fraction: 1e-6 }
    }
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig { enable: false, t_end_td: 5.0, step_td: 0.1, orders: vec![1, 2], gammas_td: vec![0.0, 0.03] }
    }
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { directory: PathBuf::from("qsoliton-out"), formats: FORMATS.iter().map(|s| s.to_string()).collect() }
    }
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig {
            sites: 2,
            occupation: 0.5,
            kerr_phase_end: 0.1,
            controlled_window: 0.02,
            tolerance: 1e-3,
            gamma: 0.0,
            samples: 10,
            cutoff: 12,
        }
    }
}

fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

fn finite(name: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(config_err(format!("{name} must be finite, got {v}")))
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    finite(name, v)?;
    if v > 0.0 {
        Ok(())
    } else {
        Err(config_err(format!("{name} must be positive, got {v}")))
    }
}

fn non_negative(name: &str, v: f64) -> Result<()> {
    finite(name, v)?;
    if v >= 0.0 {
        Ok(())
    } else {
        Err(config_err(format!("{name} must be non-negative, got {v}")))
    }
}

impl RunConfig {
    /// Defaults, then `file`, then the output-directory variable, then `overrides`.
    pub fn load(file: Option<&Path>, env_output: Option<String>, overrides: &[(String, String)]) -> Result<RunConfig> {
        let mut table = match file {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| config_err(format!("cannot read config {}: {e}", path.display())))?;
                text.parse::<toml::Table>()
                    .map_err(|e| config_err(format!("{}: {e}", path.display())))?
            }
            None => toml::Table::new(),
        };
        if let Some(dir) = env_output.filter(|d| !d.is_empty()) {
            set_path(&mut table, "output.directory", toml::Value::String(dir))?;
        }
        for (path, raw) in overrides {
            set_path(&mut table, path, parse_value(raw))?;
        }
        let cfg: RunConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| config_err(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.grid.sites == 0 {
            return Err(config_err("grid.M must be at least 1"));
        }
        positive("grid.L", self.grid.length)?;
        if self.soliton.order == 0 {
            return Err(config_err("soliton.order must be at least 1"));
        }
        positive("soliton.n1", self.soliton.n1)?;
        if self.physics.omega2_sign.abs() != 1 {
            return Err(config_err(format!("physics.omega2_sign must be +1 or -1, got {}", self.physics.omega2_sign)));
        }
        non_negative("physics.gamma_td", self.physics.gamma_td)?;

        non_negative("run.t_end_td", self.run.t_end_td)?;
        if let Some(dt) = self.run.dt_td {
            positive("run.dt_td", dt)?;
        }
        check_times("run.snapshot_times_td", &self.run.snapshot_times_td, self.run.t_end_td)?;

        positive("filters.dx_width", self.filters.dx_width)?;
        positive("filters.domega_width", self.filters.domega_width)?;
        if !(self.filters.x_window >= self.filters.dx_width) || !self.filters.x_window.is_finite() {
            return Err(config_err("filters.x_window must be finite and at least filters.dx_width"));
        }
        if !(self.filters.omega_window >= self.filters.domega_width) || !self.filters.omega_window.is_finite() {
            return Err(config_err("filters.omega_window must be finite and at least filters.domega_width"));
        }

        if self.optimize.min_width == 0 {
            return Err(config_err("optimize.min_width must be at least 1"));
        }
        non_negative("optimize.min_mass_fraction", self.optimize.min_mass_fraction)?;
        if self.optimize.min_mass_fraction >= 1.0 {
            return Err(config_err("optimize.min_mass_fraction must be below 1"));
        }

        non_negative("sweep.t_end_td", self.sweep.t_end_td)?;
        positive("sweep.step_td", self.sweep.step_td)?;
        if self.sweep.orders.is_empty() || self.sweep.orders.contains(&0) {
            return Err(config_err("sweep.orders must be a non-empty list of orders >= 1"));
        }
        if self.sweep.gammas_td.is_empty() {
            return Err(config_err("sweep.gammas_td must not be empty"));
        }
        for &g in &self.sweep.gammas_td {
            non_negative("sweep.gammas_td entry", g)?;
        }

        for f in &self.output.formats {
            if !FORMATS.contains(&f.as_str()) {
                return Err(config_err(format!("unknown output format {f:?}; expected one of {FORMATS:?}")));
            }
        }

        let o = &self.oracle;
        if !(1..=2).contains(&o.sites) {
            return Err(config_err(format!("oracle.sites must be 1 or 2, got {}", o.sites)));
        }
        positive("oracle.occupation", o.occupation)?;
        if o.occupation > 1.0 {
            return Err(config_err(format!("oracle.occupation must be at most 1, got {}", o.occupation)));
        }
        positive("oracle.kerr_phase_end", o.kerr_phase_end)?;
        non_negative("oracle.controlled_window", o.controlled_window)?;
        positive("oracle.tolerance", o.tolerance)?;
        non_negative("oracle.gamma", o.gamma)?;
        if o.samples == 0 {
            return Err(config_err("oracle.samples must be at least 1"));
        }
        if o.cutoff == 0 {
            return Err(config_err("oracle.cutoff must be at least 1"));
        }
        Ok(())
    }

    pub fn wants(&self, format: &str) -> bool {
        self.output.formats.iter().any(|f| f == format)
    }

    /// Dispersion constant, Kerr constant and damping rate in soliton units
    /// (`x0 = 1`, so `t_d = 1 / |omega2| = 1`).
    pub fn physics_params(&self) -> Result<PhysicsParams> {
        let sign = f64::from(self.physics.omega2_sign);
        let chi = if self.physics.kerr { -sign * 2.0 / self.soliton.n1 } else { 0.0 };
        Ok(PhysicsParams { omega2: sign, chi, gamma: self.physics.gamma_td }.validated()?)
    }

    pub fn soliton_spec(&self, order: u32) -> Result<SolitonSpec> {
        Ok(SolitonSpec::new(order, self.soliton.n1)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run configuration serializes to TOML")
    }

    /// SHA-256 of the resolved configuration in canonical TOML form.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_toml().as_bytes()))
    }
}

fn check_times(name: &str, times: &[f64], t_end: f64) -> Result<()> {
    for &t in times {
        finite(name, t)?;
        if !(0.0..=t_end).contains(&t) {
            return Err(config_err(format!("{name}: {t} lies outside [0, {t_end}]")));
        }
    }
    if times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(config_err(format!("{name} must be strictly increasing")));
    }
    Ok(())
}

/// TOML literal if it parses as one (`512`, `true`, `[0, 0.5]`), else a bare string.
fn parse_value(raw: &str) -> toml::Value {
    format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

fn set_path(table: &mut toml::Table, path: &str, value: toml::Value) -> Result<()> {
    let parts: Vec<&str> = path.split('.').collect();
    if parts.len() < 2 || parts.iter().any(|p| p.is_empty()) {
        return Err(config_err(format!("override {path:?} must look like section.key")));
    }
    let (last, sections) = parts.split_last().expect("at least two parts");
    let mut cursor = table;
    for s in sections {
        cursor = cursor
            .entry(s.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()))
            .as_table_mut()
            .ok_or_else(|| config_err(format!("{s} in {path:?} is not a section")))?;
    }
    cursor.insert(last.to_string(), value);
    Ok(())
}

/// Pull `--section.key value` and `--section.key=value` pairs out of `args`,
/// returning the remaining arguments and the overrides in order.
pub fn split_overrides(args: Vec<String>) -> Result<(Vec<String>, Vec<(String, String)>)> {
    let mut rest = Vec::with_capacity(args.len());
    let mut overrides = Vec::new();
    let mut it = args.into_iter();
    while let Some(arg) = it.next() {
        let Some(flag) = arg.strip_prefix("--").filter(|f| f.contains('.')) else {
            rest.push(arg);
            continue;
        };
        if let Some((path, value)) = flag.split_once('=') {
            overrides.push((path.to_string(), value.to_string()));
        } else {
            let value = it.next().ok_or_else(|| config_err(format!("--{flag} needs a value")))?;
            overrides.push((flag.to_string(), value));
        }
    }
    Ok((rest, overrides))
}
