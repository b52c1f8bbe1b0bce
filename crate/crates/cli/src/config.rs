//! Run configuration: TOML file, then `SIDEBAND_*` environment overrides,
//! then command line flags.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sideband_core::{Cavity, Coupling, GridSpec, NoiseModel};

pub const ENV_PREFIX: &str = "SIDEBAND_";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Vacuum,
    Psi1,
    Psi2,
    Rho,
    RhoR,
    /// Canonical homodyne look-alike of `rho`.
    Mimic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PreparationConfig {
    pub stage: Stage,
    pub beta_re: f64,
    pub beta_im: f64,
    pub kappa: f64,
    pub beta0_sq: f64,
}

impl Default for PreparationConfig {
    fn default() -> Self {
        PreparationConfig {
            stage: Stage::Rho,
            beta_re: 2.0,
            beta_im: 0.0,
            kappa: 10.0 / 19.0,
            beta0_sq: 16.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CavityConfig {
    pub r0_intensity: f64,
    pub coupling: Coupling,
    pub eta: f64,
    /// Must equal the top-level `gamma_mhz` when given.
    pub bandwidth_mhz: Option<f64>,
}

impl Default for CavityConfig {
    fn default() -> Self {
        CavityConfig {
            r0_intensity: 0.04,
            coupling: Coupling::Overcoupled,
            eta: 0.935,
            bandwidth_mhz: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseConfig {
    /// Samples per spectral estimate; absent for noiseless scans.
    pub samples_per_point: Option<usize>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub experiment: String,
    pub omega_mhz: f64,
    pub gamma_mhz: f64,
    pub visibility: f64,
    pub output_dir: PathBuf,
    pub preparation: PreparationConfig,
    pub cavity: CavityConfig,
    pub phase_grid: GridSpec,
    pub detuning_grid: GridSpec,
    pub noise: NoiseConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            experiment: "benchmark".into(),
            omega_mhz: 17.0,
            gamma_mhz: 6.0,
            visibility: 1.0,
            output_dir: PathBuf::from("out"),
            preparation: PreparationConfig::default(),
            cavity: CavityConfig::default(),
            phase_grid: GridSpec::new(0.0, std::f64::consts::PI, 100),
            detuning_grid: GridSpec::default_detuning(),
            noise: NoiseConfig::default(),
        }
    }
}

/// Every settable key, as dotted paths.
pub const KEYS: &[&str] = &[
    "experiment",
    "omega_mhz",
    "gamma_mhz",
    "visibility",
    "output_dir",
    "preparation.stage",
    "preparation.beta_re",
    "preparation.beta_im",
    "preparation.kappa",
    "preparation.beta0_sq",
    "cavity.r0_intensity",
    "cavity.coupling",
    "cavity.eta",
    "cavity.bandwidth_mhz",
    "phase_grid.start",
    "phase_grid.stop",
    "phase_grid.count",
    "detuning_grid.start",
    "detuning_grid.stop",
    "detuning_grid.count",
    "noise.samples_per_point",
    "noise.seed",
];

/// `preparation.beta0_sq` -> `SIDEBAND_PREPARATION_BETA0_SQ`.
pub fn env_name(key: &str) -> String {
    format!("{ENV_PREFIX}{}", key.replace('.', "_").to_uppercase())
}

/// Interprets an environment value as a TOML literal, falling back to a bare string.
fn parse_env_value(raw: &str) -> toml::Value {
    let doc = format!("v = {raw}");
    match doc.parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| toml::Value::String(raw.into())),
        Err(_) => toml::Value::String(raw.into()),
    }
}

fn set_path(table: &mut toml::Table, key: &str, value: toml::Value) -> Result<(), String> {
    let mut parts: Vec<&str> = key.split('.').collect();
    let leaf = parts.pop().expect("non-empty key");
    let mut cur = table;
    for p in parts {
        let entry = cur
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry.as_table_mut().ok_or_else(|| format!("`{p}` must be a table"))?;
    }
    cur.insert(leaf.to_string(), value);
    Ok(())
}

fn merge(base: &mut toml::Table, over: toml::Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

/// Applies `SIDEBAND_*` variables from `vars`. Unknown names are rejected so
/// typos do not pass silently.
pub fn apply_env<I>(table: &mut toml::Table, vars: I) -> Result<(), String>
where
    I: IntoIterator<Item = (String, String)>,
{
    let mut vars: Vec<(String, String)> = vars.into_iter().filter(|(k, _)| k.starts_with(ENV_PREFIX)).collect();
    vars.sort();
    for (name, raw) in vars {
        let key = KEYS
            .iter()
            .find(|k| env_name(k) == name)
            .ok_or_else(|| format!("unknown configuration variable {name}"))?;
        set_path(table, key, parse_env_value(&raw))?;
    }
    Ok(())
}

impl RunConfig {
    /// Reads `path` (or starts from defaults), applies overrides and validates.
    pub fn load<I>(path: Option<&Path>, env: I) -> Result<Self, String>
    where
        I: IntoIterator<Item = (String, String)>,
    {
        let mut table = toml::Table::try_from(RunConfig::default()).map_err(|e| e.to_string())?;
        if let Some(p) = path {
            let text = std::fs::read_to_string(p).map_err(|e| format!("{}: {e}", p.display()))?;
            let file = text
                .parse::<toml::Table>()
                .map_err(|e| format!("{}: {e}", p.display()))?;
            merge(&mut table, file);
        }
        apply_env(&mut table, env)?;
        let config: RunConfig = RunConfig::deserialize(toml::Value::Table(table)).map_err(|e| e.to_string())?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.gamma_mhz > 0.0 && self.gamma_mhz.is_finite()) {
            return Err(format!("gamma_mhz must be > 0, got {}", self.gamma_mhz));
        }
        if !(self.omega_mhz > 0.0 && self.omega_mhz.is_finite()) {
            return Err(format!("omega_mhz must be > 0, got {}", self.omega_mhz));
        }
        if let Some(bw) = self.cavity.bandwidth_mhz {
            if (bw - self.gamma_mhz).abs() > 1e-12 * self.gamma_mhz {
                return Err(format!(
                    "cavity.bandwidth_mhz = {bw} disagrees with gamma_mhz = {}",
                    self.gamma_mhz
                ));
            }
        }
        if !(self.visibility > 0.0 && self.visibility <= 1.0) {
            return Err(format!("visibility must lie in (0, 1], got {}", self.visibility));
        }
        for (name, grid) in [("phase_grid", &self.phase_grid), ("detuning_grid", &self.detuning_grid)] {
            grid.validate(4).map_err(|e| format!("{name}: {e}"))?;
        }
        if self.noise.samples_per_point.is_some() && self.noise.seed.is_none() {
            return Err("noise.seed is required when noise.samples_per_point is set".into());
        }
        if let Some(n) = self.noise.samples_per_point {
            NoiseModel::new(n, 0).map_err(|e| format!("noise: {e}"))?;
        }
        self.analysis_cavity().map_err(|e| format!("cavity: {e}"))?;
        Ok(())
    }

    pub fn omega_over_gamma(&self) -> f64 {
        self.omega_mhz / self.gamma_mhz
    }

    pub fn analysis_cavity(&self) -> sideband_core::Result<Cavity> {
        Cavity::new(
            self.cavity.r0_intensity,
            self.gamma_mhz,
            self.cavity.coupling,
            self.cavity.eta,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lookup<'a>(table: &'a toml::Table, key: &str) -> Option<&'a toml::Value> {
        let mut parts = key.split('.');
        let mut cur = table.get(parts.next()?)?;
        for p in parts {
            cur = cur.get(p)?;
        }
        Some(cur)
    }

    fn env(pairs: &[(&str, &str)]) -> Vec<(String, String)> {
        pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
    }

    #[test]
    fn defaults_are_valid() {
        let c = RunConfig::load(None, env(&[])).unwrap();
        assert_eq!(c, RunConfig::default());
        assert!((c.omega_over_gamma() - 17.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn env_overrides() {
        let c = RunConfig::load(
            None,
            env(&[
                ("SIDEBAND_PREPARATION_KAPPA", "1.0"),
                ("SIDEBAND_PREPARATION_STAGE", "rho_r"),
                ("SIDEBAND_DETUNING_GRID_COUNT", "41"),
                ("SIDEBAND_EXPERIMENT", "trial"),
                ("HOME", "/root"),
            ]),
        )
        .unwrap();
        assert_eq!(c.preparation.kappa, 1.0);
        assert_eq!(c.preparation.stage, Stage::RhoR);
        assert_eq!(c.detuning_grid.count, 41);
        assert_eq!(c.experiment, "trial");
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(RunConfig::load(None, env(&[("SIDEBAND_KAPA", "1")])).is_err());
        assert!(RunConfig::load(None, env(&[("SIDEBAND_GAMMA_MHZ", "0")])).is_err());
        assert!(RunConfig::load(None, env(&[("SIDEBAND_PHASE_GRID_COUNT", "3")])).is_err());
        assert!(RunConfig::load(None, env(&[("SIDEBAND_NOISE_SAMPLES_PER_POINT", "200")])).is_err());
        assert!(RunConfig::load(None, env(&[("SIDEBAND_CAVITY_BANDWIDTH_MHZ", "5.0")])).is_err());
        assert!(RunConfig::load(None, env(&[("SIDEBAND_CAVITY_COUPLING", "sideways")])).is_err());
    }

    #[test]
    fn every_key_round_trips_through_env() {
        let defaults = toml::Table::try_from(RunConfig::default()).unwrap();
        for key in KEYS {
            let Some(v) = lookup(&defaults, key) else { continue };
            let raw = match v {
                toml::Value::String(s) => s.clone(),
                other => other.to_string(),
            };
            let mut t = defaults.clone();
            apply_env(&mut t, [(env_name(key), raw)]).unwrap();
            assert_eq!(t, defaults, "{key}");
        }
    }

    #[test]
    fn partial_tables_keep_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(&path, "[detuning_grid]\ncount = 81\n[cavity]\neta = 0.9\n").unwrap();
        let c = RunConfig::load(Some(&path), env(&[])).unwrap();
        assert_eq!(c.detuning_grid, GridSpec::new(-8.0, 8.0, 81));
        assert_eq!(c.cavity.eta, 0.9);
        assert_eq!(c.cavity.r0_intensity, 0.04);
        std::fs::write(&path, "[cavity]\neta = 0.9\nr0 = 1\n").unwrap();
        assert!(RunConfig::load(Some(&path), env(&[])).is_err());
    }
}
