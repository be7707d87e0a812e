//! Run configuration: TOML file, command-line overrides, validation, and the resolved echo.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use ribc::experiments::{ExperimentConfig, InitialState, DEFAULT_EPS_EQ, DEFAULT_MAX_STEPS};
use ribc::interaction::InteractionModel;
use ribc::io::Format;
use ribc::state::ConfidenceProfile;
use serde::{Deserialize, Serialize};

/// Environment variable naming the output directory used when neither the file nor `--out`
/// sets one.
pub const OUT_DIR_ENV: &str = "RIBC_OUT_DIR";
pub const DEFAULT_OUT_DIR: &str = "ribc-out";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Simulate,
    Cibc,
    Bounds,
    Montecarlo,
    Verify,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    #[default]
    Desk,
    Full,
}

fn default_d() -> usize {
    1
}
fn default_eps() -> f64 {
    DEFAULT_EPS_EQ
}
fn default_trials() -> u64 {
    1
}
fn default_max_steps() -> u64 {
    DEFAULT_MAX_STEPS
}
fn default_decimate() -> u64 {
    1
}
fn default_init() -> InitialState {
    InitialState::UniformBall
}

/// Everything a run needs. Unknown keys are rejected.
///
/// `n`, `r` and `model` are required by every mode except `verify`. Agent indices in all
/// output files are 0-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub mode: Mode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default = "default_d")]
    pub d: usize,
    /// Confidence bounds, nonincreasing.
    #[serde(default, alias = "bounds", skip_serializing_if = "Option::is_none")]
    pub r: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<InteractionModel>,
    #[serde(default = "default_init")]
    pub init: InitialState,
    /// Opinion equality tolerance for random runs; controlled runs always use exact equality.
    #[serde(default = "default_eps")]
    pub eps_eq: f64,
    #[serde(default = "default_trials")]
    pub trials: u64,
    #[serde(default = "default_max_steps")]
    pub max_steps: u64,
    #[serde(default)]
    pub seed: u64,
    /// Keep every k-th state of each trial.
    #[serde(default = "default_decimate")]
    pub decimate: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub format: Format,
    /// Extra agent counts for the bound table.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub table_n: Vec<usize>,
    /// Extra smallest bounds for the bound table.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub table_r_n: Vec<f64>,
    #[serde(default)]
    pub scale: Scale,
}

impl RunConfig {
    pub fn new(mode: Mode) -> Self {
        Self {
            mode,
            n: None,
            d: default_d(),
            r: None,
            model: None,
            init: default_init(),
            eps_eq: default_eps(),
            trials: default_trials(),
            max_steps: default_max_steps(),
            seed: 0,
            decimate: default_decimate(),
            out: None,
            format: Format::Csv,
            table_n: Vec::new(),
            table_r_n: Vec::new(),
            scale: Scale::Desk,
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_toml(&text).with_context(|| format!("parsing {}", path.display()))
    }

    /// The resolved configuration as TOML, with every default written out.
    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    /// Fills the output directory from the environment or the built-in default.
    pub fn resolve_out(&mut self, env: Option<String>) {
        if self.out.is_none() {
            self.out = Some(PathBuf::from(env.unwrap_or_else(|| DEFAULT_OUT_DIR.to_string())));
        }
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR))
    }

    fn require<'a, T>(&self, field: &'a Option<T>, name: &str) -> Result<&'a T> {
        field.as_ref().ok_or_else(|| anyhow!("{name}: required in {:?} mode", self.mode))
    }

    /// Field-level checks for the selected mode.
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            bail!("trials: must be at least 1");
        }
        if self.max_steps == 0 {
            bail!("max_steps: must be at least 1");
        }
        if self.decimate == 0 {
            bail!("decimate: must be at least 1");
        }
        if !(self.eps_eq >= 0.0 && self.eps_eq.is_finite()) {
            bail!("eps_eq: must be finite and nonnegative, got {}", self.eps_eq);
        }
        if self.mode == Mode::Verify {
            return Ok(());
        }
        let n = *self.require(&self.n, "n")?;
        let r = self.require(&self.r, "r")?;
        let model = self.require(&self.model, "model")?;
        if n < 3 {
            bail!("n: at least 3 agents are required, got {n}");
        }
        if self.d == 0 {
            bail!("d: opinion dimension must be at least 1");
        }
        if r.len() != n {
            bail!("r: expected {n} confidence bounds, got {}", r.len());
        }
        ConfidenceProfile::new(r.clone()).map_err(|e| anyhow!("r: {e}"))?;
        model.validate(n).map_err(|e| anyhow!("model: {e}"))?;
        match self.mode {
            Mode::Bounds => {
                let r_n = r[n - 1];
                if !(r_n < 2.0) {
                    bail!("r: the bound table needs the smallest bound below 2, got {r_n}");
                }
                if let Some(bad) = self.table_n.iter().find(|&&k| k < 3) {
                    bail!("table_n: agent counts must be at least 3, got {bad}");
                }
                if let Some(bad) = self.table_r_n.iter().find(|&&v| !(v > 0.0 && v < 2.0)) {
                    bail!("table_r_n: smallest bounds must lie in (0, 2), got {bad}");
                }
                if !self.table_n.is_empty() && matches!(model, InteractionModel::PairMatrix { .. }) {
                    bail!("table_n: a pair-probability matrix fixes the agent count; use erdos-renyi or uniform-subset");
                }
            }
            Mode::Simulate | Mode::Montecarlo | Mode::Cibc => {
                self.experiment().validate().map_err(|e| anyhow!("{}: {e}", self.blame(&e)))?;
            }
            Mode::Verify => unreachable!(),
        }
        if self.mode == Mode::Cibc {
            let r_n = r[n - 1];
            if !(r_n < 2.0) {
                bail!("r: controlled runs need the smallest bound below 2, got {r_n}");
            }
            if matches!(self.init, InitialState::Counterexample) {
                bail!("init: the isolated-agent state never merges; use explicit or uniform-ball");
            }
        }
        Ok(())
    }

    fn blame(&self, e: &ribc::Error) -> &'static str {
        use ribc::Error::*;
        match e {
            DimensionMismatch { .. } | AgentCountMismatch { .. } | EmptyState | NonFiniteOpinion { .. } => "init",
            Domain(msg) if msg.contains("first bound") => "init",
            _ => "config",
        }
    }

    /// The experiment described by a validated config.
    pub fn experiment(&self) -> ExperimentConfig {
        let r = self.r.clone().unwrap_or_default();
        let mut cfg = ExperimentConfig::new(
            r,
            self.d,
            self.init.clone(),
            self.model.clone().unwrap_or(InteractionModel::UniformSubset),
        );
        cfg.n = self.n.unwrap_or(cfg.n);
        cfg.eps_eq = self.eps_eq;
        cfg.trials = self.trials;
        cfg.max_steps = self.max_steps;
        cfg.master_seed = self.seed;
        cfg.decimate = Some(self.decimate);
        cfg
    }
}

/// Command-line values that override the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub trials: Option<u64>,
    pub max_steps: Option<u64>,
    pub out: Option<PathBuf>,
    pub format: Option<Format>,
    pub decimate: Option<u64>,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut RunConfig) {
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.trials {
            cfg.trials = v;
        }
        if let Some(v) = self.max_steps {
            cfg.max_steps = v;
        }
        if let Some(v) = &self.out {
            cfg.out = Some(v.clone());
        }
        if let Some(v) = self.format {
            cfg.format = v;
        }
        if let Some(v) = self.decimate {
            cfg.decimate = v;
        }
    }
}

/// Loads the file (if any), applies the verb and flag overrides, fills the output directory,
/// and validates.
pub fn parse_config(mode: Mode, path: Option<&Path>, overrides: &Overrides, env_out: Option<String>) -> Result<RunConfig> {
    let mut cfg = match path {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::new(mode),
    };
    cfg.mode = mode;
    overrides.apply(&mut cfg);
    cfg.resolve_out(env_out);
    cfg.validate()?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
mode = "simulate"
n = 3
d = 1
r = [0.7, 0.7, 0.7]
model = { kind = "erdos-renyi", p = 0.5 }
"#;

    #[test]
    fn minimal_config_gets_defaults() {
        let cfg = RunConfig::from_toml(MINIMAL).unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.trials, 1);
        assert_eq!(cfg.max_steps, 100_000);
        assert_eq!(cfg.eps_eq, 1e-9);
        assert!(cfg.to_toml().unwrap().contains("eps_eq = "));
        let echo = cfg.to_toml().unwrap();
        for key in ["trials = 1", "max_steps = 100000", "seed = 0", "decimate = 1", "format = \"csv\""] {
            assert!(echo.contains(key), "{key} missing from\n{echo}");
        }
    }

    #[test]
    fn echo_is_lossless() {
        let mut cfg = RunConfig::from_toml(MINIMAL).unwrap();
        cfg.resolve_out(None);
        let again = RunConfig::from_toml(&cfg.to_toml().unwrap()).unwrap();
        assert_eq!(again, cfg);
        let mut cfg = cfg;
        cfg.init = InitialState::Explicit { opinions: vec![vec![0.1], vec![0.2], vec![1.0 / 3.0]] };
        cfg.model = Some(InteractionModel::PairMatrix { matrix: vec![vec![0.25; 3]; 3] });
        cfg.table_r_n = vec![0.1, 1.9];
        assert_eq!(RunConfig::from_toml(&cfg.to_toml().unwrap()).unwrap(), cfg);
    }

    #[test]
    fn unsorted_bounds_rejected() {
        let text = MINIMAL.replace("[0.7, 0.7, 0.7]", "[0.5, 0.7, 0.3]");
        let err = RunConfig::from_toml(&text).unwrap().validate().unwrap_err();
        assert!(err.to_string().contains("confidence bounds must be nonincreasing"), "{err}");
        assert!(err.to_string().starts_with("r:"));
    }

    #[test]
    fn degenerate_probability_rejected() {
        let text = MINIMAL.replace("p = 0.5", "p = 1.0");
        let err = RunConfig::from_toml(&text).unwrap().validate().unwrap_err().to_string();
        assert!(err.starts_with("model:") && err.contains("strictly between 0 and 1"), "{err}");
    }

    #[test]
    fn unknown_keys_rejected() {
        let text = format!("{MINIMAL}\ntrails = 5\n");
        let err = RunConfig::from_toml(&text).unwrap_err();
        assert!(format!("{err:#}").contains("trails"), "{err:#}");
    }

    #[test]
    fn bounds_alias() {
        let text = MINIMAL.replace("r = ", "bounds = ");
        assert_eq!(RunConfig::from_toml(&text).unwrap().r, Some(vec![0.7; 3]));
    }

    #[test]
    fn flags_override_file_and_env_fills_out() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        std::fs::write(&path, MINIMAL.replace("mode = \"simulate\"\n", "mode = \"simulate\"\nseed = 4\n")).unwrap();
        let ov = Overrides { seed: Some(9), trials: Some(7), format: Some(Format::Json), ..Default::default() };
        let cfg = parse_config(Mode::Montecarlo, Some(&path), &ov, Some("/tmp/x".into())).unwrap();
        assert_eq!((cfg.mode, cfg.seed, cfg.trials, cfg.format), (Mode::Montecarlo, 9, 7, Format::Json));
        assert_eq!(cfg.out, Some(PathBuf::from("/tmp/x")));
        let ov = Overrides { out: Some("here".into()), ..Default::default() };
        let cfg = parse_config(Mode::Simulate, Some(&path), &ov, Some("/tmp/x".into())).unwrap();
        assert_eq!(cfg.out, Some(PathBuf::from("here")));
    }

    #[test]
    fn missing_fields_named() {
        let err = RunConfig::from_toml("mode = \"simulate\"\nn = 3\n").unwrap().validate().unwrap_err();
        assert!(err.to_string().starts_with("r:"), "{err}");
        assert!(RunConfig::new(Mode::Verify).validate().is_ok());
    }

    #[test]
    fn explicit_init_checked() {
        let text = format!("{MINIMAL}init = {{ kind = \"explicit\", opinions = [[0.0], [1.0]] }}\n");
        let err = RunConfig::from_toml(&text).unwrap().validate().unwrap_err().to_string();
        assert!(err.starts_with("init:"), "{err}");
    }
}
