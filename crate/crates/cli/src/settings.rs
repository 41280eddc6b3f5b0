use std::path::{Path, PathBuf};

use clap::Args;
use navsynth::controller::{ControllerConfig, PolicySpec, ReasonerSpec, ReasoningSchedule, DEFAULT_MAX_STEPS};
use navsynth::dataset::{SegmentConfig, DEFAULT_SEG_LEN};
use navsynth::env::MapGenSpec;
use navsynth::memory::DEFAULT_MAX_LANDMARKS;
use navsynth::metrics::{TimeModel, DEFAULT_TAU_GRID};
use navsynth::synth::StagnationConfig;
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Generated map family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MapGenSettings {
    pub count: usize,
    pub width: usize,
    pub height: usize,
    pub density: f64,
    pub targets: usize,
    pub block: usize,
    pub resolution: f64,
}

impl Default for MapGenSettings {
    fn default() -> Self {
        let d = MapGenSpec::default();
        Self { count: 10, width: d.width, height: d.height, density: d.density, targets: d.targets, block: d.block, resolution: d.resolution }
    }
}

/// Effective configuration of one invocation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Settings {
    pub seed: u64,
    /// Directory of `*.map` files. When absent maps are generated.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub maps: Option<PathBuf>,
    pub episodes: usize,
    pub min_start_distance: f64,
    pub policy: String,
    pub reasoner: String,
    /// Stagnation-triggered slow steps during rollouts.
    pub trigger: bool,
    pub schedule: ReasoningSchedule,
    pub max_steps: usize,
    pub seg_len: usize,
    pub max_landmarks: usize,
    pub tau: f64,
    pub tau_grid: Vec<f64>,
    pub jobs: usize,
    pub map_gen: MapGenSettings,
    pub stagnation: StagnationConfig,
    pub time: TimeModel<f64>,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            seed: 0,
            maps: None,
            episodes: 20,
            min_start_distance: 1.0,
            policy: "greedy:0.1".into(),
            reasoner: "stub".into(),
            trigger: true,
            schedule: ReasoningSchedule::Adaptive,
            max_steps: DEFAULT_MAX_STEPS,
            seg_len: DEFAULT_SEG_LEN,
            max_landmarks: DEFAULT_MAX_LANDMARKS,
            tau: 0.015,
            tau_grid: DEFAULT_TAU_GRID.to_vec(),
            jobs: 0,
            map_gen: MapGenSettings::default(),
            stagnation: StagnationConfig::default(),
            time: TimeModel::standard(),
        }
    }
}

/// Flags shared by every subcommand. Each one overrides the config file.
#[derive(Debug, Clone, Default, Args)]
pub struct SuiteFlags {
    /// TOML file with any subset of the settings.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Directory of ASCII map files.
    #[arg(long, global = true, conflicts_with = "map_gen")]
    pub maps: Option<PathBuf>,
    /// Generate maps instead of reading them, even if the config names a
    /// map directory.
    #[arg(long, global = true)]
    pub map_gen: bool,
    #[arg(long, global = true)]
    pub map_count: Option<usize>,
    #[arg(long, global = true)]
    pub width: Option<usize>,
    #[arg(long, global = true)]
    pub height: Option<usize>,
    #[arg(long, global = true)]
    pub density: Option<f64>,
    #[arg(long, global = true)]
    pub episodes: Option<usize>,
    /// `oracle`, `greedy[:noise]` or `stuck[:spin|shuttle|forward]`.
    #[arg(long, global = true)]
    pub policy: Option<String>,
    /// `stub` or `oracle[:horizon]`.
    #[arg(long, global = true)]
    pub reasoner: Option<String>,
    /// Disable stagnation-triggered slow steps.
    #[arg(long, global = true)]
    pub no_trigger: bool,
    #[arg(long, global = true)]
    pub seg_len: Option<usize>,
    #[arg(long, global = true)]
    pub max_landmarks: Option<usize>,
    /// Seconds per token.
    #[arg(long, global = true)]
    pub tau: Option<f64>,
    /// Comma-separated seconds-per-token values.
    #[arg(long, global = true, value_delimiter = ',', num_args = 0..)]
    pub tau_grid: Option<Vec<f64>>,
    /// Worker threads; 0 uses every core.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
}

impl Settings {
    /// Defaults, then the config file, then flags.
    pub fn resolve(flags: &SuiteFlags) -> Result<Self, CliError> {
        let mut s = match &flags.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
                toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?
            }
            None => Settings::default(),
        };
        macro_rules! set {
            ($($flag:ident => $($field:ident).+),* $(,)?) => {
                $(if let Some(v) = flags.$flag.clone() { s.$($field).+ = v; })*
            };
        }
        set!(
            seed => seed, episodes => episodes, policy => policy, reasoner => reasoner,
            seg_len => seg_len, max_landmarks => max_landmarks, tau => tau, tau_grid => tau_grid,
            jobs => jobs, map_count => map_gen.count, width => map_gen.width, height => map_gen.height,
            density => map_gen.density,
        );
        if flags.maps.is_some() {
            s.maps = flags.maps.clone();
        }
        if flags.map_gen {
            s.maps = None;
        }
        if flags.no_trigger {
            s.trigger = false;
        }
        s.validate()?;
        Ok(s)
    }

    fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        self.policy_spec()?;
        self.reasoner_spec()?;
        if let Some(dir) = &self.maps {
            if !dir.is_dir() {
                return bad(format!("map directory {} does not exist", dir.display()));
            }
        } else {
            self.map_gen_spec().validate().map_err(|e| CliError::Config(e.to_string()))?;
            if self.map_gen.count == 0 {
                return bad("map_gen.count must be positive".into());
            }
        }
        if self.episodes == 0 || self.seg_len == 0 || self.max_landmarks == 0 || self.max_steps == 0 {
            return bad("episodes, seg_len, max_landmarks and max_steps must be positive".into());
        }
        if !(self.tau.is_finite() && self.tau > 0.0) {
            return bad(format!("tau must be positive, got {}", self.tau));
        }
        if !self.stagnation.is_valid() {
            return bad("invalid stagnation settings".into());
        }
        if !self.time.is_valid() {
            return bad("time model durations must be positive".into());
        }
        if !(self.min_start_distance >= 0.0) {
            return bad("min_start_distance must be non-negative".into());
        }
        Ok(())
    }

    pub fn policy_spec(&self) -> Result<PolicySpec, CliError> {
        self.policy.parse().map_err(CliError::Config)
    }

    pub fn reasoner_spec(&self) -> Result<ReasonerSpec, CliError> {
        self.reasoner.parse().map_err(CliError::Config)
    }

    pub fn map_gen_spec(&self) -> MapGenSpec {
        let g = &self.map_gen;
        MapGenSpec {
            width: g.width,
            height: g.height,
            density: g.density,
            resolution: g.resolution,
            targets: g.targets,
            block: g.block,
            seed: self.seed,
        }
    }

    pub fn controller(&self) -> ControllerConfig {
        ControllerConfig {
            max_steps: self.max_steps,
            max_landmarks: self.max_landmarks,
            schedule: self.schedule,
            ..ControllerConfig::default()
        }
    }

    pub fn segments(&self) -> SegmentConfig {
        SegmentConfig { seg_len: self.seg_len, max_landmarks: self.max_landmarks }
    }

    pub fn time_model(&self) -> TimeModel<f64> {
        self.time.with_tau(self.tau)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("settings serialize to TOML")
    }
}

pub fn out_dir(flags: &SuiteFlags) -> Result<&Path, CliError> {
    flags.out.as_deref().ok_or_else(|| CliError::Usage("--out is required".into()))
}
