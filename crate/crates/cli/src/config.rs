//! Flag and config-file handling. Every setting may come from the command
//! line or from a flat TOML file passed with `--config`; flags win.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, ValueEnum};
use mipt_core::analysis::PlateauConfig;
use mipt_core::entanglement::SplitSet;
use mipt_core::protocol::DEFAULT_STATEVECTOR_CAP;
use mipt_core::summation::PrecisionMode;
use mipt_core::sweep::{Engine, EngineOptions, TauGrid};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EngineChoice {
    Statevector,
    Freefermion,
    Both,
}

impl EngineChoice {
    pub fn engines(self) -> Vec<Engine> {
        match self {
            EngineChoice::Statevector => vec![Engine::StateVector],
            EngineChoice::Freefermion => vec![Engine::FreeFermion],
            EngineChoice::Both => vec![Engine::StateVector, Engine::FreeFermion],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Splits {
    Prefixes,
    All,
}

impl From<Splits> for SplitSet {
    fn from(s: Splits) -> Self {
        match s {
            Splits::Prefixes => SplitSet::ContiguousPrefixes,
            Splits::All => SplitSet::AllBipartitions,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CollapseMode {
    Sigma,
    Entanglement,
}

/// `start:stop:step` range, or a single value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Grid {
    spec: String,
    grid: TauGrid,
}

impl Grid {
    pub fn values(&self) -> &[f64] {
        self.grid.values()
    }

    pub fn tau_grid(&self) -> &TauGrid {
        &self.grid
    }
}

impl FromStr for Grid {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let grid: TauGrid = s.parse().map_err(|e| format!("bad grid '{s}': {e}"))?;
        Ok(Grid {
            spec: s.to_string(),
            grid,
        })
    }
}

impl TryFrom<String> for Grid {
    type Error = String;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<Grid> for String {
    fn from(g: Grid) -> String {
        g.spec
    }
}

impl fmt::Display for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.spec)
    }
}

/// Flags shared by every subcommand.
#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Common {
    /// Chain lengths, comma separated.
    #[arg(long = "L", value_delimiter = ',')]
    #[serde(rename = "L")]
    pub l: Option<Vec<usize>>,
    /// Transverse field h.
    #[arg(long)]
    pub h: Option<f64>,
    /// Measurement periods as start:stop:step (inclusive) or a single value.
    #[arg(long)]
    pub tau_grid: Option<Grid>,
    /// Number of measurement steps.
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long, value_enum)]
    pub engine: Option<EngineChoice>,
    /// standard | compensated | extended
    #[arg(long)]
    pub precision: Option<PrecisionMode>,
    /// Output file; stdout if omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    pub threads: Option<usize>,
    /// Largest chain the state-vector engine accepts.
    #[arg(long)]
    pub cap: Option<usize>,
    /// Chebyshev truncation tolerance.
    #[arg(long)]
    pub plan_tolerance: Option<f64>,
    /// Seed for randomized checks.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Plateau search starts at this step.
    #[arg(long)]
    pub n_min: Option<usize>,
    /// Plateau window length.
    #[arg(long)]
    pub window: Option<usize>,
    /// Plateau flatness threshold.
    #[arg(long)]
    pub delta: Option<f64>,
    /// Entanglement block sizes, comma separated (default L/4).
    #[arg(long, value_delimiter = ',')]
    pub blocks: Option<Vec<usize>>,
    /// Report a single step instead of the whole series.
    #[arg(long)]
    pub snapshot: Option<usize>,
    #[arg(long, value_enum)]
    pub splits: Option<Splits>,
    /// Add sigma = tau sqrt(L) columns.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub sigma: Option<bool>,
    #[arg(long, value_enum)]
    pub kind: Option<CollapseMode>,
    /// sigma grid for the sigma collapse, start:stop:step.
    #[arg(long)]
    pub sigma_grid: Option<Grid>,
    /// tau_c candidates for the entanglement collapse.
    #[arg(long)]
    pub tau_c: Option<Grid>,
    /// Exponent candidates for the entanglement collapse.
    #[arg(long)]
    pub mu: Option<Grid>,
    /// Resampling points for the collapse-quality measure.
    #[arg(long)]
    pub grid_points: Option<usize>,
    /// TOML file supplying defaults for any of these flags.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

macro_rules! overlay {
    ($dst:ident, $src:ident; $($f:ident),* $(,)?) => {
        $( if $dst.$f.is_none() { $dst.$f = $src.$f; } )*
    };
}

impl Common {
    /// Fills unset flags from the config file, if one was given.
    pub fn with_file(mut self) -> Result<Self, CliError> {
        let Some(path) = self.config.clone() else {
            return Ok(self);
        };
        let file = read_file(&path)?;
        overlay!(self, file; l, h, tau_grid, steps, engine, precision, out, format, threads, cap,
            plan_tolerance, seed, n_min, window, delta, blocks, snapshot, splits, sigma, kind,
            sigma_grid, tau_c, mu, grid_points);
        Ok(self)
    }
}

fn read_file(path: &Path) -> Result<Common, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

/// Fully resolved settings, recorded verbatim in the output header.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub command: &'static str,
    #[serde(rename = "L")]
    pub l: Vec<usize>,
    pub h: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau_grid: Option<Grid>,
    pub steps: usize,
    pub engine: EngineChoice,
    pub precision: PrecisionMode,
    pub plan_tolerance: f64,
    pub cap: usize,
    pub format: Format,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub plateau: Option<PlateauConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub blocks: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub snapshot: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub splits: Option<Splits>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kind: Option<CollapseMode>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma_grid: Option<Grid>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau_c: Option<Grid>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mu: Option<Grid>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid_points: Option<usize>,
}

/// Per-command defaults for the shared settings.
pub struct Defaults {
    pub command: &'static str,
    pub l: &'static [usize],
    pub tau_grid: Option<&'static str>,
    pub steps: usize,
    pub engine: EngineChoice,
}

impl RunConfig {
    pub fn resolve(c: &Common, d: &Defaults) -> Result<Self, CliError> {
        let l = c.l.clone().unwrap_or_else(|| d.l.to_vec());
        if l.is_empty() {
            return Err(CliError::Config("--L needs at least one chain length".into()));
        }
        let tau_grid = match (&c.tau_grid, d.tau_grid) {
            (Some(g), _) => Some(g.clone()),
            (None, Some(s)) => Some(s.parse().map_err(CliError::Config)?),
            (None, None) => None,
        };
        let steps = c.steps.unwrap_or(d.steps);
        if steps == 0 {
            return Err(CliError::Config("--steps must be positive".into()));
        }
        let h = c.h.unwrap_or(0.5);
        if !h.is_finite() || h < 0.0 {
            return Err(CliError::Config(format!("--h must be finite and non-negative, got {h}")));
        }
        let engine = c.engine.unwrap_or(d.engine);
        let cap = c.cap.unwrap_or(DEFAULT_STATEVECTOR_CAP);
        if engine != EngineChoice::Freefermion {
            if let Some(&big) = l.iter().find(|&&x| x > cap) {
                return Err(CliError::Config(format!(
                    "L = {big} exceeds the state-vector cap of {cap}; use --engine freefermion or raise --cap"
                )));
            }
        }
        if engine != EngineChoice::Statevector {
            if let Some(&odd) = l.iter().find(|&&x| x % 2 == 1) {
                return Err(CliError::Config(format!(
                    "the free-fermion engine needs even L, got {odd}"
                )));
            }
        }
        Ok(RunConfig {
            command: d.command,
            l,
            h,
            tau_grid,
            steps,
            engine,
            precision: c.precision.unwrap_or_default(),
            plan_tolerance: c.plan_tolerance.unwrap_or(mipt_core::propagator::DEFAULT_TOLERANCE),
            cap,
            format: c.format.unwrap_or_default(),
            seed: None,
            plateau: None,
            blocks: None,
            snapshot: None,
            splits: None,
            sigma: None,
            kind: None,
            sigma_grid: None,
            tau_c: None,
            mu: None,
            grid_points: None,
        })
    }

    pub fn plateau_from(c: &Common) -> Result<PlateauConfig, CliError> {
        let d = PlateauConfig::default();
        let cfg = PlateauConfig {
            n_min: c.n_min.unwrap_or(d.n_min),
            window: c.window.unwrap_or(d.window),
            delta: c.delta.unwrap_or(d.delta),
        };
        cfg.validate().map_err(|e| CliError::Config(e.to_string()))?;
        Ok(cfg)
    }

    pub fn taus(&self) -> &TauGrid {
        self.tau_grid.as_ref().expect("command resolved a tau grid").tau_grid()
    }

    pub fn engine_options(&self, engine: Engine) -> EngineOptions {
        EngineOptions {
            engine,
            precision: self.precision,
            plan_tolerance: self.plan_tolerance,
            statevector_cap: self.cap,
            ..EngineOptions::with_engine(engine)
        }
    }

    pub fn single_engine(&self) -> Result<Engine, CliError> {
        match self.engine {
            EngineChoice::Statevector => Ok(Engine::StateVector),
            EngineChoice::Freefermion => Ok(Engine::FreeFermion),
            EngineChoice::Both => Err(CliError::Config(format!(
                "--engine both is only supported by the survival command, not {}",
                self.command
            ))),
        }
    }
}
