//! Run configuration: one TOML document with global keys and one table per
//! subcommand. Command-line flags override the file; the output directory can
//! also come from `SLICEDMI_OUTPUT_DIR`.
//!
//! ```toml
//! seed = 7
//! unit = "bits"
//!
//! [estimate]
//! x = "x.csv"
//! y = "y.csv"
//!
//! [estimate.smi]
//! m = 2000
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use slicedmi::gaussian::GaussianSpec;
use slicedmi::independence::ExperimentPlan;
use slicedmi::rates::RateGrid;
use slicedmi::smine::TrainConfig;
use slicedmi::synthetic::ScenarioKind;
use slicedmi::SmiConfig;

use crate::error::{CliError, Result};

pub const OUTPUT_ENV: &str = "SLICEDMI_OUTPUT_DIR";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Unit {
    #[default]
    Nats,
    Bits,
}

impl Unit {
    pub fn convert(self, nats: f64) -> f64 {
        match self {
            Unit::Nats => nats,
            Unit::Bits => slicedmi::nats_to_bits(nats),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Overrides the seed of whichever command runs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default)]
    pub unit: Unit,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub estimate: Option<EstimateSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle: Option<OracleSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub indep: Option<ExperimentPlan>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rates: Option<RateGrid>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub smine: Option<SmineSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub extract: Option<ExtractSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gen: Option<GenSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimateSection {
    pub x: PathBuf,
    pub y: PathBuf,
    #[serde(default)]
    pub smi: SmiConfig,
}

/// Exactly one of `spec` and `scenario` (a Gaussian scenario) must be set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spec: Option<GaussianSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario: Option<ScenarioKind>,
    #[serde(default = "default_oracle_slices")]
    pub slices: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_oracle_slices() -> usize {
    100_000
}

impl OracleSection {
    pub fn gaussian_spec(&self) -> Result<GaussianSpec> {
        match (&self.spec, &self.scenario) {
            (Some(spec), None) => {
                spec.validate().map_err(CliError::invalid)?;
                Ok(spec.clone())
            }
            (None, Some(kind)) => kind
                .gaussian_spec()
                .map_err(CliError::invalid)?
                .ok_or_else(|| CliError::Config(format!("scenario {} is not jointly Gaussian", kind.name()))),
            _ => Err(CliError::Config("oracle needs exactly one of `spec` and `scenario`".into())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SmineSection {
    pub x: PathBuf,
    pub y: PathBuf,
    #[serde(default)]
    pub train: TrainConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExtractSection {
    pub x: PathBuf,
    pub y: PathBuf,
    pub r_x: usize,
    /// 0 keeps Y unprojected.
    #[serde(default)]
    pub r_y: usize,
    #[serde(default)]
    pub train: TrainConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenSection {
    pub scenario: ScenarioKind,
    pub n: usize,
    #[serde(default)]
    pub seed: u64,
}

impl RunConfig {
    pub fn parse(text: &str) -> std::result::Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config serializes to TOML")
    }

    /// Pushes the global seed into every section, or adopts the seed of the
    /// single present section when none is given, so the result is a fixed
    /// point of this function.
    pub fn resolve_seed(&mut self) {
        let Some(seed) = self.seed else {
            self.seed = self.section_seed();
            return;
        };
        if let Some(s) = &mut self.estimate {
            s.smi.seed = seed;
        }
        if let Some(s) = &mut self.oracle {
            s.seed = seed;
        }
        if let Some(s) = &mut self.indep {
            s.seed = seed;
        }
        if let Some(s) = &mut self.rates {
            s.seed = seed;
        }
        if let Some(s) = &mut self.smine {
            s.train.seed = seed;
        }
        if let Some(s) = &mut self.extract {
            s.train.seed = seed;
        }
        if let Some(s) = &mut self.gen {
            s.seed = seed;
        }
    }

    fn section_seed(&self) -> Option<u64> {
        let seeds: Vec<u64> = [
            self.estimate.as_ref().map(|s| s.smi.seed),
            self.oracle.as_ref().map(|s| s.seed),
            self.indep.as_ref().map(|s| s.seed),
            self.rates.as_ref().map(|s| s.seed),
            self.smine.as_ref().map(|s| s.train.seed),
            self.extract.as_ref().map(|s| s.train.seed),
            self.gen.as_ref().map(|s| s.seed),
        ]
        .into_iter()
        .flatten()
        .collect();
        match seeds[..] {
            [only] => Some(only),
            _ => None,
        }
    }

    /// The document embedded in outputs: only the section that ran, without
    /// the output location.
    pub fn provenance(&self, command: &str) -> RunConfig {
        let mut c = RunConfig { seed: None, unit: self.unit, output: None, ..RunConfig::default() };
        match command {
            "estimate" => c.estimate = self.estimate.clone(),
            "oracle" => c.oracle = self.oracle.clone(),
            "indep" => c.indep = self.indep.clone(),
            "rates" => c.rates = self.rates.clone(),
            "smine" => c.smine = self.smine.clone(),
            "extract" => c.extract = self.extract.clone(),
            "gen" => c.gen = self.gen.clone(),
            _ => {}
        }
        c.resolve_seed();
        c
    }
}

/// Flag, then environment, then config file, then the working directory.
pub fn output_dir(flag: Option<&Path>, config: &RunConfig) -> PathBuf {
    flag.map(Path::to_path_buf)
        .or_else(|| std::env::var_os(OUTPUT_ENV).filter(|v| !v.is_empty()).map(PathBuf::from))
        .or_else(|| config.output.clone())
        .unwrap_or_else(|| PathBuf::from("."))
}

/// Prefixes every line with `# ` so the config can ride along in CSV and
/// tensor files.
pub fn as_comment(config: &RunConfig) -> String {
    let mut out = String::from("# resolved config\n");
    for line in config.to_toml().lines() {
        out.push_str("# ");
        out.push_str(line);
        out.push('\n');
    }
    out
}
