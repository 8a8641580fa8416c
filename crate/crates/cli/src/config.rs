//! TOML experiment configuration. Every section is optional and falls back
//! to library defaults; unknown keys are rejected at every level.

use std::fs;
use std::path::{Path, PathBuf};

use eqhard::decoders::ModelConfig;
use eqhard::em::{TrainConfig, Variant};
use eqhard::metrics::EvalConfig;
use eqhard::pipeline::Decoding;
use eqhard::synthdata::CorpusSpec;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    /// `report.csv`: header plus one row in table-column order.
    Csv,
    /// `report.txt`: flat `key=value` lines.
    KeyValue,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub formats: Vec<ReportFormat>,
    /// Also write `assignment_stats.dat` (decoder, mean share, std).
    pub plot_data: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("runs/default"),
            formats: vec![ReportFormat::Csv, ReportFormat::KeyValue],
            plot_data: true,
        }
    }
}

/// Exactly one axis must be non-empty when running a sweep.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub variants: Vec<Variant>,
    pub n_decoders: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SweepAxis {
    Variants(Vec<Variant>),
    Decoders(Vec<usize>),
}

impl SweepConfig {
    pub fn axis(&self) -> CliResult<SweepAxis> {
        match (self.variants.is_empty(), self.n_decoders.is_empty()) {
            (false, true) => Ok(SweepAxis::Variants(self.variants.clone())),
            (true, false) => Ok(SweepAxis::Decoders(self.n_decoders.clone())),
            (true, true) => Err(CliError::Config("sweep needs `variants` or `n_decoders`".into())),
            (false, false) => Err(CliError::Config(
                "sweep takes one axis: set either `variants` or `n_decoders`".into(),
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub corpus: CorpusSpec,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub eval: EvalConfig,
    pub decode: Decoding,
    pub output: OutputConfig,
    pub sweep: SweepConfig,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> CliResult<Self> {
        let config: ExperimentConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is serializable")
    }

    /// `--seed` replaces both the corpus and the training seed.
    pub fn with_overrides(mut self, seed: Option<u64>, out: Option<PathBuf>) -> Self {
        if let Some(s) = seed {
            self.corpus.seed = s;
            self.train.seed = s;
        }
        if let Some(dir) = out {
            self.output.dir = dir;
        }
        self
    }

    pub fn validate(&self) -> CliResult<()> {
        self.corpus.validate()?;
        self.model.validate()?;
        self.train.validate()?;
        let e = &self.eval;
        if !(1..=2).contains(&e.max_n) {
            return Err(CliError::Config(format!("eval.max_n must be 1 or 2, got {}", e.max_n)));
        }
        if e.dist_orders.iter().any(|n| !(1..=2).contains(n)) {
            return Err(CliError::Config("eval.dist_orders may only contain 1 and 2".into()));
        }
        if !(e.coverage_tau > 0.0 && e.coverage_tau <= 1.0) {
            return Err(CliError::Config(format!(
                "eval.coverage_tau must be in (0, 1], got {}",
                e.coverage_tau
            )));
        }
        if let Decoding::Beam { width: 0 } = self.decode {
            return Err(CliError::Config("decode.width must be at least 1".into()));
        }
        if self.sweep.n_decoders.contains(&0) {
            return Err(CliError::Config("sweep.n_decoders entries must be positive".into()));
        }
        Ok(())
    }

    pub fn paths(&self) -> RunPaths {
        RunPaths::new(&self.output.dir)
    }
}

/// File layout of one run directory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunPaths {
    pub root: PathBuf,
}

impl RunPaths {
    pub fn new(root: &Path) -> Self {
        Self { root: root.to_path_buf() }
    }

    pub fn corpus(&self) -> PathBuf {
        self.root.join("corpus")
    }

    pub fn checkpoint(&self) -> PathBuf {
        self.root.join("checkpoint.json")
    }

    pub fn train_log(&self) -> PathBuf {
        self.root.join("train_log.jsonl")
    }

    pub fn report_csv(&self) -> PathBuf {
        self.root.join("report.csv")
    }

    pub fn report_txt(&self) -> PathBuf {
        self.root.join("report.txt")
    }

    pub fn plot_data(&self) -> PathBuf {
        self.root.join("assignment_stats.dat")
    }

    pub fn sweep_csv(&self) -> PathBuf {
        self.root.join("sweep.csv")
    }

    pub fn sweep_row(&self, label: &str) -> PathBuf {
        self.root.join("sweep").join(label)
    }

    pub fn timing(&self) -> PathBuf {
        self.root.join("timing.txt")
    }
}
