use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use staticprobe_core::ridge::log_grid;
use staticprobe_core::{CvSpec, EmbeddingFormat, LookupStrategy, SplitSpec};

/// `lo,hi,count` log-uniform λ grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LambdaGrid {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

impl Default for LambdaGrid {
    fn default() -> Self {
        LambdaGrid {
            lo: 1e-2,
            hi: 1e3,
            count: 8,
        }
    }
}

impl std::str::FromStr for LambdaGrid {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        let [lo, hi, count] = parts.as_slice() else {
            return Err(format!("expected lo,hi,count, got {s:?}"));
        };
        let grid = LambdaGrid {
            lo: lo.parse().map_err(|e| format!("lo: {e}"))?,
            hi: hi.parse().map_err(|e| format!("hi: {e}"))?,
            count: count.parse().map_err(|e| format!("count: {e}"))?,
        };
        log_grid(grid.lo, grid.hi, grid.count).map_err(|e| e.to_string())?;
        Ok(grid)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "lowercase")]
pub enum CommandOptions {
    Probe {
        /// Stability sweep over this many consecutive seeds.
        seeds: Option<usize>,
    },
    Scan {
        top_k: usize,
        vocab_size: usize,
        min_length: usize,
        alphabetic_only: bool,
        exclusions: Option<PathBuf>,
    },
    Composite {
        pos: String,
        neg: String,
    },
    Ablate {
        categories: Vec<String>,
        categories_dir: PathBuf,
        n_random: usize,
        master_seed: u64,
        var_threshold: f64,
        max_dims: usize,
        combined: bool,
    },
}

impl CommandOptions {
    pub fn name(&self) -> &'static str {
        match self {
            CommandOptions::Probe { .. } => "probe",
            CommandOptions::Scan { .. } => "scan",
            CommandOptions::Composite { .. } => "composite",
            CommandOptions::Ablate { .. } => "ablate",
        }
    }
}

/// Everything a command needs; echoed verbatim into its report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub embeddings: PathBuf,
    pub format: EmbeddingFormat,
    pub lookup: LookupStrategy,
    pub dataset: PathBuf,
    /// Optional list of entity names to keep.
    pub subset: Option<PathBuf>,
    /// Empty means every target in the dataset.
    pub targets: Vec<String>,
    pub seed: u64,
    pub test_fraction: f64,
    pub folds: usize,
    pub lambda_grid: LambdaGrid,
    pub output: Option<PathBuf>,
    pub options: CommandOptions,
}

impl RunConfig {
    pub fn split(&self) -> SplitSpec {
        SplitSpec::new(self.test_fraction, self.seed)
    }

    pub fn cv(&self) -> anyhow::Result<CvSpec> {
        Ok(CvSpec {
            folds: self.folds,
            lambda_grid: log_grid(self.lambda_grid.lo, self.lambda_grid.hi, self.lambda_grid.count)?,
            seed: self.seed,
        })
    }
}
