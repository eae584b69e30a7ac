use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use wfgl::admm::AdmmConfig;
use wfgl::evaluation::FprTarget;
use wfgl::screening::ScreenConfig;
use wfgl::simgen::SimConfig;
use wfgl::triangle::TriangleCorrection;
use wfgl::tuning::TuningConfig;
use wfgl::weights::PsiEstimator;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum WeightMode {
    Independence,
    #[default]
    Paired,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WeightsConfig {
    pub mode: WeightMode,
    pub estimator: PsiEstimator,
    /// Precomputed weight matrix; overrides `mode`.
    pub file: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TriangleConfig {
    pub prune: bool,
    /// Defaults to the tuning `alpha1`.
    pub alpha: Option<f64>,
    pub correction: TriangleCorrection,
}

impl Default for TriangleConfig {
    fn default() -> Self {
        Self { prune: true, alpha: None, correction: TriangleCorrection::None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PermtestConfig {
    pub reps: usize,
    pub seed: u64,
}

impl Default for PermtestConfig {
    fn default() -> Self {
        Self { reps: 100, seed: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BenchmarkConfig {
    pub replicates: usize,
    /// Replicate `r` draws its data from seed `data_seed + r`.
    pub data_seed: u64,
    pub psi_estimator: PsiEstimator,
    pub fpr_target: FprTarget,
    pub fpr_alphas: Vec<f64>,
    pub triangle_alphas: Vec<f64>,
    pub max_steps: usize,
    /// Monte Carlo replicates of the ψ oracle used by the rank table.
    pub oracle_reps: usize,
    pub oracle_seed: u64,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        Self {
            replicates: 100,
            data_seed: 1000,
            psi_estimator: PsiEstimator::RegBasedSim,
            fpr_target: FprTarget::Alpha1,
            fpr_alphas: vec![0.01, 0.05],
            triangle_alphas: vec![0.01, 0.03, 0.05],
            max_steps: 50,
            oracle_reps: 1000,
            oracle_seed: 1_000_000,
        }
    }
}

/// Every command reads the sections it needs from one file.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Replaces the seed of every section when set.
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub simulate: SimConfig,
    pub admm: AdmmConfig,
    pub tuning: TuningConfig,
    pub weights: WeightsConfig,
    pub triangle: TriangleConfig,
    pub permtest: PermtestConfig,
    pub screen: ScreenConfig,
    pub benchmark: BenchmarkConfig,
}

impl RunConfig {
    /// TOML unless the extension is `.json`; missing path gives defaults.
    pub fn load(path: Option<&Path>) -> CliResult<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let is_json = path.extension().and_then(|e| e.to_str()).is_some_and(|e| e.eq_ignore_ascii_case("json"));
        let parsed = if is_json {
            serde_json::from_str(&text).map_err(|e| e.to_string())
        } else {
            toml::from_str(&text).map_err(|e| e.to_string())
        };
        parsed.map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    pub fn set_seed(&mut self, seed: u64) {
        self.seed = Some(seed);
        self.simulate.seed = seed;
        self.permtest.seed = seed;
        self.screen.seed = seed;
        self.benchmark.data_seed = seed;
    }

    /// Applies the global seed to the sections.
    pub fn resolve(mut self) -> Self {
        if let Some(s) = self.seed {
            self.set_seed(s);
        }
        self
    }

    pub fn triangle_alpha(&self) -> f64 {
        self.triangle.alpha.unwrap_or(self.tuning.alpha1)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }
}
