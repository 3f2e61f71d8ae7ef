use serde::{Deserialize, Serialize};

use crate::graph::PathEnumConfig;
use crate::inference::{DetectorConfig, EmptyPathWeight, UnreachablePolicy};
use crate::markov::{FeatureConfig, GrowthConfig};
use crate::offline::{FeatureMode, TrainHyper, TrainOptions};
use crate::policy::{CostSpec, SolverConfig};

use super::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum PolicyKind {
    Dp,
    Sprt,
    #[default]
    Convergence,
    Oracle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum SplitPart {
    All,
    #[default]
    Train,
    Test,
}

/// Experiment settings. Read from an optional JSON file; command-line flags
/// override individual fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub costs: CostSpec,
    pub zclasses: usize,
    pub epsilon: f64,
    /// Convergence-rule decision threshold; the cost break-even point when
    /// absent.
    pub decision_threshold: Option<f64>,
    pub keep_fraction: f64,
    pub paths: PathEnumConfig,
    pub unreachable: UnreachablePolicy,
    pub empty_path_weight: EmptyPathWeight,
    pub policy: PolicyKind,
    pub sprt_targets: [f64; 2],
    pub solver: SolverConfig,
    pub seed: u64,
    pub split: [f64; 2],
    pub n_traces: usize,
    pub growth: GrowthConfig,
    pub features: FeatureConfig,
    pub train: TrainHyper,
    pub smoothing: bool,
    pub feature_mode: FeatureMode,
    pub reclassify: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            costs: CostSpec::default(),
            zclasses: 4,
            epsilon: 0.001,
            decision_threshold: None,
            keep_fraction: 0.5,
            paths: PathEnumConfig::default(),
            unreachable: UnreachablePolicy::Skip,
            empty_path_weight: EmptyPathWeight::SourceAnchored,
            policy: PolicyKind::Convergence,
            sprt_targets: [0.05, 0.05],
            solver: SolverConfig::default(),
            seed: 0,
            split: [0.8, 0.2],
            n_traces: 100,
            growth: GrowthConfig::default(),
            features: FeatureConfig::default(),
            train: TrainHyper::default(),
            smoothing: false,
            feature_mode: FeatureMode::Pair,
            reclassify: false,
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Parse(format!("config: {e}")))
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let usage = |m: String| Err(CliError::Usage(m));
        CostSpec::new(self.costs.c_i, self.costs.c_ii, self.costs.c).map_err(|e| CliError::Usage(e.to_string()))?;
        if self.zclasses < 2 {
            return usage(format!("need at least 2 classes, got {}", self.zclasses));
        }
        if !(self.keep_fraction > 0.0 && self.keep_fraction <= 1.0) {
            return usage(format!("rho {} not in (0, 1]", self.keep_fraction));
        }
        if self.epsilon.is_nan() || self.epsilon <= 0.0 {
            return usage("epsilon must be positive".into());
        }
        if self.paths.max_path_length == 0 || self.paths.max_paths == 0 {
            return usage("path bounds must be positive".into());
        }
        let [a, b] = self.split;
        if !(a > 0.0 && a <= 1.0 && (0.0..=1.0).contains(&b) && ((a + b) - 1.0).abs() < 1e-9) {
            return usage(format!("split fractions ({a}, {b}) must lie in (0, 1] and sum to 1"));
        }
        if self.n_traces == 0 {
            return usage("n must be at least 1".into());
        }
        Ok(())
    }

    pub fn detector(&self) -> DetectorConfig {
        DetectorConfig {
            paths: self.paths,
            unreachable: self.unreachable,
            empty_path_weight: self.empty_path_weight,
        }
    }

    pub fn train_options(&self) -> TrainOptions {
        TrainOptions {
            num_classes: self.zclasses,
            hyper: TrainHyper {
                seed: self.seed,
                ..self.train
            },
            feature_mode: self.feature_mode,
            smoothing: self.smoothing,
            reclassify: self.reclassify,
        }
    }

    pub fn decision_threshold(&self) -> f64 {
        self.decision_threshold.unwrap_or_else(|| self.costs.break_even())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_file_keeps_defaults() {
        let c = RunConfig::from_json(r#"{"epsilon": 0.01, "costs": {"c_i": 1, "c_ii": 2, "c": 0.5}}"#).unwrap();
        assert_eq!(c.epsilon, 0.01);
        assert_eq!(c.costs.c_ii, 2.0);
        assert_eq!(c.zclasses, 4);
        assert!(RunConfig::from_json(r#"{"epsilom": 1}"#).is_err());
    }

    #[test]
    fn split_must_sum_to_one() {
        let c = RunConfig {
            split: [0.7, 0.2],
            ..RunConfig::default()
        };
        assert!(c.validate().is_err());
        assert!(RunConfig::default().validate().is_ok());
    }
}
