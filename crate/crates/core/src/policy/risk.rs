//! Monte Carlo evaluation of a stopping policy under the prior mixture.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use super::{
    bayes_decision, convergence_stop, dp_stop_step, sprt_stop, CostSpec, DecisionOutcome, SprtConfig, StopRule,
    Thresholds,
};
use crate::graph::{NodeId, SocialGraph};
use crate::inference::{run_posterior, BeliefState, DetectorConfig, InferenceError};
use crate::markov::{
    sample_synthetic_cascade, sample_trace, subsample, FeatureConfig, GrowthConfig, ObservationStream, SimError,
    SpreadModel, Trace,
};
use crate::rng::{derive_seed, rng_from_seed};
use crate::Hypothesis;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Policy {
    Dp { thresholds: Thresholds },
    Sprt { config: SprtConfig },
    /// Stop once the posterior moves by less than `epsilon`; fake iff the
    /// posterior is at least `threshold`.
    Convergence { epsilon: f64, threshold: f64 },
    /// Reads the true label after one observation.
    Oracle,
}

impl Policy {
    /// Applies the policy to a finished posterior run. `None` only for the
    /// oracle without a label.
    pub fn decide(&self, belief: &BeliefState, costs: &CostSpec, label: Option<Hypothesis>) -> Option<DecisionOutcome> {
        if let Policy::Oracle = self {
            return label.map(|verdict| DecisionOutcome {
                stopping_step: 1,
                verdict,
                rule: StopRule::Oracle,
            });
        }
        if belief.history.is_empty() {
            return Some(DecisionOutcome {
                stopping_step: 1,
                verdict: bayes_decision(belief.prior, costs),
                rule: StopRule::Horizon,
            });
        }
        let posteriors = belief.posteriors();
        match *self {
            Policy::Dp { thresholds } => dp_stop_step(&posteriors, thresholds, costs),
            Policy::Sprt { config } => sprt_stop(belief.prior, &belief.log_lrs(), &config, costs),
            Policy::Convergence { epsilon, threshold } => {
                convergence_stop(belief.prior, &posteriors, epsilon, threshold)
            }
            Policy::Oracle => unreachable!(),
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum RiskError {
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Inference(#[from] InferenceError),
    #[error("at least one trace is required")]
    NoTraces,
}

/// How evaluation traces are generated and observed.
#[derive(Debug, Clone, Copy)]
pub struct RiskSetup<'a> {
    pub growth: GrowthConfig,
    pub features: FeatureConfig,
    pub keep_fraction: f64,
    pub detector: DetectorConfig,
    /// Cascade over an existing graph from the given source instead of a
    /// fresh synthetic tree per trace.
    pub graph: Option<(&'a SocialGraph, NodeId)>,
}

impl Default for RiskSetup<'_> {
    fn default() -> Self {
        RiskSetup {
            growth: GrowthConfig::default(),
            features: FeatureConfig::default(),
            keep_fraction: 0.5,
            detector: DetectorConfig::default(),
            graph: None,
        }
    }
}

/// One labeled trace drawn from the mixture and its observed part.
#[derive(Debug, Clone)]
pub struct LabeledSample {
    pub label: Hypothesis,
    pub trace: Trace,
    pub stream: ObservationStream,
    /// Present for synthetic cascades.
    pub cascade_graph: Option<SocialGraph>,
}

impl LabeledSample {
    pub fn graph<'s>(&'s self, setup: &'s RiskSetup) -> &'s SocialGraph {
        match (&self.cascade_graph, setup.graph) {
            (Some(g), _) => g,
            (None, Some((g, _))) => g,
            (None, None) => unreachable!("sample without a graph"),
        }
    }
}

impl RiskSetup<'_> {
    /// Trace `index` of the mixture stream keyed by `master_seed`. The label
    /// is Fake with probability `model.prior_fake()` unless forced.
    pub fn sample(
        &self,
        model: &SpreadModel,
        master_seed: u64,
        index: u64,
        forced: Option<Hypothesis>,
    ) -> Result<LabeledSample, SimError> {
        let s = derive_seed(master_seed, index);
        let label = forced.unwrap_or_else(|| {
            if rng_from_seed(derive_seed(s, 0)).random::<f64>() < model.prior_fake() {
                Hypothesis::Fake
            } else {
                Hypothesis::Genuine
            }
        });
        let (trace, cascade_graph) = match self.graph {
            Some((g, source)) => (sample_trace(g, source, model, label, derive_seed(s, 1), &self.growth)?, None),
            None => {
                let c = sample_synthetic_cascade(model, label, derive_seed(s, 1), &self.growth, &self.features, 0)?;
                (c.trace, Some(c.graph))
            }
        };
        let stream = subsample(&trace, self.keep_fraction, derive_seed(s, 2))?;
        Ok(LabeledSample {
            label,
            trace,
            stream,
            cascade_graph,
        })
    }
}

fn mean_se(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RiskReport {
    pub n: usize,
    pub n_genuine: usize,
    pub n_fake: usize,
    /// Genuine items declared fake / genuine items.
    pub pe1: f64,
    pub se_pe1: f64,
    /// Fake items declared genuine / fake items.
    pub pe2: f64,
    pub se_pe2: f64,
    /// Mean stopping step over fake items.
    pub mean_steps_fake: f64,
    pub se_steps_fake: f64,
    pub mean_steps: f64,
    pub horizon_stops: usize,
    /// `c_I Pe1 (1 - pi) + c_II Pe2 pi + c E[T | fake] pi`.
    pub risk: f64,
    pub se_risk: f64,
}

/// Simulates `n_traces` labeled traces, runs the detector and `policy` on
/// each, and aggregates the error rates and the risk.
pub fn risk_estimate(
    policy: &Policy,
    model: &SpreadModel,
    costs: &CostSpec,
    setup: &RiskSetup,
    n_traces: usize,
    seed: u64,
) -> Result<RiskReport, RiskError> {
    if n_traces == 0 {
        return Err(RiskError::NoTraces);
    }
    let results: Vec<(Hypothesis, DecisionOutcome)> = (0..n_traces as u64)
        .into_par_iter()
        .map(|i| -> Result<_, RiskError> {
            let sample = setup.sample(model, seed, i, None)?;
            let run = run_posterior(model, sample.graph(setup), &sample.stream, &setup.detector)?;
            let outcome = policy
                .decide(&run.belief, costs, Some(sample.label))
                .expect("label supplied");
            Ok((sample.label, outcome))
        })
        .collect::<Result<_, _>>()?;

    let errors = |h: Hypothesis| -> Vec<f64> {
        results
            .iter()
            .filter(|(l, _)| *l == h)
            .map(|(_, o)| f64::from(u8::from(o.verdict != h)))
            .collect()
    };
    let e1 = errors(Hypothesis::Genuine);
    let e2 = errors(Hypothesis::Fake);
    let steps_fake: Vec<f64> = results
        .iter()
        .filter(|(l, _)| *l == Hypothesis::Fake)
        .map(|(_, o)| o.stopping_step as f64)
        .collect();
    let steps: Vec<f64> = results.iter().map(|(_, o)| o.stopping_step as f64).collect();
    let (pe1, se_pe1) = mean_se(&e1);
    let (pe2, se_pe2) = mean_se(&e2);
    let (mean_steps_fake, se_steps_fake) = mean_se(&steps_fake);
    let pi = model.prior_fake();
    let risk = costs.c_i * pe1 * (1.0 - pi) + costs.c_ii * pe2 * pi + costs.c * mean_steps_fake * pi;
    let se_risk = ((costs.c_i * se_pe1 * (1.0 - pi)).powi(2)
        + (costs.c_ii * se_pe2 * pi).powi(2)
        + (costs.c * se_steps_fake * pi).powi(2))
    .sqrt();
    Ok(RiskReport {
        n: n_traces,
        n_genuine: e1.len(),
        n_fake: e2.len(),
        pe1,
        se_pe1,
        pe2,
        se_pe2,
        mean_steps_fake,
        se_steps_fake,
        mean_steps: mean_se(&steps).0,
        horizon_stops: results.iter().filter(|(_, o)| o.rule == StopRule::Horizon).count(),
        risk,
        se_risk,
    })
}
