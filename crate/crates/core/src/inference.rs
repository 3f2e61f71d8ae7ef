//! Posterior engine.
//!
//! For a new observation `Z_l` on edge `(u, v)` the engine enumerates the
//! candidate paths from the source ending with that edge, weights each path
//! by how well it explains the earlier observations lying on it (`mu`), and
//! averages the per-path predictive probability of the new class. The
//! resulting `A_0`, `A_1` drive the posterior / likelihood-ratio recursion.
//!
//! Everything is carried in log space.

use std::collections::HashMap;
use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{DirectedPath, Edge, NodeId, PathEnumConfig, SocialGraph};
use crate::markov::{Observation, ObservationStream, PowerCache, SpreadModel};
use crate::Hypothesis;

#[derive(Debug, Error, PartialEq)]
pub enum InferenceError {
    #[error("observation {index} on edge {edge} has no path from source {origin} within bounds")]
    Unreachable { index: usize, edge: Edge, origin: NodeId },
    #[error("observation {index}: edge {edge} is not in the graph")]
    MissingEdge { index: usize, edge: Edge },
    #[error("observation {index}: class {class} out of range for {num_classes} classes")]
    ClassOutOfRange { index: usize, class: usize, num_classes: usize },
    #[error("observation {index}: edge {edge} was already observed")]
    Repeated { index: usize, edge: Edge },
    #[error("both hypotheses assign zero probability to the observation")]
    InvalidEvidence,
    #[error("prior {0} outside [0, 1]")]
    Prior(f64),
    #[error("observation stream is empty")]
    EmptyStream,
}

/// What to do with an observation that no enumerated path reaches.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UnreachablePolicy {
    #[default]
    Skip,
    Fail,
}

/// Weight given to a candidate path none of whose edges have been observed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmptyPathWeight {
    /// Probability that the chain started at the source produces the
    /// current class at the path's depth.
    #[default]
    SourceAnchored,
    /// Empty product: weight 1.
    Unit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct DetectorConfig {
    pub paths: PathEnumConfig,
    pub unreachable: UnreachablePolicy,
    pub empty_path_weight: EmptyPathWeight,
}

impl DetectorConfig {
    pub fn with_paths(paths: PathEnumConfig) -> Self {
        DetectorConfig {
            paths,
            ..DetectorConfig::default()
        }
    }
}

/// One processed observation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StepRecord {
    /// Number of observations absorbed so far, this one included.
    pub step: usize,
    /// Index of the observation in its stream.
    pub index: usize,
    pub a0: f64,
    pub a1: f64,
    pub posterior: f64,
    pub log_lr: f64,
}

/// Running posterior that the item is fake and the log likelihood ratio.
#[derive(Debug, Clone, PartialEq)]
pub struct BeliefState {
    pub prior: f64,
    pub posterior: f64,
    pub log_lr: f64,
    pub step: usize,
    pub history: Vec<StepRecord>,
}

fn logit(p: f64) -> f64 {
    p.ln() - (-p).ln_1p()
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Posterior from the prior and the log likelihood ratio.
pub fn posterior_from_log_lr(prior: f64, log_lr: f64) -> f64 {
    if prior <= 0.0 || prior >= 1.0 {
        return prior;
    }
    sigmoid(logit(prior) + log_lr)
}

impl BeliefState {
    pub fn new(prior: f64) -> Result<Self, InferenceError> {
        if !(0.0..=1.0).contains(&prior) {
            return Err(InferenceError::Prior(prior));
        }
        Ok(BeliefState {
            prior,
            posterior: prior,
            log_lr: 0.0,
            step: 0,
            history: Vec::new(),
        })
    }

    pub fn likelihood_ratio(&self) -> f64 {
        self.log_lr.exp()
    }

    /// `Pi_1 .. Pi_step`.
    pub fn posteriors(&self) -> Vec<f64> {
        self.history.iter().map(|r| r.posterior).collect()
    }

    /// `Pi_0 .. Pi_step`.
    pub fn trajectory(&self) -> Vec<f64> {
        std::iter::once(self.prior).chain(self.history.iter().map(|r| r.posterior)).collect()
    }

    /// `log Lambda_1 .. log Lambda_step`.
    pub fn log_lrs(&self) -> Vec<f64> {
        self.history.iter().map(|r| r.log_lr).collect()
    }

    /// Absorbs an observation given its log probabilities under both
    /// hypotheses.
    pub fn update_log(&self, log_a0: f64, log_a1: f64, index: usize) -> Result<BeliefState, InferenceError> {
        if log_a0 == f64::NEG_INFINITY && log_a1 == f64::NEG_INFINITY {
            return Err(InferenceError::InvalidEvidence);
        }
        if log_a0.is_nan() || log_a1.is_nan() {
            return Err(InferenceError::InvalidEvidence);
        }
        let log_lr = self.log_lr + (log_a1 - log_a0);
        let posterior = posterior_from_log_lr(self.prior, log_lr);
        let mut next = self.clone();
        next.step += 1;
        next.log_lr = log_lr;
        next.posterior = posterior;
        next.history.push(StepRecord {
            step: next.step,
            index,
            a0: log_a0.exp(),
            a1: log_a1.exp(),
            posterior,
            log_lr,
        });
        Ok(next)
    }
}

/// One step of the recursion `Pi' = Pi A1 / (Pi A1 + (1 - Pi) A0)`,
/// `log Lambda' = log Lambda + ln(A1 / A0)`.
pub fn update(belief: &BeliefState, a0: f64, a1: f64) -> Result<BeliefState, InferenceError> {
    if !(a0 >= 0.0 && a1 >= 0.0) || (a0 == 0.0 && a1 == 0.0) {
        return Err(InferenceError::InvalidEvidence);
    }
    belief.update_log(a0.ln(), a1.ln(), belief.step)
}

/// Where the earlier observations sit on one candidate path.
///
/// Positions are 1-based edge positions along the path; the new observation
/// occupies position `path.len()`.
#[derive(Debug, Clone, PartialEq)]
pub struct PathContext {
    pub path: DirectedPath,
    /// Stream indices of earlier observations on the path, increasing.
    pub observed: Vec<usize>,
    /// Path position of each entry of `observed`.
    pub positions: Vec<usize>,
    /// For each entry of `observed`, the stream index of the closest
    /// observation preceding it along the path (none for the first).
    pub predecessor: Vec<Option<usize>>,
    /// For each entry of `observed`, the number of edges from its
    /// predecessor (or from the source) to it.
    pub gaps: Vec<usize>,
    /// The observation closest to the new one along the path.
    pub last_observed: Option<usize>,
}

impl PathContext {
    pub fn new(path: DirectedPath, prefix: &[Observation]) -> Self {
        let index: HashMap<Edge, usize> = prefix.iter().enumerate().map(|(i, o)| (o.edge, i)).collect();
        Self::with_index(path, &index)
    }

    fn with_index(path: DirectedPath, index: &HashMap<Edge, usize>) -> Self {
        let m = path.len();
        let mut on_path: Vec<(usize, usize)> = path
            .edges()
            .take(m - 1)
            .enumerate()
            .filter_map(|(p, e)| index.get(&e).map(|&i| (p + 1, i)))
            .collect();
        // Walk in path order to find predecessors.
        let mut pred: HashMap<usize, (Option<usize>, usize)> = HashMap::new();
        let mut prev: Option<(usize, usize)> = None;
        for &(pos, i) in &on_path {
            let gap = pos - prev.map_or(0, |(p, _)| p);
            pred.insert(i, (prev.map(|(_, j)| j), gap));
            prev = Some((pos, i));
        }
        let last_observed = prev.map(|(_, i)| i);
        on_path.sort_by_key(|&(_, i)| i);
        PathContext {
            observed: on_path.iter().map(|&(_, i)| i).collect(),
            positions: on_path.iter().map(|&(p, _)| p).collect(),
            predecessor: on_path.iter().map(|&(_, i)| pred[&i].0).collect(),
            gaps: on_path.iter().map(|&(_, i)| pred[&i].1).collect(),
            last_observed,
            path,
        }
    }

    pub fn depth(&self) -> usize {
        self.path.len()
    }

    fn position_of(&self, index: usize) -> usize {
        let k = self.observed.iter().position(|&i| i == index).expect("index on path");
        self.positions[k]
    }

    /// Edges between the last observed edge (or the source) and the new one.
    pub fn trailing_gap(&self) -> usize {
        self.depth() - self.last_observed.map_or(0, |i| self.position_of(i))
    }
}

fn ln(p: f64) -> f64 {
    if p > 0.0 {
        p.ln()
    } else {
        f64::NEG_INFINITY
    }
}

fn log_sum_exp(xs: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = xs.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + xs.map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// Unnormalized log weight of a path given the earlier observations.
fn log_weight(
    model: &SpreadModel,
    powers: &mut PowerCache,
    ctx: &PathContext,
    prefix: &[Observation],
    current_class: usize,
    h: Hypothesis,
    mode: EmptyPathWeight,
) -> f64 {
    if ctx.observed.is_empty() {
        return match mode {
            EmptyPathWeight::Unit => 0.0,
            EmptyPathWeight::SourceAnchored => ln(powers.source_marginal(model, h, ctx.depth(), current_class)),
        };
    }
    let mut total = 0.0;
    for k in 0..ctx.observed.len() {
        let c = prefix[ctx.observed[k]].class;
        let term = match ctx.predecessor[k] {
            None => powers.source_marginal(model, h, ctx.positions[k], c),
            Some(j) => powers.power(h, ctx.gaps[k]).get(prefix[j].class, c),
        };
        total += ln(term);
    }
    total
}

fn predictive(
    model: &SpreadModel,
    powers: &mut PowerCache,
    ctx: &PathContext,
    prefix: &[Observation],
    current_class: usize,
    h: Hypothesis,
) -> f64 {
    match ctx.last_observed {
        None => powers.source_marginal(model, h, ctx.depth(), current_class),
        Some(i) => powers.power(h, ctx.trailing_gap()).get(prefix[i].class, current_class),
    }
}

fn normalize_log(weights: &[f64]) -> Vec<f64> {
    let total = log_sum_exp(weights.iter().copied());
    if total == f64::NEG_INFINITY {
        log::warn!("all {} path weights vanish; using uniform path scores", weights.len());
        let u = -(weights.len() as f64).ln();
        return vec![u; weights.len()];
    }
    weights.iter().map(|w| w - total).collect()
}

/// Path scores `mu_h(P)` over the candidate paths of the observation with
/// class `current_class`. Sums to one.
pub fn path_score(
    model: &SpreadModel,
    contexts: &[PathContext],
    prefix: &[Observation],
    current_class: usize,
    h: Hypothesis,
    mode: EmptyPathWeight,
) -> Vec<f64> {
    let mut powers = PowerCache::new(model);
    let w: Vec<f64> = contexts
        .iter()
        .map(|c| log_weight(model, &mut powers, c, prefix, current_class, h, mode))
        .collect();
    normalize_log(&w).into_iter().map(f64::exp).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathEvidence {
    pub context: PathContext,
    /// `mu_0(P)`, `mu_1(P)`.
    pub mu: [f64; 2],
    /// Per-path probability of the new class under each hypothesis.
    pub predictive: [f64; 2],
}

/// Full breakdown of `A_0`, `A_1` for one observation.
#[derive(Debug, Clone, PartialEq)]
pub struct Evidence {
    pub source_adjacent: bool,
    /// Path enumeration hit `max_paths`.
    pub truncated: bool,
    pub paths: Vec<PathEvidence>,
    pub log_a: [f64; 2],
}

impl Evidence {
    pub fn a(&self, h: Hypothesis) -> f64 {
        self.log_a[h.index()].exp()
    }
}

/// Earlier observations indexed by edge.
#[derive(Debug, Clone, Default)]
struct Prefix {
    observations: Vec<Observation>,
    by_edge: HashMap<Edge, usize>,
}

impl Prefix {
    fn from_slice(prefix: &[Observation]) -> Self {
        Prefix {
            observations: prefix.to_vec(),
            by_edge: prefix.iter().enumerate().map(|(i, o)| (o.edge, i)).collect(),
        }
    }

    fn push(&mut self, o: Observation) {
        self.by_edge.insert(o.edge, self.observations.len());
        self.observations.push(o);
    }
}

#[allow(clippy::too_many_arguments)]
fn evidence_with(
    model: &SpreadModel,
    graph: &SocialGraph,
    source: NodeId,
    prefix: &Prefix,
    obs: Observation,
    index: usize,
    cfg: &DetectorConfig,
    powers: &mut PowerCache,
) -> Result<Evidence, InferenceError> {
    if obs.class >= model.num_classes() {
        return Err(InferenceError::ClassOutOfRange {
            index,
            class: obs.class,
            num_classes: model.num_classes(),
        });
    }
    if !graph.has_edge(obs.edge) {
        return Err(InferenceError::MissingEdge { index, edge: obs.edge });
    }
    if prefix.by_edge.contains_key(&obs.edge) {
        return Err(InferenceError::Repeated { index, edge: obs.edge });
    }
    if obs.edge.from == source {
        let path = DirectedPath::from_vertices(vec![source, obs.edge.to]).expect("two distinct vertices");
        let eta = [model.eta(Hypothesis::Genuine)[obs.class], model.eta(Hypothesis::Fake)[obs.class]];
        return Ok(Evidence {
            source_adjacent: true,
            truncated: false,
            paths: vec![PathEvidence {
                context: PathContext::with_index(path, &prefix.by_edge),
                mu: [1.0, 1.0],
                predictive: eta,
            }],
            log_a: [ln(eta[0]), ln(eta[1])],
        });
    }
    let set = graph.enumerate_paths(source, obs.edge, &cfg.paths);
    if set.paths.is_empty() {
        return Err(InferenceError::Unreachable {
            index,
            edge: obs.edge,
            origin: source,
        });
    }
    let contexts: Vec<PathContext> = set
        .paths
        .into_iter()
        .map(|p| PathContext::with_index(p, &prefix.by_edge))
        .collect();
    let prior = &prefix.observations;
    let mut log_mu = [Vec::new(), Vec::new()];
    let mut log_pred = [Vec::new(), Vec::new()];
    for h in Hypothesis::BOTH {
        let w: Vec<f64> = contexts
            .iter()
            .map(|c| log_weight(model, powers, c, prior, obs.class, h, cfg.empty_path_weight))
            .collect();
        log_mu[h.index()] = normalize_log(&w);
        log_pred[h.index()] = contexts
            .iter()
            .map(|c| ln(predictive(model, powers, c, prior, obs.class, h)))
            .collect();
    }
    let log_a = [0, 1].map(|h| log_sum_exp(log_mu[h].iter().zip(&log_pred[h]).map(|(m, p)| m + p)));
    let paths = contexts
        .into_iter()
        .enumerate()
        .map(|(k, context)| PathEvidence {
            context,
            mu: [log_mu[0][k].exp(), log_mu[1][k].exp()],
            predictive: [log_pred[0][k].exp(), log_pred[1][k].exp()],
        })
        .collect();
    Ok(Evidence {
        source_adjacent: false,
        truncated: set.truncated,
        paths,
        log_a,
    })
}

/// `A_0` and `A_1` for `new_obs` given the earlier observations `prefix`,
/// with the per-path breakdown.
pub fn observation_evidence(
    model: &SpreadModel,
    graph: &SocialGraph,
    source: NodeId,
    prefix: &[Observation],
    new_obs: Observation,
    cfg: &DetectorConfig,
) -> Result<Evidence, InferenceError> {
    let mut powers = PowerCache::new(model);
    evidence_with(
        model,
        graph,
        source,
        &Prefix::from_slice(prefix),
        new_obs,
        prefix.len(),
        cfg,
        &mut powers,
    )
}

/// `A_h(Z_l | F_{l-1})`.
pub fn conditional_obs_prob(
    model: &SpreadModel,
    graph: &SocialGraph,
    source: NodeId,
    prefix: &[Observation],
    new_obs: Observation,
    cfg: &DetectorConfig,
    h: Hypothesis,
) -> Result<f64, InferenceError> {
    Ok(observation_evidence(model, graph, source, prefix, new_obs, cfg)?.a(h))
}

/// Incremental detector state for one stream.
pub struct PosteriorEngine<'a> {
    model: &'a SpreadModel,
    graph: &'a SocialGraph,
    source: NodeId,
    cfg: DetectorConfig,
    powers: PowerCache,
    prefix: Prefix,
    belief: BeliefState,
    offered: usize,
    skipped: Vec<usize>,
}

impl<'a> PosteriorEngine<'a> {
    pub fn new(model: &'a SpreadModel, graph: &'a SocialGraph, source: NodeId, cfg: DetectorConfig) -> Self {
        PosteriorEngine {
            model,
            graph,
            source,
            cfg,
            powers: PowerCache::new(model),
            prefix: Prefix::default(),
            belief: BeliefState::new(model.prior_fake()).expect("model prior validated"),
            offered: 0,
            skipped: Vec::new(),
        }
    }

    pub fn belief(&self) -> &BeliefState {
        &self.belief
    }

    pub fn into_belief(self) -> BeliefState {
        self.belief
    }

    /// Stream indices of observations dropped as unreachable.
    pub fn skipped(&self) -> &[usize] {
        &self.skipped
    }

    /// Evidence for a candidate next observation without absorbing it.
    pub fn evidence(&mut self, obs: Observation) -> Result<Evidence, InferenceError> {
        evidence_with(
            self.model,
            self.graph,
            self.source,
            &self.prefix,
            obs,
            self.offered,
            &self.cfg,
            &mut self.powers,
        )
    }

    /// Absorbs the next observation. Returns `None` when it was skipped as
    /// unreachable.
    pub fn observe(&mut self, obs: Observation) -> Result<Option<StepRecord>, InferenceError> {
        let index = self.offered;
        self.offered += 1;
        let ev = match evidence_with(
            self.model,
            self.graph,
            self.source,
            &self.prefix,
            obs,
            index,
            &self.cfg,
            &mut self.powers,
        ) {
            Ok(ev) => ev,
            Err(InferenceError::Unreachable { edge, .. }) if self.cfg.unreachable == UnreachablePolicy::Skip => {
                log::debug!("skipping unreachable observation {index} on edge {edge}");
                self.skipped.push(index);
                return Ok(None);
            }
            Err(e) => return Err(e),
        };
        self.belief = self.belief.update_log(ev.log_a[0], ev.log_a[1], index)?;
        self.prefix.push(obs);
        Ok(self.belief.history.last().copied())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorRun {
    pub belief: BeliefState,
    pub skipped: Vec<usize>,
}

impl PosteriorRun {
    pub fn final_posterior(&self) -> f64 {
        self.belief.posterior
    }
}

/// Runs the recursion over a whole stream.
pub fn run_posterior(
    model: &SpreadModel,
    graph: &SocialGraph,
    stream: &ObservationStream,
    cfg: &DetectorConfig,
) -> Result<PosteriorRun, InferenceError> {
    if stream.is_empty() {
        return Err(InferenceError::EmptyStream);
    }
    let mut engine = PosteriorEngine::new(model, graph, stream.source, *cfg);
    for &o in &stream.observations {
        engine.observe(o)?;
    }
    let skipped = engine.skipped.clone();
    Ok(PosteriorRun {
        belief: engine.into_belief(),
        skipped,
    })
}

/// Writes `ℓ,A0,A1,posterior,log_lr` rows, one per absorbed observation.
pub fn write_trajectory_csv<W: Write>(mut w: W, belief: &BeliefState) -> std::io::Result<()> {
    writeln!(w, "ℓ,A0,A1,posterior,log_lr")?;
    for r in &belief.history {
        writeln!(w, "{},{},{},{},{}", r.step, r.a0, r.a1, r.posterior, r.log_lr)?;
    }
    Ok(())
}
