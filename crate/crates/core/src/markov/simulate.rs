//! Generative counterpart of the detection model.
//!
//! A cascade grows breadth-first from the source. Every infected user passes
//! the item to a bounded-geometric number of followers; the class of a
//! source-adjacent edge is drawn from `eta`, the class of any other edge from
//! `alpha(. | class of the edge that infected its followee)`. Each physical
//! edge is traversed at most once, so paths sharing an edge share its class.

use std::collections::{HashSet, VecDeque};

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::model::SpreadModel;
use super::trace::{Observation, ObservationStream, Trace, TraceEvent};
use crate::graph::{Edge, GraphError, NodeId, SocialGraph};
use crate::rng::{rng_from_seed, DetRng};
use crate::Hypothesis;

#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    #[error("source {0} has no followers to start a cascade")]
    EmptyFrontier(NodeId),
    #[error("invalid growth configuration: {0}")]
    Config(String),
    #[error("cannot subsample an empty trace")]
    EmptyTrace,
    #[error(transparent)]
    Graph(#[from] GraphError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Topology {
    /// Bounded-geometric branching.
    Tree,
    /// Exactly one follower per user: a single path from the source.
    Chain,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GrowthConfig {
    /// Mean of the (unbounded) geometric number of retweeting followers.
    pub mean_branching: f64,
    /// Hard cap on followers per user.
    pub max_children: usize,
    pub max_events: usize,
    pub topology: Topology,
}

impl Default for GrowthConfig {
    fn default() -> Self {
        GrowthConfig {
            mean_branching: 1.6,
            max_children: 10,
            max_events: 200,
            topology: Topology::Tree,
        }
    }
}

impl GrowthConfig {
    pub fn chain(max_events: usize) -> Self {
        GrowthConfig {
            max_events,
            topology: Topology::Chain,
            ..GrowthConfig::default()
        }
    }

    fn check(&self) -> Result<(), SimError> {
        if self.max_events == 0 {
            return Err(SimError::Config("max_events must be at least 1".into()));
        }
        if !(self.mean_branching > 0.0 && self.mean_branching.is_finite()) {
            return Err(SimError::Config("mean_branching must be positive".into()));
        }
        if self.max_children == 0 {
            return Err(SimError::Config("max_children must be at least 1".into()));
        }
        Ok(())
    }

    fn draw_children(&self, rng: &mut DetRng, is_source: bool) -> usize {
        let k = match self.topology {
            Topology::Chain => 1,
            Topology::Tree => {
                let p = 1.0 / (1.0 + self.mean_branching);
                let mut k = 0;
                while k < self.max_children && rng.random::<f64>() >= p {
                    k += 1;
                }
                k
            }
        };
        if is_source {
            k.max(1)
        } else {
            k
        }
    }
}

/// Node features for synthetic cascades: the follower of an edge of class
/// `z` gets features centred on `separation * z / (Z - 1)` in every
/// dimension, plus Gaussian noise. Sources are centred on zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeatureConfig {
    pub dim: usize,
    pub separation: f64,
    pub noise: f64,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            dim: 2,
            separation: 2.0,
            noise: 0.5,
        }
    }
}

fn draw_class(rng: &mut DetRng, probs: &[f64]) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    // Rounding left a sliver above the last cumulative sum.
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(probs.len() - 1)
}

fn edge_class(model: &SpreadModel, label: Hypothesis, parent_class: Option<usize>, rng: &mut DetRng) -> usize {
    match parent_class {
        None => draw_class(rng, model.eta(label)),
        Some(z) => draw_class(rng, model.alpha(label).row(z)),
    }
}

/// Samples a cascade over an existing graph from `source`.
pub fn sample_trace(
    graph: &SocialGraph,
    source: NodeId,
    model: &SpreadModel,
    label: Hypothesis,
    seed: u64,
    growth: &GrowthConfig,
) -> Result<Trace, SimError> {
    growth.check()?;
    if !graph.contains(source) {
        return Err(GraphError::MissingNode(source).into());
    }
    if graph.followers(source).next().is_none() {
        return Err(SimError::EmptyFrontier(source));
    }
    let mut rng = rng_from_seed(seed);
    let mut infected: HashSet<NodeId> = HashSet::from([source]);
    // (node, edge that infected it, that edge's class)
    let mut frontier: VecDeque<(NodeId, Option<(Edge, usize)>)> = VecDeque::from([(source, None)]);
    let mut events = Vec::new();
    while let Some((u, incoming)) = frontier.pop_front() {
        if events.len() >= growth.max_events {
            break;
        }
        let mut candidates: Vec<NodeId> = graph.followers(u).filter(|v| !infected.contains(v)).collect();
        let k = growth.draw_children(&mut rng, incoming.is_none()).min(candidates.len());
        for i in 0..k {
            let j = rng.random_range(i..candidates.len());
            candidates.swap(i, j);
        }
        for &v in &candidates[..k] {
            if events.len() >= growth.max_events {
                break;
            }
            infected.insert(v);
            let edge = Edge::new(u, v);
            let class = edge_class(model, label, incoming.map(|(_, c)| c), &mut rng);
            events.push(TraceEvent {
                edge,
                class,
                parent: incoming.map(|(e, _)| e),
            });
            frontier.push_back((v, Some((edge, class))));
        }
    }
    Ok(Trace {
        label: Some(label),
        source,
        events,
    })
}

/// A synthetic cascade together with the graph it implies.
#[derive(Debug, Clone)]
pub struct SyntheticCascade {
    pub graph: SocialGraph,
    pub trace: Trace,
}

/// Grows a fresh tree (or chain) cascade whose nodes are numbered from
/// `first_id` upward, source first.
pub fn sample_synthetic_cascade(
    model: &SpreadModel,
    label: Hypothesis,
    seed: u64,
    growth: &GrowthConfig,
    features: &FeatureConfig,
    first_id: NodeId,
) -> Result<SyntheticCascade, SimError> {
    growth.check()?;
    let mut rng = rng_from_seed(seed);
    let noise = Normal::new(0.0, features.noise.max(0.0)).map_err(|e| SimError::Config(e.to_string()))?;
    let z_max = (model.num_classes() - 1) as f64;
    let feature_vec = |rng: &mut DetRng, class: Option<usize>| -> Vec<f64> {
        let centre = class.map_or(0.0, |z| features.separation * z as f64 / z_max);
        (0..features.dim).map(|_| centre + noise.sample(rng)).collect()
    };

    let mut graph = SocialGraph::new();
    let source = first_id;
    let f = feature_vec(&mut rng, None);
    graph.add_node(source, f)?;
    let mut next_id = first_id + 1;
    let mut frontier: VecDeque<(NodeId, Option<(Edge, usize)>)> = VecDeque::from([(source, None)]);
    let mut events = Vec::new();
    while let Some((u, incoming)) = frontier.pop_front() {
        if events.len() >= growth.max_events {
            break;
        }
        let k = growth.draw_children(&mut rng, incoming.is_none());
        for _ in 0..k {
            if events.len() >= growth.max_events {
                break;
            }
            let v = next_id;
            next_id += 1;
            let edge = Edge::new(u, v);
            let class = edge_class(model, label, incoming.map(|(_, c)| c), &mut rng);
            let f = feature_vec(&mut rng, Some(class));
            graph.add_node(v, f)?;
            graph.add_edge(u, v)?;
            events.push(TraceEvent {
                edge,
                class,
                parent: incoming.map(|(e, _)| e),
            });
            frontier.push_back((v, Some((edge, class))));
        }
    }
    Ok(SyntheticCascade {
        graph,
        trace: Trace {
            label: Some(label),
            source,
            events,
        },
    })
}

/// Keeps each event independently with probability `keep_fraction`,
/// preserving order and dropping parent pointers. If nothing survives the
/// draw is repeated, so the stream always has at least one observation.
pub fn subsample(trace: &Trace, keep_fraction: f64, seed: u64) -> Result<ObservationStream, SimError> {
    if trace.is_empty() {
        return Err(SimError::EmptyTrace);
    }
    if !(keep_fraction > 0.0 && keep_fraction <= 1.0) {
        return Err(SimError::Config(format!("keep fraction {keep_fraction} not in (0, 1]")));
    }
    if keep_fraction == 1.0 {
        return Ok(trace.to_stream());
    }
    let mut rng = rng_from_seed(seed);
    const MAX_REDRAWS: usize = 10_000;
    for _ in 0..MAX_REDRAWS {
        let observations: Vec<Observation> = trace
            .events
            .iter()
            .filter(|_| rng.random::<f64>() < keep_fraction)
            .map(|e| Observation {
                edge: e.edge,
                class: e.class,
            })
            .collect();
        if !observations.is_empty() {
            return Ok(ObservationStream {
                source: trace.source,
                observations,
            });
        }
    }
    let e = trace.events[rng.random_range(0..trace.len())];
    Ok(ObservationStream {
        source: trace.source,
        observations: vec![Observation {
            edge: e.edge,
            class: e.class,
        }],
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn identity_model() -> SpreadModel {
        SpreadModel::new(
            [vec![0.25; 4], vec![0.25; 4]],
            [
                (0..4).map(|i| (0..4).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect(),
                (0..4).map(|i| (0..4).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect(),
            ],
            0.5,
        )
        .unwrap()
    }

    fn chain_graph(n: u64) -> SocialGraph {
        let mut g = SocialGraph::new();
        for i in 0..n {
            g.add_node(i, vec![]).unwrap();
        }
        for i in 1..n {
            g.add_edge(i - 1, i).unwrap();
        }
        g
    }

    #[test]
    fn identity_chain_keeps_first_class() {
        let m = identity_model();
        let g = chain_graph(10);
        for seed in 0..20 {
            let t = sample_trace(&g, 0, &m, Hypothesis::Fake, seed, &GrowthConfig::chain(200)).unwrap();
            assert_eq!(t.len(), 9);
            assert!(t.events.iter().all(|e| e.class == t.events[0].class));
            t.validate().unwrap();
        }
    }

    #[test]
    fn deterministic_alternation() {
        let m = SpreadModel::new(
            [vec![1.0, 0.0], vec![1.0, 0.0]],
            [vec![vec![0.0, 1.0], vec![1.0, 0.0]], vec![vec![0.0, 1.0], vec![1.0, 0.0]]],
            0.5,
        )
        .unwrap();
        let g = chain_graph(4);
        let t = sample_trace(&g, 0, &m, Hypothesis::Genuine, 1, &GrowthConfig::chain(200)).unwrap();
        let classes: Vec<_> = t.events.iter().map(|e| e.class).collect();
        assert_eq!(classes, vec![0, 1, 0]);
    }

    #[test]
    fn isolated_source_errors() {
        let mut g = chain_graph(3);
        g.add_node(99, vec![]).unwrap();
        let m = identity_model();
        assert_eq!(
            sample_trace(&g, 99, &m, Hypothesis::Fake, 0, &GrowthConfig::default()),
            Err(SimError::EmptyFrontier(99))
        );
    }

    #[test]
    fn synthetic_tree_is_valid_and_seeded() {
        let m = SpreadModel::weibo_z4();
        let growth = GrowthConfig::default();
        let a = sample_synthetic_cascade(&m, Hypothesis::Fake, 5, &growth, &FeatureConfig::default(), 100).unwrap();
        let b = sample_synthetic_cascade(&m, Hypothesis::Fake, 5, &growth, &FeatureConfig::default(), 100).unwrap();
        assert_eq!(a.trace, b.trace);
        a.trace.validate().unwrap();
        a.trace.check_graph(&a.graph).unwrap();
        assert!(a.trace.len() <= growth.max_events && !a.trace.is_empty());
        assert_eq!(a.graph.node_count(), a.trace.len() + 1);
    }

    #[test]
    fn chain_topology_fills_max_events() {
        let m = SpreadModel::weibo_z4();
        let c = sample_synthetic_cascade(
            &m,
            Hypothesis::Genuine,
            3,
            &GrowthConfig::chain(50),
            &FeatureConfig::default(),
            0,
        )
        .unwrap();
        assert_eq!(c.trace.len(), 50);
        for w in c.trace.events.windows(2) {
            assert_eq!(w[1].parent, Some(w[0].edge));
        }
    }

    #[test]
    fn subsample_full_and_single() {
        let m = SpreadModel::weibo_z4();
        let c = sample_synthetic_cascade(&m, Hypothesis::Fake, 9, &GrowthConfig::chain(20), &FeatureConfig::default(), 0)
            .unwrap();
        let s = subsample(&c.trace, 1.0, 0).unwrap();
        assert_eq!(s, c.trace.to_stream());

        let single = Trace {
            label: None,
            source: 0,
            events: vec![c.trace.events[0]],
        };
        for seed in 0..50 {
            assert_eq!(subsample(&single, 0.05, seed).unwrap().len(), 1);
        }
        assert_eq!(subsample(&Trace { events: vec![], ..single.clone() }, 0.5, 0), Err(SimError::EmptyTrace));
    }

    #[test]
    fn subsample_preserves_order() {
        let m = SpreadModel::weibo_z4();
        let c = sample_synthetic_cascade(&m, Hypothesis::Fake, 2, &GrowthConfig::chain(100), &FeatureConfig::default(), 0)
            .unwrap();
        let s = subsample(&c.trace, 0.5, 11).unwrap();
        let positions: Vec<usize> = s
            .observations
            .iter()
            .map(|o| c.trace.events.iter().position(|e| e.edge == o.edge).unwrap())
            .collect();
        assert!(positions.windows(2).all(|w| w[0] < w[1]));
    }
}
