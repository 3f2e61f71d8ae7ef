//! Offline training: trace features, the linear edge classifier, score
//! binning and estimation of the chain parameters from labeled traces.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{NodeId, SocialGraph};
use crate::markov::{ClassifierSection, ModelFile, StandardizeSection, Trace};
use crate::rng::rng_from_seed;
use crate::Hypothesis;

#[derive(Debug, Error, PartialEq)]
pub enum OfflineError {
    #[error("trace has {0} users; at least 2 are needed")]
    TooShort(usize),
    #[error("node {0} has no features in the graph")]
    MissingNode(NodeId),
    #[error("feature dimension {got} does not match {expected}")]
    Dimension { expected: usize, got: usize },
    #[error("training data contains only {0:?} examples")]
    SingleClass(Hypothesis),
    #[error("no training data")]
    Empty,
    #[error("no source-adjacent edges in {0:?} traces")]
    NoSourceEdges(Hypothesis),
    #[error("no parent-child edge pairs in {0:?} traces")]
    NoTransitions(Hypothesis),
    #[error("classes for trace {0} do not match its events")]
    ClassShape(usize),
    #[error("class {class} out of range for {num_classes} classes")]
    ClassOutOfRange { class: usize, num_classes: usize },
}

/// How the followee/follower halves of the trace feature are filled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureMode {
    /// `(x_u, x_v)` per edge.
    #[default]
    Pair,
    /// `(x_u, x_u)` per edge.
    Literal,
}

fn node_features(graph: &SocialGraph, id: NodeId) -> Result<&[f64], OfflineError> {
    graph.features(id).ok_or(OfflineError::MissingNode(id))
}

/// Concatenated features of one edge.
pub fn edge_feature(graph: &SocialGraph, u: NodeId, v: NodeId, mode: FeatureMode) -> Result<Vec<f64>, OfflineError> {
    let xu = node_features(graph, u)?;
    let second = match mode {
        FeatureMode::Pair => node_features(graph, v)?,
        FeatureMode::Literal => xu,
    };
    Ok(xu.iter().chain(second).copied().collect())
}

/// Mean edge feature over a trace. A trace with `n` events involves `n + 1`
/// users and contributes `n` terms.
pub fn build_trace_feature(trace: &Trace, graph: &SocialGraph, mode: FeatureMode) -> Result<Vec<f64>, OfflineError> {
    if trace.events.is_empty() {
        return Err(OfflineError::TooShort(1));
    }
    let mut sum: Vec<f64> = Vec::new();
    for ev in &trace.events {
        let f = edge_feature(graph, ev.edge.from, ev.edge.to, mode)?;
        if sum.is_empty() {
            sum = vec![0.0; f.len()];
        } else if f.len() != sum.len() {
            return Err(OfflineError::Dimension {
                expected: sum.len(),
                got: f.len(),
            });
        }
        sum.iter_mut().zip(&f).for_each(|(s, x)| *s += x);
    }
    let n = trace.events.len() as f64;
    Ok(sum.into_iter().map(|s| s / n).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainHyper {
    pub epochs: usize,
    pub learning_rate: f64,
    pub lambda: f64,
    pub seed: u64,
    /// Standardize each feature dimension before training.
    pub standardize: bool,
}

impl Default for TrainHyper {
    fn default() -> Self {
        TrainHyper {
            epochs: 50,
            learning_rate: 0.01,
            lambda: 1e-4,
            seed: 0,
            standardize: false,
        }
    }
}

/// Linear separator over edge features with a calibrated score in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeClassifier {
    pub weights: Vec<f64>,
    pub bias: f64,
    /// Margins mapped to scores 0 and 1.
    pub calibration: [f64; 2],
    pub standardize: Option<(Vec<f64>, Vec<f64>)>,
    pub num_classes: usize,
}

/// Equal-interval binning of a score: `[0, 1/Z]` is class 0 and
/// `(k/Z, (k+1)/Z]` is class `k`.
pub fn bin_score(score: f64, num_classes: usize) -> usize {
    let c = (score.clamp(0.0, 1.0) * num_classes as f64).ceil() as usize;
    c.saturating_sub(1).min(num_classes - 1)
}

impl EdgeClassifier {
    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    pub fn margin(&self, x: &[f64]) -> Result<f64, OfflineError> {
        if x.len() != self.dim() {
            return Err(OfflineError::Dimension {
                expected: self.dim(),
                got: x.len(),
            });
        }
        let dot: f64 = match &self.standardize {
            None => self.weights.iter().zip(x).map(|(w, v)| w * v).sum(),
            Some((mean, scale)) => self
                .weights
                .iter()
                .zip(x)
                .zip(mean.iter().zip(scale))
                .map(|((w, v), (m, s))| w * (v - m) / s)
                .sum(),
        };
        Ok(dot + self.bias)
    }

    pub fn score(&self, x: &[f64]) -> Result<f64, OfflineError> {
        let [lo, hi] = self.calibration;
        Ok(((self.margin(x)? - lo) / (hi - lo)).clamp(0.0, 1.0))
    }

    pub fn to_section(&self) -> ClassifierSection {
        ClassifierSection {
            weights: self.weights.clone(),
            bias: self.bias,
            calibration: self.calibration,
            standardize: self.standardize.as_ref().map(|(mean, scale)| StandardizeSection {
                mean: mean.clone(),
                scale: scale.clone(),
            }),
        }
    }

    pub fn from_section(section: &ClassifierSection, num_classes: usize) -> Self {
        EdgeClassifier {
            weights: section.weights.clone(),
            bias: section.bias,
            calibration: section.calibration,
            standardize: section.standardize.as_ref().map(|s| (s.mean.clone(), s.scale.clone())),
            num_classes,
        }
    }
}

/// Class of edge `(u, v)` from the endpoint features.
pub fn classify_edge(classifier: &EdgeClassifier, x_u: &[f64], x_v: &[f64]) -> Result<usize, OfflineError> {
    let x: Vec<f64> = x_u.iter().chain(x_v).copied().collect();
    Ok(bin_score(classifier.score(&x)?, classifier.num_classes))
}

fn percentile(sorted: &[f64], q: f64) -> f64 {
    let rank = ((q * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    sorted[rank - 1]
}

/// Hinge-loss subgradient descent on `(feature, label)` pairs, fake = +1.
pub fn train_classifier(
    samples: &[(Vec<f64>, Hypothesis)],
    num_classes: usize,
    hyper: &TrainHyper,
) -> Result<EdgeClassifier, OfflineError> {
    let first = samples.first().ok_or(OfflineError::Empty)?;
    let d = first.0.len();
    if let Some((x, _)) = samples.iter().find(|(x, _)| x.len() != d) {
        return Err(OfflineError::Dimension {
            expected: d,
            got: x.len(),
        });
    }
    if samples.iter().all(|(_, l)| *l == first.1) {
        return Err(OfflineError::SingleClass(first.1));
    }

    let standardize = hyper.standardize.then(|| {
        let n = samples.len() as f64;
        let mean: Vec<f64> = (0..d).map(|j| samples.iter().map(|(x, _)| x[j]).sum::<f64>() / n).collect();
        let scale: Vec<f64> = (0..d)
            .map(|j| {
                let var = samples.iter().map(|(x, _)| (x[j] - mean[j]).powi(2)).sum::<f64>() / n;
                if var > 0.0 {
                    var.sqrt()
                } else {
                    1.0
                }
            })
            .collect();
        (mean, scale)
    });
    let xs: Vec<Vec<f64>> = samples
        .iter()
        .map(|(x, _)| match &standardize {
            None => x.clone(),
            Some((m, s)) => x.iter().zip(m.iter().zip(s)).map(|(v, (m, s))| (v - m) / s).collect(),
        })
        .collect();
    let ys: Vec<f64> = samples
        .iter()
        .map(|(_, l)| if *l == Hypothesis::Fake { 1.0 } else { -1.0 })
        .collect();

    let mut w = vec![0.0; d];
    let mut b = 0.0;
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut rng = rng_from_seed(hyper.seed);
    for epoch in 0..hyper.epochs {
        order.shuffle(&mut rng);
        let eta = hyper.learning_rate / (epoch + 1) as f64;
        for &i in &order {
            let m = ys[i] * (w.iter().zip(&xs[i]).map(|(a, x)| a * x).sum::<f64>() + b);
            let active = m < 1.0;
            for (wj, xj) in w.iter_mut().zip(&xs[i]) {
                let grad = hyper.lambda * *wj - if active { ys[i] * xj } else { 0.0 };
                *wj -= eta * grad;
            }
            if active {
                b += eta * ys[i];
            }
        }
    }

    let mut clf = EdgeClassifier {
        weights: w,
        bias: b,
        calibration: [0.0, 1.0],
        standardize,
        num_classes,
    };
    let mut margins: Vec<f64> = samples
        .iter()
        .map(|(x, _)| clf.margin(x).expect("dimension checked"))
        .collect();
    margins.sort_by(f64::total_cmp);
    let lo = percentile(&margins, 0.01);
    let mut hi = percentile(&margins, 0.99);
    if hi <= lo {
        hi = lo + 1.0;
    }
    clf.calibration = [lo, hi];
    Ok(clf)
}

/// Recorded class of every event, trace by trace.
pub fn recorded_classes(traces: &[Trace]) -> Vec<Vec<usize>> {
    traces.iter().map(|t| t.events.iter().map(|e| e.class).collect()).collect()
}

/// Classifier-assigned class of every event, trace by trace.
pub fn classify_traces(
    classifier: &EdgeClassifier,
    graph: &SocialGraph,
    traces: &[Trace],
) -> Result<Vec<Vec<usize>>, OfflineError> {
    traces
        .iter()
        .map(|t| {
            t.events
                .iter()
                .map(|e| {
                    classify_edge(
                        classifier,
                        node_features(graph, e.edge.from)?,
                        node_features(graph, e.edge.to)?,
                    )
                })
                .collect()
        })
        .collect()
}

fn check_classes(traces: &[Trace], classes: &[Vec<usize>], z: usize) -> Result<(), OfflineError> {
    if traces.len() != classes.len() {
        return Err(OfflineError::ClassShape(traces.len().min(classes.len())));
    }
    for (i, (t, c)) in traces.iter().zip(classes).enumerate() {
        if t.events.len() != c.len() {
            return Err(OfflineError::ClassShape(i));
        }
        if let Some(&class) = c.iter().find(|&&c| c >= z) {
            return Err(OfflineError::ClassOutOfRange { class, num_classes: z });
        }
    }
    Ok(())
}

fn normalize(counts: &[f64]) -> Vec<f64> {
    let s: f64 = counts.iter().sum();
    counts.iter().map(|c| c / s).collect()
}

/// Relative frequency of each class among source-adjacent edges, per label.
pub fn estimate_eta(
    traces: &[Trace],
    classes: &[Vec<usize>],
    num_classes: usize,
    smoothing: bool,
) -> Result<[Vec<f64>; 2], OfflineError> {
    check_classes(traces, classes, num_classes)?;
    let mut counts = [vec![0.0; num_classes], vec![0.0; num_classes]];
    let mut seen = [0usize; 2];
    for (t, c) in traces.iter().zip(classes) {
        let Some(label) = t.label else { continue };
        for (ev, &z) in t.events.iter().zip(c) {
            if ev.parent.is_none() {
                counts[label.index()][z] += 1.0;
                seen[label.index()] += 1;
            }
        }
    }
    for h in Hypothesis::BOTH {
        if seen[h.index()] == 0 {
            return Err(OfflineError::NoSourceEdges(h));
        }
        if smoothing {
            counts[h.index()].iter_mut().for_each(|c| *c += 1.0);
        }
    }
    Ok(counts.map(|c| normalize(&c)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlphaEstimate {
    pub alpha: [Vec<Vec<f64>>; 2],
    /// Rows with no parent occurrences, filled uniformly.
    pub empty_rows: Vec<(Hypothesis, usize)>,
}

/// Relative frequency of child classes given the parent edge's class, per
/// label. Source-adjacent edges are never children.
pub fn estimate_alpha(
    traces: &[Trace],
    classes: &[Vec<usize>],
    num_classes: usize,
    smoothing: bool,
) -> Result<AlphaEstimate, OfflineError> {
    check_classes(traces, classes, num_classes)?;
    let mut counts = [vec![vec![0.0; num_classes]; num_classes], vec![vec![0.0; num_classes]; num_classes]];
    let mut pairs = [0usize; 2];
    for (t, c) in traces.iter().zip(classes) {
        let Some(label) = t.label else { continue };
        let class_of: std::collections::HashMap<_, _> = t.events.iter().zip(c).map(|(e, &z)| (e.edge, z)).collect();
        for (ev, &z) in t.events.iter().zip(c) {
            if let Some(parent) = ev.parent {
                let zp = class_of[&parent];
                counts[label.index()][zp][z] += 1.0;
                pairs[label.index()] += 1;
            }
        }
    }
    let mut empty_rows = Vec::new();
    for h in Hypothesis::BOTH {
        if pairs[h.index()] == 0 {
            return Err(OfflineError::NoTransitions(h));
        }
        for (from, row) in counts[h.index()].iter_mut().enumerate() {
            if smoothing {
                row.iter_mut().for_each(|c| *c += 1.0);
            } else if row.iter().all(|&c| c == 0.0) {
                empty_rows.push((h, from));
                row.iter_mut().for_each(|c| *c = 1.0);
            }
        }
    }
    Ok(AlphaEstimate {
        alpha: counts.map(|m| m.iter().map(|r| normalize(r)).collect()),
        empty_rows,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainOptions {
    pub num_classes: usize,
    pub hyper: TrainHyper,
    pub feature_mode: FeatureMode,
    pub smoothing: bool,
    /// Estimate the chain parameters from classifier-assigned classes
    /// instead of the classes recorded in the traces.
    pub reclassify: bool,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions {
            num_classes: 4,
            hyper: TrainHyper::default(),
            feature_mode: FeatureMode::Pair,
            smoothing: false,
            reclassify: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub file: ModelFile,
    pub classifier: EdgeClassifier,
    pub empty_rows: Vec<(Hypothesis, usize)>,
    /// Traces skipped for being too short to featurize.
    pub skipped: usize,
}

/// Trains the classifier, estimates `eta`, `alpha` and the prior, and
/// assembles a model document.
pub fn train_model(traces: &[Trace], graph: &SocialGraph, opts: &TrainOptions) -> Result<TrainedModel, OfflineError> {
    let mut samples = Vec::new();
    let mut skipped = 0;
    for t in traces {
        let Some(label) = t.label else { continue };
        match build_trace_feature(t, graph, opts.feature_mode) {
            Ok(f) => samples.push((f, label)),
            Err(OfflineError::TooShort(_)) => skipped += 1,
            Err(e) => return Err(e),
        }
    }
    let classifier = train_classifier(&samples, opts.num_classes, &opts.hyper)?;
    let classes = if opts.reclassify {
        classify_traces(&classifier, graph, traces)?
    } else {
        recorded_classes(traces)
    };
    let [eta0, eta1] = estimate_eta(traces, &classes, opts.num_classes, opts.smoothing)?;
    let est = estimate_alpha(traces, &classes, opts.num_classes, opts.smoothing)?;
    let [alpha0, alpha1] = est.alpha;
    let labeled: Vec<Hypothesis> = traces.iter().filter_map(|t| t.label).collect();
    let prior_fake = labeled.iter().filter(|&&l| l == Hypothesis::Fake).count() as f64 / labeled.len() as f64;
    Ok(TrainedModel {
        file: ModelFile {
            z: opts.num_classes,
            eta0,
            eta1,
            alpha0,
            alpha1,
            prior_fake,
            classifier: Some(classifier.to_section()),
        },
        classifier,
        empty_rows: est.empty_rows,
        skipped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Edge;
    use crate::markov::TraceEvent;

    fn ev(u: NodeId, v: NodeId, class: usize, parent: Option<(NodeId, NodeId)>) -> TraceEvent {
        TraceEvent {
            edge: Edge::new(u, v),
            class,
            parent: parent.map(|(a, b)| Edge::new(a, b)),
        }
    }

    #[test]
    fn binning() {
        assert_eq!(bin_score(0.3, 4), 1);
        assert_eq!(bin_score(1.0, 4), 3);
        assert_eq!(bin_score(0.0, 4), 0);
        assert_eq!(bin_score(0.25, 4), 0);
        assert_eq!(bin_score(0.2500001, 4), 1);
        assert_eq!(bin_score(0.75, 4), 2);
    }

    #[test]
    fn trace_feature_average() {
        let mut g = SocialGraph::new();
        g.add_node(0, vec![1.0, 0.0]).unwrap();
        g.add_node(1, vec![0.0, 2.0]).unwrap();
        g.add_node(2, vec![4.0, 4.0]).unwrap();
        g.add_node(3, vec![-1.0, 1.0]).unwrap();
        g.add_edge(0, 1).unwrap();
        g.add_edge(1, 2).unwrap();
        g.add_edge(1, 3).unwrap();
        let t = Trace {
            label: Some(Hypothesis::Fake),
            source: 0,
            events: vec![ev(0, 1, 0, None), ev(1, 2, 0, Some((0, 1))), ev(1, 3, 0, Some((0, 1)))],
        };
        let f = build_trace_feature(&t, &g, FeatureMode::Pair).unwrap();
        let expect = [1.0 / 3.0, 4.0 / 3.0, 1.0, 7.0 / 3.0];
        for (a, b) in f.iter().zip(expect) {
            assert!((a - b).abs() < 1e-12);
        }
        let lit = build_trace_feature(&t, &g, FeatureMode::Literal).unwrap();
        assert_eq!(lit[..2], lit[2..]);

        let single = Trace {
            events: vec![ev(0, 1, 0, None)],
            ..t.clone()
        };
        assert_eq!(build_trace_feature(&single, &g, FeatureMode::Pair).unwrap(), vec![1.0, 0.0, 0.0, 2.0]);
        let empty = Trace { events: vec![], ..t };
        assert_eq!(build_trace_feature(&empty, &g, FeatureMode::Pair), Err(OfflineError::TooShort(1)));
    }

    fn toy() -> Vec<(Vec<f64>, Hypothesis)> {
        let mut v = Vec::new();
        for i in 0..20 {
            let t = i as f64 / 10.0;
            v.push((vec![1.0 + t, 1.0 - 0.3 * t], Hypothesis::Fake));
            v.push((vec![-1.0 - t, -1.0 + 0.2 * t], Hypothesis::Genuine));
        }
        v
    }

    #[test]
    fn separable_toy_is_learned() {
        let clf = train_classifier(&toy(), 4, &TrainHyper::default()).unwrap();
        for (x, l) in toy() {
            let m = clf.margin(&x).unwrap();
            assert_eq!(m > 0.0, l == Hypothesis::Fake);
        }
    }

    #[test]
    fn flipped_labels_negate_weights() {
        let a = train_classifier(&toy(), 4, &TrainHyper::default()).unwrap();
        let flipped: Vec<_> = toy().into_iter().map(|(x, l)| (x, l.flipped())).collect();
        let b = train_classifier(&flipped, 4, &TrainHyper::default()).unwrap();
        for (x, y) in a.weights.iter().zip(&b.weights) {
            assert_eq!(*x, -*y);
        }
        assert_eq!(a.bias, -b.bias);
    }

    #[test]
    fn single_class_rejected() {
        let one: Vec<_> = toy().into_iter().filter(|(_, l)| *l == Hypothesis::Fake).collect();
        assert_eq!(
            train_classifier(&one, 4, &TrainHyper::default()),
            Err(OfflineError::SingleClass(Hypothesis::Fake))
        );
    }

    #[test]
    fn eta_hand_count() {
        let fake = Trace {
            label: Some(Hypothesis::Fake),
            source: 0,
            events: vec![ev(0, 1, 3, None), ev(0, 2, 3, None), ev(0, 3, 0, None)],
        };
        let genuine = Trace {
            label: Some(Hypothesis::Genuine),
            source: 0,
            events: vec![ev(0, 1, 2, None)],
        };
        let traces = [fake, genuine];
        let eta = estimate_eta(&traces, &recorded_classes(&traces), 4, false).unwrap();
        assert_eq!(eta[1], vec![1.0 / 3.0, 0.0, 0.0, 2.0 / 3.0]);
        assert_eq!(eta[0], vec![0.0, 0.0, 1.0, 0.0]);
        let smooth = estimate_eta(&traces, &recorded_classes(&traces), 4, true).unwrap();
        assert_eq!(smooth[0], vec![0.2, 0.2, 0.4, 0.2]);
        assert_eq!(
            estimate_eta(&traces[..1], &recorded_classes(&traces[..1]), 4, false),
            Err(OfflineError::NoSourceEdges(Hypothesis::Genuine))
        );
    }

    #[test]
    fn alpha_chain_and_flags() {
        let chain = |label| Trace {
            label: Some(label),
            source: 0,
            events: vec![ev(0, 1, 3, None), ev(1, 2, 3, Some((0, 1))), ev(2, 3, 3, Some((1, 2)))],
        };
        let traces = [chain(Hypothesis::Fake), chain(Hypothesis::Genuine)];
        let est = estimate_alpha(&traces, &recorded_classes(&traces), 4, false).unwrap();
        assert_eq!(est.alpha[1][3], vec![0.0, 0.0, 0.0, 1.0]);
        assert_eq!(est.alpha[1][0], vec![0.25; 4]);
        assert_eq!(est.empty_rows.len(), 6);
        assert!(est.empty_rows.contains(&(Hypothesis::Fake, 0)));
        assert!(!est.empty_rows.contains(&(Hypothesis::Fake, 3)));
    }
}
