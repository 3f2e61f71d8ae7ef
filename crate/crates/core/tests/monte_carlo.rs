//! Seeded Monte Carlo checks of the simulator, estimator and detector.

#![allow(clippy::needless_range_loop)]

use rayon::prelude::*;

use misinfo::graph::PathEnumConfig;
use misinfo::inference::{run_posterior, DetectorConfig};
use misinfo::markov::{subsample, FeatureConfig, GrowthConfig, SpreadModel, Trace};
use misinfo::offline::{estimate_alpha, estimate_eta, recorded_classes, train_model, TrainOptions};
use misinfo::policy::{risk_estimate, CostSpec, Policy, RiskSetup, SprtConfig};
use misinfo::Hypothesis;

fn setup(growth: GrowthConfig, keep_fraction: f64) -> RiskSetup<'static> {
    RiskSetup {
        growth,
        features: FeatureConfig::default(),
        keep_fraction,
        detector: DetectorConfig::with_paths(PathEnumConfig::new(growth.max_events + 1, 16).unwrap()),
        graph: None,
    }
}

fn traces(model: &SpreadModel, s: &RiskSetup, n: u64, seed: u64, forced: Option<Hypothesis>) -> Vec<Trace> {
    (0..n)
        .into_par_iter()
        .map(|i| s.sample(model, seed, i, forced).unwrap().trace)
        .collect()
}

fn linf(model: &SpreadModel, traces: &[Trace]) -> f64 {
    let classes = recorded_classes(traces);
    let eta = estimate_eta(traces, &classes, 4, false).unwrap();
    let alpha = estimate_alpha(traces, &classes, 4, false).unwrap();
    let mut worst = 0.0f64;
    for h in Hypothesis::BOTH {
        for c in 0..4 {
            worst = worst.max((eta[h.index()][c] - model.eta(h)[c]).abs());
            for d in 0..4 {
                worst = worst.max((alpha.alpha[h.index()][c][d] - model.alpha(h).get(c, d)).abs());
            }
        }
    }
    worst
}

#[test]
fn first_event_class_follows_eta() {
    let model = SpreadModel::weibo_z4();
    let s = setup(GrowthConfig { max_events: 1, ..GrowthConfig::default() }, 1.0);
    for h in Hypothesis::BOTH {
        let ts = traces(&model, &s, 10_000, 31 + h.index() as u64, Some(h));
        let mut counts = [0.0; 4];
        for t in &ts {
            assert_eq!(t.len(), 1);
            counts[t.events[0].class] += 1.0;
        }
        let chi2: f64 = (0..4)
            .map(|c| {
                let e = 10_000.0 * model.eta(h)[c];
                (counts[c] - e).powi(2) / e
            })
            .sum();
        // 99.9% quantile of chi-square with 3 degrees of freedom.
        assert!(chi2 < 16.27, "{h:?}: chi2 = {chi2}, counts {counts:?}");
    }
}

#[test]
fn half_subsampling_keeps_half() {
    let model = SpreadModel::weibo_z4();
    let s = setup(GrowthConfig::chain(100), 1.0);
    let trace = s.sample(&model, 3, 0, None).unwrap().trace;
    assert_eq!(trace.len(), 100);
    let n = 4000;
    let kept: Vec<f64> = (0..n).map(|i| subsample(&trace, 0.5, i).unwrap().len() as f64).collect();
    let mean = kept.iter().sum::<f64>() / n as f64;
    let se = (25.0 / n as f64).sqrt();
    assert!((mean - 50.0).abs() <= 3.0 * se, "mean kept {mean}");
}

#[test]
fn long_chain_transitions_converge_to_alpha() {
    let model = SpreadModel::weibo_z4();
    let s = setup(GrowthConfig::chain(20_001), 1.0);
    for h in Hypothesis::BOTH {
        let t = s.sample(&model, 41, h.index() as u64, Some(h)).unwrap().trace;
        let mut counts = [[0.0; 4]; 4];
        for w in t.events.windows(2) {
            counts[w[0].class][w[1].class] += 1.0;
        }
        let mut worst = 0.0f64;
        for (c, row) in counts.iter().enumerate() {
            let total: f64 = row.iter().sum();
            if total == 0.0 {
                continue;
            }
            for d in 0..4 {
                worst = worst.max((row[d] / total - model.alpha(h).get(c, d)).abs());
            }
        }
        assert!(worst <= 0.05, "{h:?}: L_inf {worst}");
    }
}

#[test]
fn fake_streams_reach_high_posterior_by_eight() {
    let model = SpreadModel::weibo_z4();
    let s = setup(GrowthConfig::default(), 0.5);
    let n = 2000;
    let hits: Vec<bool> = (0..n as u64)
        .into_par_iter()
        .filter_map(|i| {
            let sample = s.sample(&model, 51, i, Some(Hypothesis::Fake)).unwrap();
            let run = run_posterior(&model, sample.graph(&s), &sample.stream, &s.detector).unwrap();
            run.belief.posteriors().get(7).map(|&p| p > 0.99)
        })
        .collect();
    let frac = hits.iter().filter(|&&h| h).count() as f64 / hits.len() as f64;
    assert!(hits.len() > n / 2);
    assert!(frac >= 0.9, "fraction above 0.99 at step 8: {frac} over {} traces", hits.len());
}

#[test]
fn mixture_labels_follow_prior() {
    let model = SpreadModel::weibo_z4();
    let s = setup(GrowthConfig::chain(1), 1.0);
    let n = 10_000u64;
    let fake = (0..n)
        .filter(|&i| s.sample(&model, 61, i, None).unwrap().label == Hypothesis::Fake)
        .count() as f64;
    let se = (0.25 / n as f64).sqrt();
    assert!((fake / n as f64 - 0.5).abs() <= 3.0 * se, "fake fraction {}", fake / n as f64);
}

#[test]
fn tighter_boundaries_do_not_raise_error_rates() {
    let model = SpreadModel::weibo_z4();
    let s = setup(GrowthConfig::chain(200), 0.5);
    let costs = CostSpec::default();
    let run = |p: f64| {
        let policy = Policy::Sprt {
            config: SprtConfig::from_error_targets(p, p).unwrap(),
        };
        risk_estimate(&policy, &model, &costs, &s, 4000, 71).unwrap()
    };
    let loose = run(0.2);
    let tight = run(0.01);
    let noise = 3.0 * (loose.se_pe1.powi(2) + loose.se_pe2.powi(2)).sqrt();
    assert!(
        tight.pe1 + tight.pe2 <= loose.pe1 + loose.pe2 + noise,
        "tight {} + {} vs loose {} + {}",
        tight.pe1,
        tight.pe2,
        loose.pe1,
        loose.pe2
    );
    assert!(tight.mean_steps >= loose.mean_steps);
}

#[test]
fn recovery_error_shrinks_with_more_traces() {
    let model = SpreadModel::weibo_z4();
    let s = setup(GrowthConfig::default(), 1.0);
    let small = linf(&model, &traces(&model, &s, 250, 81, None));
    let large = linf(&model, &traces(&model, &s, 1000, 82, None));
    assert!(large <= small + 0.005, "L_inf {small} at 250 traces, {large} at 1000");
    assert!(large <= 0.05);
}

#[test]
fn classifier_scores_separate_labels() {
    let model = SpreadModel::weibo_z4();
    let s = setup(GrowthConfig { max_events: 40, ..GrowthConfig::default() }, 1.0);
    let samples: Vec<_> = (0..400u64).map(|i| s.sample(&model, 91, i, None).unwrap()).collect();
    // Union graph with disjoint ids.
    let mut graph = misinfo::SocialGraph::new();
    let mut all = Vec::new();
    let mut offset = 0;
    for smp in &samples {
        let g = smp.cascade_graph.as_ref().unwrap();
        for v in g.nodes() {
            graph.add_node(v + offset, g.features(v).unwrap().to_vec()).unwrap();
        }
        for e in g.edges() {
            graph.add_edge(e.from + offset, e.to + offset).unwrap();
        }
        let shift = |e: misinfo::Edge| misinfo::Edge::new(e.from + offset, e.to + offset);
        let mut t = smp.trace.clone();
        t.source += offset;
        for ev in &mut t.events {
            ev.edge = shift(ev.edge);
            ev.parent = ev.parent.map(shift);
        }
        all.push(t);
        offset += g.node_count() as u64;
    }
    let trained = train_model(&all, &graph, &TrainOptions::default()).unwrap();
    let mut scores = [Vec::new(), Vec::new()];
    for t in &all {
        for ev in &t.events {
            let x: Vec<f64> = [graph.features(ev.edge.from).unwrap(), graph.features(ev.edge.to).unwrap()].concat();
            scores[t.label.unwrap().index()].push(trained.classifier.score(&x).unwrap());
        }
    }
    let mean = |v: &Vec<f64>| v.iter().sum::<f64>() / v.len() as f64;
    let low = |v: &Vec<f64>| v.iter().filter(|&&s| s <= 0.25).count() as f64 / v.len() as f64;
    let high = |v: &Vec<f64>| v.iter().filter(|&&s| s > 0.75).count() as f64 / v.len() as f64;
    let (g0, g1) = (&scores[0], &scores[1]);
    assert!(mean(g0) < mean(g1), "mean score genuine {} fake {}", mean(g0), mean(g1));
    assert!(low(g0) > low(g1) && high(g1) > high(g0));
}

#[test]
fn typical_streams_get_the_right_verdict() {
    let model = SpreadModel::weibo_z4();
    let s = setup(GrowthConfig::default(), 0.5);
    let costs = CostSpec::default();
    let policy = Policy::Convergence {
        epsilon: 0.001,
        threshold: costs.break_even(),
    };
    for h in Hypothesis::BOTH {
        let outcomes: Vec<_> = (0..400u64)
            .into_par_iter()
            .map(|i| {
                let sample = s.sample(&model, 101, i, Some(h)).unwrap();
                let run = run_posterior(&model, sample.graph(&s), &sample.stream, &s.detector).unwrap();
                policy.decide(&run.belief, &costs, None).unwrap()
            })
            .collect();
        let right = outcomes.iter().filter(|o| o.verdict == h).count();
        assert!(right * 2 > outcomes.len(), "{h:?}: {right} of {}", outcomes.len());
        if h == Hypothesis::Fake {
            let mut steps: Vec<usize> = outcomes.iter().filter(|o| o.verdict == h).map(|o| o.stopping_step).collect();
            steps.sort_unstable();
            let median = steps[steps.len() / 2];
            assert!(median <= 10, "median stopping step on fake traces {median}");
        }
    }
}
