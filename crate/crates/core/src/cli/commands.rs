use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::config::{PolicyKind, RunConfig, SplitPart};
use super::{read_to_string, CliError, CommonArgs, DetectArgs, EvalArgs, SimulateArgs, ThresholdArgs, TrainArgs};
use crate::graph::{GraphError, SocialGraph};
use crate::inference::{run_posterior, InferenceError, PosteriorRun};
use crate::markov::{read_traces, subsample, write_traces, ModelFile, SimError, SpreadModel, Trace, TraceError};
use crate::offline::{train_model, FeatureMode, OfflineError, TrainedModel};
use crate::policy::{
    bayes_decision, solve_thresholds, DecisionOutcome, Policy, RiskSetup, SinglePathModel, SprtConfig, StopRule,
    ThresholdSolution,
};
use crate::rng::{derive_seed, rng_from_seed};
use crate::Hypothesis;

const SPLIT_STREAM: u64 = 0x5EED_5917;

fn sim_error(e: SimError) -> CliError {
    match e {
        SimError::Config(m) => CliError::Usage(m),
        other => CliError::Degenerate(other.to_string()),
    }
}

fn graph_error(e: GraphError) -> CliError {
    match e {
        GraphError::Io(m) => CliError::Io(m),
        other => CliError::Parse(other.to_string()),
    }
}

fn trace_error(e: TraceError) -> CliError {
    match e {
        TraceError::Io(m) => CliError::Io(m),
        other => CliError::Parse(format!("traces: {other}")),
    }
}

fn inference_error(e: InferenceError, trace: usize) -> CliError {
    match e {
        InferenceError::MissingEdge { .. } | InferenceError::ClassOutOfRange { .. } | InferenceError::Repeated { .. } => {
            CliError::Parse(format!("trace {trace}: {e}"))
        }
        _ => CliError::Degenerate(format!("trace {trace}: {e}")),
    }
}

fn offline_error(e: OfflineError) -> CliError {
    match e {
        OfflineError::SingleClass(_)
        | OfflineError::Empty
        | OfflineError::NoSourceEdges(_)
        | OfflineError::NoTransitions(_) => CliError::Degenerate(e.to_string()),
        other => CliError::Parse(other.to_string()),
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn require(p: Option<PathBuf>, flag: &str) -> Result<PathBuf, CliError> {
    p.ok_or_else(|| CliError::Usage(format!("{flag} is required")))
}

fn load_model(common: &CommonArgs) -> Result<SpreadModel, CliError> {
    match &common.model {
        None => Ok(SpreadModel::weibo_z4()),
        Some(p) => {
            let file = ModelFile::from_json(&read_to_string(p)?).map_err(|e| CliError::Parse(e.to_string()))?;
            SpreadModel::from_file_renormalized(&file).map_err(|e| CliError::Parse(format!("{}: {e}", p.display())))
        }
    }
}

fn load_graph(common: &CommonArgs, need_features: bool) -> Result<SocialGraph, CliError> {
    let edges = require(common.graph_path(), "--graph (or --data)")?;
    let open = |p: &Path| {
        File::open(p)
            .map(BufReader::new)
            .map_err(|e| CliError::Io(format!("{}: {e}", p.display())))
    };
    let nodes = match common.nodes_path() {
        Some(p) if p.exists() || common.nodes.is_some() => Some(open(&p)?),
        _ if need_features => return Err(CliError::Usage("--nodes (or --data) is required".into())),
        _ => None,
    };
    SocialGraph::read(nodes, open(&edges)?).map_err(graph_error)
}

fn load_traces(common: &CommonArgs) -> Result<Vec<Trace>, CliError> {
    let p = require(common.traces_path(), "--traces (or --data)")?;
    let f = File::open(&p).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))?;
    read_traces(BufReader::new(f)).map_err(trace_error)
}

/// Seeded split stratified by label: the first `round(train_fraction * n)`
/// of each shuffled label group go to training.
pub fn split_indices(traces: &[Trace], train_fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (g, label) in [None, Some(Hypothesis::Genuine), Some(Hypothesis::Fake)].into_iter().enumerate() {
        let mut group: Vec<usize> = (0..traces.len()).filter(|&i| traces[i].label == label).collect();
        group.shuffle(&mut rng_from_seed(derive_seed(seed, SPLIT_STREAM + g as u64)));
        let k = (train_fraction * group.len() as f64).round() as usize;
        train.extend_from_slice(&group[..k]);
        test.extend_from_slice(&group[k..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    (train, test)
}

fn select(traces: &[Trace], part: SplitPart, cfg: &RunConfig) -> Vec<usize> {
    match part {
        SplitPart::All => (0..traces.len()).collect(),
        SplitPart::Train => split_indices(traces, cfg.split[0], cfg.seed).0,
        SplitPart::Test => split_indices(traces, cfg.split[0], cfg.seed).1,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SimulateSummary {
    pub traces: usize,
    pub fake: usize,
    pub events: usize,
    pub nodes: usize,
}

fn shift_ids(graph: &SocialGraph, trace: &Trace, offset: u64, into: &mut SocialGraph) -> Result<Trace, CliError> {
    for id in graph.nodes() {
        let f = graph.features(id).expect("listed node").to_vec();
        into.add_node(id + offset, f).map_err(graph_error)?;
    }
    for e in graph.edges() {
        into.add_edge(e.from + offset, e.to + offset).map_err(graph_error)?;
    }
    let shift = |e: crate::graph::Edge| crate::graph::Edge::new(e.from + offset, e.to + offset);
    Ok(Trace {
        label: trace.label,
        source: trace.source + offset,
        events: trace
            .events
            .iter()
            .map(|ev| crate::markov::TraceEvent {
                edge: shift(ev.edge),
                class: ev.class,
                parent: ev.parent.map(shift),
            })
            .collect(),
    })
}

/// Samples labeled cascades and writes `edges.tsv`, `nodes.tsv` and
/// `traces.jsonl` under `--out`.
pub fn cmd_simulate(a: &SimulateArgs) -> Result<SimulateSummary, CliError> {
    let cfg = a.common.run_config()?;
    let model = load_model(&a.common)?;
    let out = require(a.common.out.clone(), "--out")?;
    let n = a.n.unwrap_or(cfg.n_traces);
    if n == 0 {
        return Err(CliError::Usage("--n must be at least 1".into()));
    }
    let forced = match a.label {
        None => None,
        Some(l) => Some(
            Hypothesis::from_index(l as usize).ok_or_else(|| CliError::Usage(format!("label {l} not in {{0,1}}")))?,
        ),
    };
    let mut growth = cfg.growth;
    if let Some(t) = a.topology {
        growth.topology = t.into();
    }
    if let Some(m) = a.max_events {
        growth.max_events = m;
    }
    if let Some(b) = a.branching {
        growth.mean_branching = b;
    }

    let base = RiskSetup {
        growth,
        features: cfg.features,
        keep_fraction: 1.0,
        detector: cfg.detector(),
        graph: None,
    };
    let (graph, traces) = match a.common.graph.as_ref() {
        None => {
            let samples: Vec<_> = (0..n as u64)
                .into_par_iter()
                .map(|i| base.sample(&model, cfg.seed, i, forced))
                .collect::<Result<_, _>>()
                .map_err(sim_error)?;
            let mut graph = SocialGraph::new();
            let mut traces = Vec::with_capacity(n);
            let mut offset = 0;
            for s in &samples {
                let g = s.cascade_graph.as_ref().expect("synthetic sample");
                traces.push(shift_ids(g, &s.trace, offset, &mut graph)?);
                offset += g.node_count() as u64;
            }
            (graph, traces)
        }
        Some(_) => {
            let graph = load_graph(&a.common, false)?;
            let sources: Vec<u64> = match a.source {
                Some(s) => vec![s],
                None => graph.nodes().filter(|&v| graph.followers(v).next().is_some()).collect(),
            };
            if sources.is_empty() {
                return Err(CliError::Degenerate("graph has no edges".into()));
            }
            let traces: Vec<Trace> = (0..n as u64)
                .into_par_iter()
                .map(|i| {
                    let pick = rng_from_seed(derive_seed(derive_seed(cfg.seed, i), 3)).random_range(0..sources.len());
                    let setup = RiskSetup {
                        graph: Some((&graph, sources[pick])),
                        ..base
                    };
                    setup.sample(&model, cfg.seed, i, forced).map(|s| s.trace)
                })
                .collect::<Result<_, _>>()
                .map_err(sim_error)?;
            (graph, traces)
        }
    };

    std::fs::create_dir_all(&out)?;
    let mut w = create(&out.join("edges.tsv"))?;
    graph.write_edge_list(&mut w).map_err(graph_error)?;
    w.flush()?;
    let mut w = create(&out.join("nodes.tsv"))?;
    graph.write_node_features(&mut w).map_err(graph_error)?;
    w.flush()?;
    let mut w = create(&out.join("traces.jsonl"))?;
    write_traces(&mut w, &traces).map_err(trace_error)?;
    w.flush()?;

    let summary = SimulateSummary {
        traces: traces.len(),
        fake: traces.iter().filter(|t| t.label == Some(Hypothesis::Fake)).count(),
        events: traces.iter().map(Trace::len).sum(),
        nodes: graph.node_count(),
    };
    log::info!(
        "simulated {} traces ({} fake, {} events) into {}",
        summary.traces,
        summary.fake,
        summary.events,
        out.display()
    );
    Ok(summary)
}

/// Trains a model on the selected part of a labeled corpus and writes it to
/// `--out`.
pub fn cmd_train(a: &TrainArgs) -> Result<TrainedModel, CliError> {
    let mut cfg = a.common.run_config()?;
    cfg.smoothing |= a.smoothing;
    cfg.reclassify |= a.reclassify;
    cfg.train.standardize |= a.standardize;
    if a.literal_features {
        cfg.feature_mode = FeatureMode::Literal;
    }
    if let Some(e) = a.epochs {
        cfg.train.epochs = e;
    }
    if let Some(lr) = a.lr {
        cfg.train.learning_rate = lr;
    }
    if let Some(l) = a.lambda {
        cfg.train.lambda = l;
    }
    let out = require(a.common.out.clone(), "--out")?;
    let graph = load_graph(&a.common, true)?;
    let traces = load_traces(&a.common)?;
    let chosen: Vec<Trace> = select(&traces, a.split, &cfg).into_iter().map(|i| traces[i].clone()).collect();
    let trained = train_model(&chosen, &graph, &cfg.train_options()).map_err(offline_error)?;
    for (h, row) in &trained.empty_rows {
        log::warn!("no {h:?} transitions out of class {row}; row set uniform");
    }
    let mut w = create(&out)?;
    w.write_all(trained.file.to_json().as_bytes())?;
    w.flush()?;
    log::info!("trained on {} traces, wrote {}", chosen.len(), out.display());
    Ok(trained)
}

fn build_policy(cfg: &RunConfig, model: &SpreadModel) -> Result<Policy, CliError> {
    Ok(match cfg.policy {
        PolicyKind::Dp => {
            let sol = solve(cfg, model)?;
            if !sol.converged {
                log::warn!("using thresholds from an unconverged solve");
            }
            Policy::Dp {
                thresholds: sol.thresholds(),
            }
        }
        PolicyKind::Sprt => Policy::Sprt {
            config: SprtConfig::from_error_targets(cfg.sprt_targets[0], cfg.sprt_targets[1])
                .map_err(|e| CliError::Usage(e.to_string()))?,
        },
        PolicyKind::Convergence => Policy::Convergence {
            epsilon: cfg.epsilon,
            threshold: cfg.decision_threshold(),
        },
        PolicyKind::Oracle => Policy::Oracle,
    })
}

fn solve(cfg: &RunConfig, model: &SpreadModel) -> Result<ThresholdSolution, CliError> {
    solve_thresholds(&cfg.costs, &SinglePathModel::new(model), &cfg.solver).map_err(|e| CliError::Usage(e.to_string()))
}

/// Observed part of trace `index`: its stream seed depends only on the
/// master seed and the index.
fn observe(
    trace: &Trace,
    index: usize,
    cfg: &RunConfig,
    model: &SpreadModel,
    graph: &SocialGraph,
) -> Result<(usize, PosteriorRun), CliError> {
    let stream = subsample(trace, cfg.keep_fraction, derive_seed(cfg.seed, index as u64))
        .map_err(|e| CliError::Usage(format!("trace {index}: {e}")))?;
    let run = run_posterior(model, graph, &stream, &cfg.detector()).map_err(|e| inference_error(e, index))?;
    if !run.skipped.is_empty() {
        log::warn!(
            "trace {index}: skipped {} of {} observations with no path from the source",
            run.skipped.len(),
            stream.len()
        );
    }
    Ok((stream.len(), run))
}

fn decision_posterior(run: &PosteriorRun, outcome: &DecisionOutcome) -> f64 {
    let h = &run.belief.history;
    if h.is_empty() {
        run.belief.prior
    } else {
        h[outcome.stopping_step.min(h.len()) - 1].posterior
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DetectRecord {
    #[serde(rename = "T")]
    pub stopping_step: usize,
    pub verdict: u8,
    pub rule_used: &'static str,
    /// Posterior at the stopping step.
    pub final_posterior: f64,
    pub observations: usize,
    pub absorbed: usize,
    pub skipped: usize,
    pub trajectory: Option<String>,
}

/// Runs the detector and the configured policy on trace `--index`.
pub fn cmd_detect(a: &DetectArgs) -> Result<DetectRecord, CliError> {
    let cfg = a.common.run_config()?;
    let model = load_model(&a.common)?;
    let graph = load_graph(&a.common, false)?;
    let traces = load_traces(&a.common)?;
    let trace = traces
        .get(a.index)
        .ok_or_else(|| CliError::Usage(format!("trace index {} out of range ({} traces)", a.index, traces.len())))?;
    if trace.is_empty() {
        return Err(CliError::Usage(format!("trace {} has no events to observe", a.index)));
    }
    let policy = build_policy(&cfg, &model)?;
    let (observations, run) = observe(trace, a.index, &cfg, &model, &graph)?;
    let outcome = policy
        .decide(&run.belief, &cfg.costs, trace.label)
        .ok_or_else(|| CliError::Usage("the oracle policy needs a labeled trace".into()))?;
    let mut record = DetectRecord {
        stopping_step: outcome.stopping_step,
        verdict: outcome.verdict.index() as u8,
        rule_used: outcome.rule.name(),
        final_posterior: decision_posterior(&run, &outcome),
        observations,
        absorbed: run.belief.step,
        skipped: run.skipped.len(),
        trajectory: None,
    };
    if let Some(out) = &a.common.out {
        std::fs::create_dir_all(out)?;
        let mut w = create(&out.join("trajectory.csv"))?;
        crate::inference::write_trajectory_csv(&mut w, &run.belief)?;
        w.flush()?;
        record.trajectory = Some("trajectory.csv".into());
        let mut w = create(&out.join("decision.json"))?;
        writeln!(w, "{}", serde_json::to_string_pretty(&record).expect("record serializes"))?;
        w.flush()?;
    }
    Ok(record)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct RuleBreakdown {
    pub count: usize,
    pub correct: usize,
    pub mean_events: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorBoundCheck {
    pub b_low: f64,
    pub b_up: f64,
    /// `Pe1 <= (1 - Pe2) / B_up` within three standard errors.
    pub pe1_bound_holds: bool,
    /// `Pe2 <= B_low (1 - Pe1)` within three standard errors.
    pub pe2_bound_holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub policy: PolicyKind,
    pub n: usize,
    pub n_genuine: usize,
    pub n_fake: usize,
    pub accuracy: f64,
    /// Genuine items declared fake / genuine items.
    pub fp: f64,
    /// Fake items declared genuine / fake items.
    #[serde(rename = "fn")]
    pub fn_rate: f64,
    pub se_fp: f64,
    pub se_fn: f64,
    pub mean_detection_events: f64,
    pub mean_events_genuine: f64,
    pub mean_events_fake: f64,
    pub per_rule: BTreeMap<&'static str, RuleBreakdown>,
    pub skipped_traces: usize,
    pub skipped_observations: usize,
    pub seed: u64,
    pub keep_fraction: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error_bounds: Option<ErrorBoundCheck>,
}

struct Row {
    index: usize,
    label: Hypothesis,
    outcome: DecisionOutcome,
    decision_posterior: f64,
    posteriors: Vec<f64>,
    prior: f64,
    observations: usize,
    skipped: usize,
}

fn rate(k: usize, n: usize) -> (f64, f64) {
    if n == 0 {
        return (0.0, 0.0);
    }
    let p = k as f64 / n as f64;
    (p, (p * (1.0 - p) / n as f64).sqrt())
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        0.0
    } else {
        s / n as f64
    }
}

/// Evaluates the configured policy on the selected labeled traces and writes
/// `report.json`, `per_trace.csv` and `accuracy_curve.csv` under `--out`.
pub fn cmd_eval(a: &EvalArgs) -> Result<EvalReport, CliError> {
    let cfg = a.common.run_config()?;
    let model = load_model(&a.common)?;
    let graph = load_graph(&a.common, false)?;
    let traces = load_traces(&a.common)?;
    let policy = build_policy(&cfg, &model)?;
    let mut skipped_traces = 0;
    let chosen: Vec<usize> = select(&traces, a.split, &cfg)
        .into_iter()
        .filter(|&i| {
            let keep = traces[i].label.is_some() && !traces[i].is_empty();
            if !keep {
                skipped_traces += 1;
            }
            keep
        })
        .collect();
    if skipped_traces > 0 {
        log::warn!("ignoring {skipped_traces} unlabeled or empty traces");
    }
    if chosen.is_empty() {
        return Err(CliError::Degenerate("no labeled traces to evaluate".into()));
    }
    let started = std::time::Instant::now();
    let rows: Vec<Row> = chosen
        .par_iter()
        .map(|&i| {
            let t = &traces[i];
            let label = t.label.expect("filtered");
            let (observations, run) = observe(t, i, &cfg, &model, &graph)?;
            let outcome = policy.decide(&run.belief, &cfg.costs, Some(label)).expect("label supplied");
            Ok(Row {
                index: i,
                label,
                decision_posterior: decision_posterior(&run, &outcome),
                outcome,
                posteriors: run.belief.posteriors(),
                prior: run.belief.prior,
                observations,
                skipped: run.skipped.len(),
            })
        })
        .collect::<Result<_, CliError>>()?;
    log::info!("evaluated {} traces in {:.2?}", rows.len(), started.elapsed());

    let count = |f: &dyn Fn(&Row) -> bool| rows.iter().filter(|r| f(r)).count();
    let n_genuine = count(&|r| r.label == Hypothesis::Genuine);
    let n_fake = rows.len() - n_genuine;
    let false_pos = count(&|r| r.label == Hypothesis::Genuine && r.outcome.verdict == Hypothesis::Fake);
    let false_neg = count(&|r| r.label == Hypothesis::Fake && r.outcome.verdict == Hypothesis::Genuine);
    let (fp, se_fp) = rate(false_pos, n_genuine);
    let (fn_rate, se_fn) = rate(false_neg, n_fake);
    let n = rows.len();
    let events = |h: Option<Hypothesis>| {
        mean(rows
            .iter()
            .filter(|r| h.is_none_or(|h| r.label == h))
            .map(|r| r.outcome.stopping_step as f64))
    };
    let mut per_rule: BTreeMap<&'static str, RuleBreakdown> = BTreeMap::new();
    for r in &rows {
        let b = per_rule.entry(r.outcome.rule.name()).or_default();
        b.count += 1;
        b.correct += usize::from(r.outcome.verdict == r.label);
        b.mean_events += r.outcome.stopping_step as f64;
    }
    per_rule.values_mut().for_each(|b| b.mean_events /= b.count as f64);
    let error_bounds = match policy {
        Policy::Sprt { config } => Some(ErrorBoundCheck {
            b_low: config.b_low,
            b_up: config.b_up,
            pe1_bound_holds: fp <= (1.0 - fn_rate) / config.b_up + 3.0 * se_fp,
            pe2_bound_holds: fn_rate <= config.b_low * (1.0 - fp) + 3.0 * se_fn,
        }),
        _ => None,
    };
    let report = EvalReport {
        policy: cfg.policy,
        n,
        n_genuine,
        n_fake,
        accuracy: (n - false_pos - false_neg) as f64 / n as f64,
        fp,
        fn_rate,
        se_fp,
        se_fn,
        mean_detection_events: events(None),
        mean_events_genuine: events(Some(Hypothesis::Genuine)),
        mean_events_fake: events(Some(Hypothesis::Fake)),
        per_rule,
        skipped_traces,
        skipped_observations: rows.iter().map(|r| r.skipped).sum(),
        seed: cfg.seed,
        keep_fraction: cfg.keep_fraction,
        error_bounds,
    };

    if let Some(out) = &a.common.out {
        std::fs::create_dir_all(out)?;
        let mut w = create(&out.join("report.json"))?;
        writeln!(w, "{}", serde_json::to_string_pretty(&report).expect("report serializes"))?;
        w.flush()?;

        let mut w = create(&out.join("per_trace.csv"))?;
        writeln!(w, "index,label,verdict,T,rule,posterior,observations,absorbed,skipped")?;
        for r in &rows {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{}",
                r.index,
                r.label.index(),
                r.outcome.verdict.index(),
                r.outcome.stopping_step,
                r.outcome.rule.name(),
                r.decision_posterior,
                r.observations,
                r.posteriors.len(),
                r.skipped
            )?;
        }
        w.flush()?;

        // Accuracy of the Bayes decision after l observations (the last one
        // for shorter traces) and the fraction of traces already stopped.
        let mut w = create(&out.join("accuracy_curve.csv"))?;
        writeln!(w, "ℓ,accuracy,stopped")?;
        let longest = rows.iter().map(|r| r.posteriors.len()).max().unwrap_or(0);
        for l in 1..=longest {
            let correct = rows
                .iter()
                .filter(|r| {
                    let pi = if r.posteriors.is_empty() {
                        r.prior
                    } else {
                        r.posteriors[l.min(r.posteriors.len()) - 1]
                    };
                    bayes_decision(pi, &cfg.costs) == r.label
                })
                .count();
            let stopped = rows.iter().filter(|r| r.outcome.stopping_step <= l).count();
            writeln!(w, "{l},{},{}", correct as f64 / n as f64, stopped as f64 / n as f64)?;
        }
        w.flush()?;
    }
    if report.per_rule.contains_key(StopRule::Horizon.name()) {
        log::info!("{} traces stopped at their last observation", report.per_rule["horizon"].count);
    }
    Ok(report)
}

/// Solves for the thresholds and writes the table to `--out` if given.
/// An unconverged solve still writes its table, then fails.
pub fn cmd_thresholds(a: &ThresholdArgs) -> Result<ThresholdSolution, CliError> {
    let cfg = a.common.run_config()?;
    let model = load_model(&a.common)?;
    let sol = solve(&cfg, &model)?;
    if let Some(out) = &a.common.out {
        let mut w = create(out)?;
        sol.table().write_csv(&mut w)?;
        w.flush()?;
    }
    println!(
        "pi_low={} pi_up={} converged={} sweeps={}",
        sol.table().pi_low,
        sol.table().pi_up,
        sol.converged,
        sol.sweeps
    );
    if !sol.converged {
        return Err(CliError::Unconverged(format!(
            "{} sweeps, last change {:.3e}",
            sol.sweeps, sol.last_change
        )));
    }
    Ok(sol)
}
