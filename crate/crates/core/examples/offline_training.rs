//! Learn the edge classifier and the chain parameters from a labeled corpus.

use misinfo::markov::SpreadModel;
use misinfo::offline::{train_model, TrainOptions};
use misinfo::policy::RiskSetup;
use misinfo::{Edge, Hypothesis, SocialGraph};

fn main() {
    let model = SpreadModel::weibo_z4();
    let setup = RiskSetup {
        keep_fraction: 1.0,
        ..RiskSetup::default()
    };

    // Put every synthetic cascade into one graph with disjoint ids.
    let mut graph = SocialGraph::new();
    let mut traces = Vec::new();
    let mut offset = 0;
    for i in 0..600 {
        let s = setup.sample(&model, 3, i, None).unwrap();
        let g = s.cascade_graph.as_ref().unwrap();
        for v in g.nodes() {
            graph.add_node(v + offset, g.features(v).unwrap().to_vec()).unwrap();
        }
        for e in g.edges() {
            graph.add_edge(e.from + offset, e.to + offset).unwrap();
        }
        let shift = |e: Edge| Edge::new(e.from + offset, e.to + offset);
        let mut t = s.trace;
        t.source += offset;
        for ev in &mut t.events {
            ev.edge = shift(ev.edge);
            ev.parent = ev.parent.map(shift);
        }
        traces.push(t);
        offset += g.node_count() as u64;
    }

    let trained = train_model(&traces, &graph, &TrainOptions::default()).unwrap();
    let c = &trained.classifier;
    println!("classifier weights {:?} bias {:.3}", c.weights, c.bias);
    let f = &trained.file;
    for (h, eta, alpha) in [
        (Hypothesis::Genuine, &f.eta0, &f.alpha0),
        (Hypothesis::Fake, &f.eta1, &f.alpha1),
    ] {
        println!("{h:?}");
        println!("  eta    est {:?}", round(eta));
        println!("         true {:?}", round(model.eta(h)));
        for (z, row) in alpha.iter().enumerate() {
            println!("  alpha[{z}] est {:?} true {:?}", round(row), round(model.alpha(h).row(z)));
        }
    }
    println!("prior of fake {:.3}, empty rows {:?}", f.prior_fake, trained.empty_rows);
}

fn round(v: &[f64]) -> Vec<f64> {
    v.iter().map(|x| (x * 1000.0).round() / 1000.0).collect()
}
