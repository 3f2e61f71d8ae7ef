//! Step-by-step posterior on a small graph with two routes to the same user.

use misinfo::graph::{Edge, SocialGraph};
use misinfo::inference::{BeliefState, DetectorConfig, PosteriorEngine};
use misinfo::markov::{Observation, SpreadModel};

fn main() {
    let model = SpreadModel::weibo_z4();
    let mut g = SocialGraph::new();
    for v in 0..6 {
        g.add_node(v, vec![]).unwrap();
    }
    for (u, v) in [(0, 1), (0, 2), (1, 3), (2, 3), (3, 4), (4, 5)] {
        g.add_edge(u, v).unwrap();
    }

    let stream = [(0, 1, 3), (3, 4, 3), (0, 2, 2), (4, 5, 3)];
    let mut engine = PosteriorEngine::new(&model, &g, 0, DetectorConfig::default());
    println!("prior {:.4}", engine.belief().posterior);
    for (u, v, class) in stream {
        let obs = Observation {
            edge: Edge::new(u, v),
            class,
        };
        let ev = engine.evidence(obs).unwrap();
        for p in &ev.paths {
            println!(
                "    path {:?}: mu0={:.4} mu1={:.4} pred0={:.4} pred1={:.4}",
                p.context.path.vertices(),
                p.mu[0],
                p.mu[1],
                p.predictive[0],
                p.predictive[1]
            );
        }
        let step = engine.observe(obs).unwrap().expect("reachable");
        println!(
            "step {}: {} class {} -> A0={:.4} A1={:.4} posterior={:.4} log LR={:+.3}",
            step.step,
            obs.edge,
            class,
            step.a0,
            step.a1,
            step.posterior,
            step.log_lr
        );
    }

    // Same numbers from the bare recursion.
    let belief = engine.into_belief();
    let mut b = BeliefState::new(belief.prior).unwrap();
    for r in &belief.history {
        b = misinfo::inference::update(&b, r.a0, r.a1).unwrap();
    }
    println!("recomputed final posterior {:.6} (engine {:.6})", b.posterior, belief.posterior);
}
