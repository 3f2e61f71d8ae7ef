use misinfo::markov::{sample_synthetic_cascade, subsample, FeatureConfig, GrowthConfig, SpreadModel};
use misinfo::Hypothesis;

fn main() {
    let model = SpreadModel::weibo_z4();
    let growth = GrowthConfig {
        max_events: 30,
        ..GrowthConfig::default()
    };
    for label in Hypothesis::BOTH {
        let c = sample_synthetic_cascade(&model, label, 7, &growth, &FeatureConfig::default(), 0).unwrap();
        let classes: String = c.trace.events.iter().map(|e| char::from(b'0' + e.class as u8)).collect();
        println!("{label:?}: {} events, {} users, classes {classes}", c.trace.len(), c.graph.node_count());

        let seen = subsample(&c.trace, 0.5, 11).unwrap();
        let kept: Vec<String> = seen.observations.iter().map(|o| format!("{}:{}", o.edge, o.class)).collect();
        println!("  observed {} of {}: {}", seen.len(), c.trace.len(), kept.join(" "));
    }
}
