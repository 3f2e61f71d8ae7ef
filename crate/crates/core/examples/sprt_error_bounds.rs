//! Empirical SPRT error rates against Wald's bounds.

use misinfo::markov::{GrowthConfig, SpreadModel};
use misinfo::policy::{risk_estimate, wald_bounds, CostSpec, Policy, RiskSetup, SprtConfig};
use misinfo::{DetectorConfig, PathEnumConfig};

fn main() {
    let model = SpreadModel::weibo_z4();
    let setup = RiskSetup {
        growth: GrowthConfig::chain(200),
        detector: DetectorConfig::with_paths(PathEnumConfig::new(201, 4).unwrap()),
        ..RiskSetup::default()
    };
    let costs = CostSpec::default();
    for target in [0.2, 0.1, 0.05, 0.01] {
        let (lo, up) = wald_bounds(target, target).unwrap();
        let policy = Policy::Sprt {
            config: SprtConfig::new(lo, up).unwrap(),
        };
        let r = risk_estimate(&policy, &model, &costs, &setup, 4000, 1).unwrap();
        println!(
            "target {target:<5} B=({lo:.4}, {up:.1})  Pe1={:.4} (bound {:.4})  Pe2={:.4} (bound {:.4})  mean T={:.2}  horizon={}",
            r.pe1,
            (1.0 - r.pe2) / up,
            r.pe2,
            lo * (1.0 - r.pe1),
            r.mean_steps,
            r.horizon_stops
        );
    }
}
