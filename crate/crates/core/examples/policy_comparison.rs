use misinfo::markov::SpreadModel;
use misinfo::policy::{risk_estimate, solve_thresholds, CostSpec, Policy, RiskSetup, SinglePathModel, SolverConfig, SprtConfig};
use misinfo::{DetectorConfig, PathEnumConfig};

fn main() {
    let model = SpreadModel::weibo_z4();
    let costs = CostSpec::default();
    let setup = RiskSetup {
        detector: DetectorConfig::with_paths(PathEnumConfig::new(256, 64).unwrap()),
        ..RiskSetup::default()
    };
    let dp = solve_thresholds(&costs, &SinglePathModel::new(&model), &SolverConfig::default()).unwrap();
    let policies = [
        ("dp", Policy::Dp { thresholds: dp.thresholds() }),
        ("sprt", Policy::Sprt { config: SprtConfig::from_error_targets(0.05, 0.05).unwrap() }),
        ("convergence", Policy::Convergence { epsilon: 0.001, threshold: costs.break_even() }),
        ("oracle", Policy::Oracle),
    ];
    println!("{:<12} {:>7} {:>7} {:>8} {:>8}", "policy", "Pe1", "Pe2", "mean T", "risk");
    for (name, p) in policies {
        let r = risk_estimate(&p, &model, &costs, &setup, 1000, 2).unwrap();
        println!("{name:<12} {:>7.3} {:>7.3} {:>8.2} {:>8.3}", r.pe1, r.pe2, r.mean_steps, r.risk);
    }
}
