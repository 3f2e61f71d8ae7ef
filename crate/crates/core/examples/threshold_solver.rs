use misinfo::markov::SpreadModel;
use misinfo::policy::{solve_thresholds, CostSpec, SinglePathModel, SolverConfig};

fn main() {
    let model = SinglePathModel::new(&SpreadModel::weibo_z4());
    let cfg = SolverConfig::default();
    println!("{:>6} {:>8} {:>8} {:>7}", "c", "pi_low", "pi_up", "sweeps");
    for c in [0.0, 0.05, 0.1, 0.5, 1.0, 5.0, 20.0] {
        let costs = CostSpec::new(10.0, 10.0, c).unwrap();
        let s = solve_thresholds(&costs, &model, &cfg).unwrap();
        let t = s.thresholds();
        println!("{c:>6} {:>8} {:>8} {:>7}", t.pi_low, t.pi_up, s.sweeps);
    }

    // Thresholds also depend on the last class seen.
    let s = solve_thresholds(&CostSpec::new(10.0, 10.0, 1.0).unwrap(), &model, &cfg).unwrap();
    for (ctx, t) in s.tables.iter().enumerate() {
        let name = if ctx == model.source_context() { "source".to_string() } else { format!("after {ctx}") };
        println!("c=1 {name:>8}: ({}, {})", t.pi_low, t.pi_up);
    }
}
