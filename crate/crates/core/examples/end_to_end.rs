//! Simulate a corpus, train on one split, evaluate on the other.

use misinfo::cli::{cmd_eval, cmd_simulate, cmd_train, CommonArgs, EvalArgs, SimulateArgs, SplitPart, TrainArgs};

fn main() {
    let root = std::env::temp_dir().join(format!("misinfo-end-to-end-{}", std::process::id()));
    let data = root.join("data");
    let model = root.join("model.json");
    let common = |out: std::path::PathBuf| CommonArgs {
        data: Some(data.clone()),
        out: Some(out),
        seed: Some(1),
        max_path_len: Some(256),
        ..CommonArgs::default()
    };

    let sim = cmd_simulate(&SimulateArgs {
        common: common(data.clone()),
        n: Some(1000),
        ..SimulateArgs::default()
    })
    .unwrap();
    println!("simulated {} traces ({} fake, {} events)", sim.traces, sim.fake, sim.events);

    let trained = cmd_train(&TrainArgs {
        common: common(model.clone()),
        split: SplitPart::Train,
        ..TrainArgs::default()
    })
    .unwrap();
    println!("trained, fake prior {:.3}", trained.file.prior_fake);

    let report = cmd_eval(&EvalArgs {
        common: CommonArgs {
            model: Some(model),
            ..common(root.join("eval"))
        },
        split: SplitPart::Test,
    })
    .unwrap();
    println!(
        "test n={} accuracy={:.3} fp={:.3} fn={:.3} mean events={:.2} (genuine {:.2}, fake {:.2})",
        report.n,
        report.accuracy,
        report.fp,
        report.fn_rate,
        report.mean_detection_events,
        report.mean_events_genuine,
        report.mean_events_fake
    );
    println!("outputs in {}", root.display());
}
