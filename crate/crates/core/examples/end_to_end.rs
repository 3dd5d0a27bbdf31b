//! Drive the command-line pipeline from Rust: prepare, train the backbone,
//! sweep the fixed operators, train the policy, evaluate and run the study,
//! all in a scratch directory.
//!
//!     cargo run --release --example end_to_end

use adatta::config::{two_population_spec, RunConfig};

fn main() {
    let dir = tempfile::tempdir().expect("scratch directory");
    let mut cfg = RunConfig::default();
    cfg.data.synthetic = two_population_spec(300, 42);
    let config = dir.path().join("run.toml");
    std::fs::write(&config, cfg.to_toml().expect("serializable")).expect("writable");

    let out = dir.path().join("out");
    let base = [
        "adatta".to_string(),
        "--config".into(),
        config.display().to_string(),
        "--out".into(),
        out.display().to_string(),
        "--seed".into(),
        "42".into(),
    ];
    let steps: [&[&str]; 6] = [
        &["prepare"],
        &["train-backbone"],
        &["run-tta", "--target", "valid"],
        &["train-policy"],
        &["evaluate", "--target", "valid"],
        &["study", "--target", "valid"],
    ];
    for step in steps {
        println!("\n$ adatta {}", step.join(" "));
        let args = base.iter().cloned().chain(step.iter().map(|s| s.to_string()));
        let code = adatta::cli::main_with_args(args);
        if code != 0 {
            std::process::exit(code);
        }
    }
    println!("\n== evaluate_valid.tsv ==");
    print!("{}", std::fs::read_to_string(out.join("evaluate_valid.tsv")).unwrap());
}
