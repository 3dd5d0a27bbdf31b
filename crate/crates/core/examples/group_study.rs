//! The empirical study: per-group operator tables by sequence length and by
//! k-means clusters of user embeddings, each with its per-group oracle.
//!
//!     cargo run --release --example group_study

use adatta::augment::{build_similarity_index, AugAction, Augmenter, OperatorParams};
use adatta::backbone::train_backbone;
use adatta::cli::user_embeddings;
use adatta::config::{demo_backbone, two_population_spec};
use adatta::data::{generate_synthetic, split_leave_one_out, EvalTarget};
use adatta::metrics::Metric;
use adatta::study::{
    group_by_cluster, group_by_length, oracle_report, per_group_operator_table, render, Report, ReportFormat,
};
use adatta::tta::TtaConfig;

fn main() -> adatta::Result<()> {
    let ds = generate_synthetic(&two_population_spec(500, 42))?;
    let (backbone, _) = train_backbone(&ds, &demo_backbone())?;
    let index = build_similarity_index(&backbone, 10);
    let params = OperatorParams::default();
    let aug = Augmenter::new(&backbone, &params, Some(&index));
    let splits = split_leave_one_out(&ds).splits;
    let tta = TtaConfig::default();
    let h10 = Metric::Hr(10);

    let by_length = group_by_length(&ds, &splits, &[8, 20]);
    let embeddings = user_embeddings(&backbone, &splits)?;
    let by_cluster = group_by_cluster(&embeddings, 3, 42)?;

    for (title, grouping) in [("sequence length", by_length), ("k-means, k = 3", by_cluster)] {
        let table = per_group_operator_table(&aug, &ds, &splits, EvalTarget::Valid, &grouping, &AugAction::ALL, &tta, h10)?;
        let oracle = oracle_report(&table, h10)?;
        let (best, score) = table.best_fixed()?;
        println!("== groups by {title} ==");
        print!("{}", render(&Report::Grouped(&table, Some(&oracle)), ReportFormat::Text));
        println!("oracle H@10 {:.4} vs best fixed {} {score:.4}\n", oracle.summary.hr[1], best.label());
    }
    Ok(())
}
