//! Train the demo backbone on the two-population dataset and sweep every
//! fixed TTA operator over the validation targets.
//!
//!     cargo run --release --example fixed_tta

use adatta::augment::{build_similarity_index, AugAction, Augmenter, OperatorParams};
use adatta::backbone::train_backbone;
use adatta::config::{demo_backbone, two_population_spec};
use adatta::data::{generate_synthetic, split_leave_one_out, EvalTarget};
use adatta::study::{render, Report, ReportFormat};
use adatta::tta::{run_fixed_strategy, TtaConfig};

fn main() -> adatta::Result<()> {
    let ds = generate_synthetic(&two_population_spec(500, 42))?;
    let (backbone, report) = train_backbone(&ds, &demo_backbone())?;
    println!(
        "backbone loss {:.3} -> {:.3}",
        report.initial_loss,
        report.epoch_losses.last().unwrap()
    );
    let index = build_similarity_index(&backbone, 10);
    let params = OperatorParams::default();
    let aug = Augmenter::new(&backbone, &params, Some(&index));
    let splits = split_leave_one_out(&ds).splits;
    let tta = TtaConfig::default();

    let rows = AugAction::ALL
        .iter()
        .map(|&a| {
            let r = run_fixed_strategy(&aug, &ds, &splits, EvalTarget::Valid, a, &tta)?;
            Ok((a.name().to_string(), r.summary))
        })
        .collect::<adatta::Result<Vec<_>>>()?;
    print!("{}", render(&Report::Summary(&rows), ReportFormat::Text));
    Ok(())
}
