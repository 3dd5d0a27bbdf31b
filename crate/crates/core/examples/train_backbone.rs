//! Train both encoders on a deterministic 20-item cycle and check that they
//! learn the next item.
//!
//!     cargo run --release --example train_backbone

use adatta::augment::{AugAction, Augmenter, OperatorParams};
use adatta::backbone::{train_backbone, BackboneConfig, BackboneKind};
use adatta::data::{generate_synthetic, split_leave_one_out, EvalTarget, PopulationSpec, SyntheticSpec, TransitionKind};
use adatta::tta::{run_fixed_strategy, TtaConfig};

fn main() -> adatta::Result<()> {
    let spec = SyntheticSpec {
        num_items: 20,
        rng_seed: 5,
        populations: vec![PopulationSpec {
            num_users: 200,
            transition_seed: 0,
            transitions: TransitionKind::Cycle,
            noise_rate: 0.0,
            reorder_rate: 0.0,
            min_len: 5,
            max_len: 15,
            items: None,
            holdout_junk: None,
            noise_items: None,
        }],
    };
    let ds = generate_synthetic(&spec)?;
    let splits = split_leave_one_out(&ds).splits;

    for kind in [BackboneKind::Recurrent, BackboneKind::Attentive] {
        let cfg = BackboneConfig {
            kind,
            embed_dim: 16,
            max_len: 10,
            lr: 0.01,
            batch_size: 32,
            epochs: 15,
            rng_seed: 7,
        };
        let (backbone, report) = train_backbone(&ds, &cfg)?;
        let params = OperatorParams::default();
        let aug = Augmenter::new(&backbone, &params, None);
        let r = run_fixed_strategy(&aug, &ds, &splits, EvalTarget::Test, AugAction::Identity, &TtaConfig::default())?;
        let hr1 = r.rows.iter().filter(|u| u.rank == 1).count() as f64 / r.rows.len() as f64;
        println!(
            "{kind:?}: loss {:.3} -> {:.3}, HR@1 {hr1:.3}, H@10 {:.3}",
            report.initial_loss,
            report.epoch_losses.last().unwrap(),
            r.summary.hr[1]
        );
    }
    Ok(())
}
