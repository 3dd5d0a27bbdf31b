//! Apply every augmentation operator to one sequence and show the views.
//!
//!     cargo run --release --example augment_operators

use adatta::augment::{build_similarity_index, AugAction, Augmenter, OperatorParams, ViewContent};
use adatta::backbone::{Backbone, BackboneConfig};
use adatta::rng::StreamKey;

fn main() -> adatta::Result<()> {
    let backbone = Backbone::new(&BackboneConfig::default(), 30)?;
    let index = build_similarity_index(&backbone, 5);
    let params = OperatorParams::default();
    let aug = Augmenter::new(&backbone, &params, Some(&index));
    let seq = [4, 8, 15, 16, 23, 29, 2, 11, 7, 19];
    println!("input: {seq:?}");

    for action in AugAction::ALL {
        let views = if action == AugAction::Identity { 1 } else { 2 };
        for view in 0..views {
            let v = aug.apply_keyed(&seq, action, StreamKey::view(42, 0, view))?;
            let shown = match &v.content {
                ViewContent::Sequence(items) => format!("{items:?}"),
                ViewContent::Representation(reps) => {
                    let zeroed = (0..reps.rows()).filter(|&r| reps.row(r).iter().all(|x| *x == 0.0)).count();
                    format!("{}x{} matrix, {zeroed} zeroed rows", reps.rows(), reps.cols())
                }
            };
            println!("{:<11} view {view}: {shown}", action.label());
        }
    }
    Ok(())
}
