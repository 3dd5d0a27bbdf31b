//! Train the operator-selection policy on half the users and compare the
//! adaptive strategy with every fixed operator on the other half.
//!
//!     cargo run --release --example train_policy

use adatta::augment::{build_similarity_index, Augmenter, OperatorParams};
use adatta::backbone::train_backbone;
use adatta::config::{demo_backbone, two_population_spec};
use adatta::data::{generate_synthetic_labeled, popularity_percentiles, split_leave_one_out, EvalTarget, LooSplit};
use adatta::policy::{
    run_adaptive_strategy, train_policy, ActionPreset, PolicyNet, PpoConfig, RecommendationEnv, RewardConfig,
    TrainedPolicy,
};
use adatta::study::{render, ComparisonReport, Report, ReportFormat};
use adatta::tta::{run_fixed_strategy, TtaConfig};

fn main() -> adatta::Result<()> {
    let syn = generate_synthetic_labeled(&two_population_spec(1000, 42))?;
    let ds = &syn.dataset;
    let (backbone, _) = train_backbone(ds, &demo_backbone())?;
    let index = build_similarity_index(&backbone, 10);
    let params = OperatorParams::default();
    let aug = Augmenter::new(&backbone, &params, Some(&index));
    let popularity = popularity_percentiles(ds)?;
    let (train, eval): (Vec<LooSplit>, Vec<LooSplit>) =
        split_leave_one_out(ds).splits.into_iter().partition(|s| s.user % 2 == 0);

    let preset = ActionPreset::Eight;
    let actions = preset.actions();
    let reward = RewardConfig::default();
    let tta = TtaConfig::default();
    let ppo = PpoConfig::default();
    let env = RecommendationEnv::build(&aug, &train, EvalTarget::Valid, &actions, &tta, &reward, &popularity)?;
    let mut net = PolicyNet::new(env.state_dim(), actions.len(), ppo.hidden, ppo.seed)?;
    train_policy(&mut net, &env, &ppo, |r| {
        if r.update % 20 == 0 {
            println!("update {:>3}: mean reward {:+.3}, entropy {:.3}", r.update, r.mean_reward, r.entropy);
        }
    })?;
    let policy = TrainedPolicy { net, preset, reward };

    let adaptive = run_adaptive_strategy(&aug, ds, &eval, EvalTarget::Valid, &tta, &policy, &popularity)?;
    let fixed = actions
        .iter()
        .map(|&a| Ok((a.name().to_string(), run_fixed_strategy(&aug, ds, &eval, EvalTarget::Valid, a, &tta)?.summary)))
        .collect::<adatta::Result<Vec<_>>>()?;
    let cmp = ComparisonReport { fixed, adaptive: adaptive.summary.clone() };
    print!("{}", render(&Report::Comparison(&cmp), ReportFormat::Text));

    for (p, name) in ["long", "short"].iter().enumerate() {
        let mut counts = vec![0usize; actions.len()];
        for row in adaptive.rows.iter().filter(|r| syn.population[r.user] == p) {
            counts[actions.iter().position(|a| *a == row.action).unwrap()] += 1;
        }
        let top = counts.iter().enumerate().max_by_key(|(_, c)| **c).unwrap().0;
        println!("{name} users: chose {} for {} of {}", actions[top].label(), counts[top], counts.iter().sum::<usize>());
    }
    Ok(())
}
