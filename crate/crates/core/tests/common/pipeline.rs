//! Desk-scale end-to-end runs shared by the acceptance target and the
//! slower integration suites.

use adatta::augment::{build_similarity_index, AugAction, Augmenter, ItemSimilarityIndex, OperatorParams};
use adatta::backbone::{train_backbone, Backbone, BackboneConfig, BackboneKind};
use adatta::config::{demo_backbone, two_population_spec};
use adatta::data::{
    generate_synthetic_labeled, popularity_percentiles, split_leave_one_out, EvalTarget, LooSplit,
    PopulationSpec, SyntheticDataset, SyntheticSpec, TransitionKind,
};
use adatta::metrics::{Metric, MetricsSummary};
use adatta::policy::{
    run_adaptive_strategy, train_policy, ActionPreset, PolicyNet, PpoConfig, RecommendationEnv,
    RewardConfig, TrainedPolicy,
};
use adatta::study::{oracle_report, per_group_operator_table, GroupedReport, Grouping, OracleSummary};
use adatta::tta::{run_fixed_strategy, TtaConfig};

pub const H10: Metric = Metric::Hr(10);

/// 200 users walking a 20-item cycle without noise.
pub fn cycle_spec() -> SyntheticSpec {
    SyntheticSpec {
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
    }
}

pub fn cycle_config(kind: BackboneKind) -> BackboneConfig {
    BackboneConfig {
        kind,
        embed_dim: 16,
        max_len: 10,
        lr: 0.01,
        batch_size: 32,
        epochs: 15,
        rng_seed: 7,
    }
}

/// HR@1 on the test targets after training, plus the loss trajectory ends.
pub fn cycle_hr1(kind: BackboneKind) -> (f64, f64, f64) {
    let ds = generate_synthetic_labeled(&cycle_spec()).unwrap().dataset;
    let (b, report) = train_backbone(&ds, &cycle_config(kind)).unwrap();
    let params = OperatorParams::default();
    let aug = Augmenter::new(&b, &params, None);
    let splits = split_leave_one_out(&ds).splits;
    let r = run_fixed_strategy(&aug, &ds, &splits, EvalTarget::Test, AugAction::Identity, &TtaConfig::default()).unwrap();
    let hits = r.rows.iter().filter(|u| u.rank == 1).count();
    (
        hits as f64 / r.rows.len() as f64,
        report.initial_loss,
        *report.epoch_losses.last().unwrap(),
    )
}

/// The two-population dataset with its trained backbone.
pub struct TwoPopulation {
    pub syn: SyntheticDataset,
    pub backbone: Backbone,
    pub index: ItemSimilarityIndex,
    pub params: OperatorParams,
    pub splits: Vec<LooSplit>,
    pub popularity: Vec<f64>,
}

impl TwoPopulation {
    pub fn build(users_per_population: usize, seed: u64) -> Self {
        let syn = generate_synthetic_labeled(&two_population_spec(users_per_population, seed)).unwrap();
        let (backbone, _) = train_backbone(&syn.dataset, &demo_backbone()).unwrap();
        let index = build_similarity_index(&backbone, 10);
        let splits = split_leave_one_out(&syn.dataset).splits;
        let popularity = popularity_percentiles(&syn.dataset).unwrap();
        Self {
            syn,
            backbone,
            index,
            params: OperatorParams::default(),
            splits,
            popularity,
        }
    }

    pub fn aug(&self) -> Augmenter<'_> {
        Augmenter::new(&self.backbone, &self.params, Some(&self.index))
    }

    pub fn grouping(&self, splits: &[LooSplit]) -> Grouping {
        Grouping {
            names: vec!["long".into(), "short".into()],
            assignment: splits.iter().map(|s| self.syn.population[s.user]).collect(),
        }
    }

    pub fn table(&self, splits: &[LooSplit], actions: &[AugAction]) -> (GroupedReport, OracleSummary) {
        let g = per_group_operator_table(
            &self.aug(),
            &self.syn.dataset,
            splits,
            EvalTarget::Valid,
            &self.grouping(splits),
            actions,
            &TtaConfig::default(),
            H10,
        )
        .unwrap();
        let o = oracle_report(&g, H10).unwrap();
        (g, o)
    }
}

pub struct PolicyOutcome {
    pub table: GroupedReport,
    pub adaptive: MetricsSummary,
    pub best_fixed: (AugAction, f64),
    /// Per population, the share of held-out users given that population's
    /// best fixed operator.
    pub agreement: Vec<f64>,
    pub final_entropy: f64,
}

/// Trains on even-indexed users and evaluates on the odd-indexed ones, both
/// against the validation target.
pub fn train_and_evaluate_policy(data: &TwoPopulation, ppo: &PpoConfig) -> PolicyOutcome {
    let (train, eval): (Vec<LooSplit>, Vec<LooSplit>) =
        data.splits.iter().cloned().partition(|s| s.user % 2 == 0);
    let preset = ActionPreset::Eight;
    let actions = preset.actions();
    let reward = RewardConfig::default();
    let tta = TtaConfig::default();
    let aug = data.aug();
    let env = RecommendationEnv::build(&aug, &train, EvalTarget::Valid, &actions, &tta, &reward, &data.popularity).unwrap();
    let mut net = PolicyNet::new(env.state_dim(), actions.len(), ppo.hidden, ppo.seed).unwrap();
    let log = train_policy(&mut net, &env, ppo, |_| {}).unwrap();
    let policy = TrainedPolicy { net, preset, reward };
    let (table, _) = data.table(&eval, &actions);
    let report = run_adaptive_strategy(&aug, &data.syn.dataset, &eval, EvalTarget::Valid, &tta, &policy, &data.popularity).unwrap();
    let groups = data.grouping(&eval);
    let mut agree = vec![0usize; 2];
    let mut total = vec![0usize; 2];
    for (row, &g) in report.rows.iter().zip(&groups.assignment) {
        total[g] += 1;
        if Some(row.action) == table.best[g] {
            agree[g] += 1;
        }
    }
    PolicyOutcome {
        best_fixed: table.best_fixed().unwrap(),
        table,
        adaptive: report.summary,
        agreement: agree.iter().zip(&total).map(|(a, t)| *a as f64 / *t as f64).collect(),
        final_entropy: log.last().map_or(f64::NAN, |r| r.entropy),
    }
}
