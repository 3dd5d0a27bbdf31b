//! Command-line driver binding the pipeline stages to files in one output
//! directory.

use std::io::Write as _;
use std::path::PathBuf;

use clap::{Parser, Subcommand};
use sha2::{Digest, Sha256};

use crate::augment::{build_similarity_index, AugAction, Augmenter, ItemSimilarityIndex};
use crate::backbone::{train_backbone, Backbone, BackboneKind};
use crate::config::RunConfig;
use crate::data::{
    generate_synthetic, ingest, k_core_filter, load_snapshot, popularity_percentiles, save_snapshot,
    split_leave_one_out, EvalTarget, InteractionDataset, LooSplit,
};
use crate::error::{Error, Result};
use crate::metrics::MetricsSummary;
use crate::nn::Checkpoint;
use crate::policy::{
    run_adaptive_strategy, train_policy, ActionPreset, PolicyNet, RecommendationEnv, TrainedPolicy,
};
use crate::study::{
    emit_report, export_clusters, group_by_cluster, group_by_length, oracle_report, ComparisonReport,
    GroupSpec, GroupedReport, Report, ReportFormat,
};
use crate::tta::{run_fixed_strategy, RankingReport};

#[derive(Debug, Parser)]
#[command(name = "adatta", version, about = "Adaptive test-time augmentation for sequential recommendation")]
pub struct Cli {
    /// Run configuration (TOML). Defaults apply to anything left out.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Seed for every random stream of the run.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for evaluation (1 = sequential reference mode).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Output directory (default: $ADATTA_OUT_DIR, then ./adatta-out).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Report format: text or tsv.
    #[arg(long, global = true)]
    pub format: Option<ReportFormat>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Ingest or generate, filter and snapshot the dataset.
    Prepare {
        /// Interaction log to ingest instead of generating synthetic data
        #[arg(long)]
        input: Option<PathBuf>,
        /// Minimum interactions per user and per item
        #[arg(long)]
        k_core: Option<usize>,
    },
    /// Train the backbone on the training prefixes.
    TrainBackbone {
        /// Encoder: recurrent or attentive
        #[arg(long)]
        kind: Option<BackboneKind>,
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Fixed-operator TTA for one action, or `all` for a sweep.
    RunTta {
        /// Operator name, or `all`
        #[arg(long, default_value = "all")]
        action: String,
        /// Held-out item to score against: valid or test
        #[arg(long)]
        target: Option<EvalTarget>,
        /// Augmented views per user
        #[arg(long)]
        views: Option<usize>,
    },
    /// Train the operator-selection policy.
    TrainPolicy {
        /// Total environment steps
        #[arg(long)]
        steps: Option<usize>,
        /// Action preset: 5, 6, 7 or 8 operators
        #[arg(long)]
        preset: Option<usize>,
    },
    /// Adaptive policy against every fixed operator.
    Evaluate {
        /// Held-out item to score against: valid or test
        #[arg(long)]
        target: Option<EvalTarget>,
    },
    /// Grouped operator tables and per-group oracle.
    Study {
        /// Held-out item to score against: valid or test
        #[arg(long)]
        target: Option<EvalTarget>,
    },
    /// Print the fully resolved configuration.
    ConfigDump,
}

impl std::str::FromStr for EvalTarget {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "valid" | "validation" => Ok(EvalTarget::Valid),
            "test" => Ok(EvalTarget::Test),
            _ => Err(Error::Config(format!("unknown target `{s}` (valid or test)"))),
        }
    }
}

impl std::fmt::Display for EvalTarget {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            EvalTarget::Valid => "valid",
            EvalTarget::Test => "test",
        })
    }
}

/// Parses arguments, runs the command and returns the process exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn resolve_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if cli.seed.is_some() {
        cfg.seed = cli.seed;
    }
    if let Some(o) = &cli.out {
        cfg.out_dir = Some(o.clone());
    }
    if let Some(f) = cli.format {
        cfg.report_format.0 = f;
    }
    match &cli.command {
        Command::Prepare { input, k_core } => {
            if input.is_some() {
                cfg.data.input = input.clone();
            }
            if let Some(k) = k_core {
                cfg.data.k_core = *k;
            }
        }
        Command::TrainBackbone { kind, epochs } => {
            if let Some(k) = kind {
                cfg.backbone.kind = *k;
            }
            if let Some(e) = epochs {
                cfg.backbone.epochs = *e;
            }
        }
        Command::RunTta { views, .. } => {
            if let Some(m) = views {
                cfg.tta.m = *m;
            }
        }
        Command::TrainPolicy { steps, preset } => {
            if let Some(s) = steps {
                cfg.ppo.total_steps = *s;
            }
            if let Some(p) = preset {
                cfg.policy.preset = ActionPreset::try_from(*p)?;
            }
        }
        Command::Evaluate { target } => {
            if let Some(t) = target {
                cfg.policy.eval_target = *t;
            }
        }
        Command::Study { target } => {
            if let Some(t) = target {
                cfg.study.target = *t;
            }
        }
        Command::ConfigDump => {}
    }
    cfg.apply_seed();
    cfg.out_dir = Some(cfg.out_dir());
    cfg.validate()?;
    Ok(cfg)
}

pub fn run(cli: Cli) -> Result<()> {
    let cfg = resolve_config(&cli)?;
    let threads = cli.threads.unwrap_or(0);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    pool.install(|| dispatch(&cli.command, &cfg))
}

fn dispatch(command: &Command, cfg: &RunConfig) -> Result<()> {
    if let Command::ConfigDump = command {
        print!("{}", cfg.to_toml()?);
        return Ok(());
    }
    let ws = Workspace::new(cfg)?;
    ws.write("resolved_config.toml", cfg.to_toml()?.as_bytes())?;
    match command {
        Command::Prepare { .. } => cmd_prepare(&ws),
        Command::TrainBackbone { .. } => cmd_train_backbone(&ws),
        Command::RunTta { action, target, .. } => {
            let actions = if action.eq_ignore_ascii_case("all") {
                AugAction::ALL.to_vec()
            } else {
                vec![action.parse()?]
            };
            cmd_run_tta(&ws, &actions, target.unwrap_or(EvalTarget::Test))
        }
        Command::TrainPolicy { .. } => cmd_train_policy(&ws),
        Command::Evaluate { .. } => cmd_evaluate(&ws),
        Command::Study { .. } => cmd_study(&ws),
        Command::ConfigDump => unreachable!(),
    }
}

/// Output directory plus the resolved configuration.
pub struct Workspace<'a> {
    pub cfg: &'a RunConfig,
    pub dir: PathBuf,
}

impl<'a> Workspace<'a> {
    pub fn new(cfg: &'a RunConfig) -> Result<Self> {
        let dir = cfg.out_dir();
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        Ok(Self { cfg, dir })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    fn write(&self, name: &str, bytes: &[u8]) -> Result<()> {
        let p = self.path(name);
        std::fs::write(&p, bytes).map_err(|e| Error::io(&p, e))
    }

    fn report_name(&self, stem: &str) -> PathBuf {
        let ext = match self.cfg.report_format.0 {
            ReportFormat::Text => "txt",
            ReportFormat::Tsv => "tsv",
        };
        self.path(&format!("{stem}.{ext}"))
    }

    fn emit(&self, stem: &str, report: &Report<'_>) -> Result<PathBuf> {
        let p = self.report_name(stem);
        emit_report(report, &p, self.cfg.report_format.0)?;
        Ok(p)
    }

    fn require(&self, name: &str, producer: &str) -> Result<PathBuf> {
        let p = self.path(name);
        if !p.is_file() {
            return Err(Error::Format(format!(
                "{} not found; run `adatta {producer}` first",
                p.display()
            )));
        }
        Ok(p)
    }

    pub fn dataset(&self) -> Result<InteractionDataset> {
        load_snapshot(&self.require("dataset.json", "prepare")?)
    }

    pub fn backbone(&self) -> Result<(Backbone, Vec<u8>)> {
        let p = self.require("backbone.ckpt", "train-backbone")?;
        let bytes = std::fs::read(&p).map_err(|e| Error::io(&p, e))?;
        Ok((Backbone::from_checkpoint(&Checkpoint::from_bytes(&bytes)?)?, bytes))
    }

    /// Similarity index for the stored backbone, cached by checkpoint hash.
    pub fn similarity_index(&self, backbone: &Backbone, ckpt_bytes: &[u8]) -> Result<ItemSimilarityIndex> {
        let k = self.cfg.operators.similarity_top_k;
        let hash = Sha256::digest(ckpt_bytes);
        let hex: String = hash.iter().take(16).map(|b| format!("{b:02x}")).collect();
        let dir = self.path("cache");
        let p = dir.join(format!("similarity-{hex}-k{k}.json"));
        if let Ok(text) = std::fs::read_to_string(&p) {
            if let Ok(idx) = serde_json::from_str(&text) {
                return Ok(idx);
            }
        }
        let idx = build_similarity_index(backbone, k);
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        std::fs::write(&p, serde_json::to_vec(&idx)?).map_err(|e| Error::io(&p, e))?;
        Ok(idx)
    }

    pub fn policy(&self) -> Result<TrainedPolicy> {
        let p = self.require("policy.ckpt", "train-policy")?;
        TrainedPolicy::from_checkpoint(&Checkpoint::load(&p)?)
    }
}

/// Ingests (or generates) and filters the dataset described by `cfg`.
pub fn build_dataset(cfg: &RunConfig) -> Result<InteractionDataset> {
    let raw = match &cfg.data.input {
        Some(p) => ingest(p, cfg.data.format)?,
        None => generate_synthetic(&cfg.data.synthetic)?,
    };
    if raw.num_interactions() == 0 {
        return Err(Error::EmptyDataset);
    }
    k_core_filter(&raw, cfg.data.k_core)
}

fn splits_of(ds: &InteractionDataset) -> Result<Vec<LooSplit>> {
    let s = split_leave_one_out(ds);
    if s.splits.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    Ok(s.splits)
}

fn cmd_prepare(ws: &Workspace) -> Result<()> {
    let ds = build_dataset(ws.cfg)?;
    let split = split_leave_one_out(&ds);
    if split.splits.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    save_snapshot(&ds, &ws.path("dataset.json"))?;
    let stats = format!(
        "users\t{}\nitems\t{}\ninteractions\t{}\nsplit_users\t{}\ndropped_short\t{}\n",
        ds.num_users(),
        ds.num_items(),
        ds.num_interactions(),
        split.splits.len(),
        split.dropped
    );
    ws.write("dataset_stats.tsv", stats.as_bytes())?;
    eprint!("{stats}");
    Ok(())
}

fn cmd_train_backbone(ws: &Workspace) -> Result<()> {
    let ds = ws.dataset()?;
    let (backbone, report) = train_backbone(&ds, &ws.cfg.backbone)?;
    backbone.to_checkpoint().save(&ws.path("backbone.ckpt"))?;
    let mut log = Vec::new();
    writeln!(log, "{}", serde_json::json!({"epoch": 0, "loss": report.initial_loss})).unwrap();
    for (e, l) in report.epoch_losses.iter().enumerate() {
        writeln!(log, "{}", serde_json::json!({"epoch": e + 1, "loss": l})).unwrap();
    }
    ws.write("backbone_log.jsonl", &log)?;
    eprintln!(
        "trained {} backbone: loss {:.4} -> {:.4}",
        backbone.kind(),
        report.initial_loss,
        report.epoch_losses.last().copied().unwrap_or(report.initial_loss)
    );
    Ok(())
}

fn summary_rows(reports: &[RankingReport]) -> Vec<(String, MetricsSummary)> {
    reports
        .iter()
        .map(|r| (r.strategy.clone(), r.summary.clone()))
        .collect()
}

fn cmd_run_tta(ws: &Workspace, actions: &[AugAction], target: EvalTarget) -> Result<()> {
    let ds = ws.dataset()?;
    let splits = splits_of(&ds)?;
    let (backbone, bytes) = ws.backbone()?;
    let index = ws.similarity_index(&backbone, &bytes)?;
    let aug = Augmenter::new(&backbone, &ws.cfg.operators, Some(&index));
    let mut reports = Vec::new();
    for &a in actions {
        let r = run_fixed_strategy(&aug, &ds, &splits, target, a, &ws.cfg.tta)?;
        ws.emit(&format!("tta_{}_{target}", a.name()), &Report::Ranking(&r))?;
        reports.push(r);
    }
    let rows = summary_rows(&reports);
    let p = ws.emit(&format!("tta_sweep_{target}"), &Report::Summary(&rows))?;
    eprintln!("wrote {}", p.display());
    Ok(())
}

fn cmd_train_policy(ws: &Workspace) -> Result<()> {
    let cfg = ws.cfg;
    let ds = ws.dataset()?;
    let splits = splits_of(&ds)?;
    let (backbone, bytes) = ws.backbone()?;
    let index = ws.similarity_index(&backbone, &bytes)?;
    let aug = Augmenter::new(&backbone, &cfg.operators, Some(&index));
    let pop = popularity_percentiles(&ds)?;
    let actions = cfg.policy.preset.actions();
    let env = RecommendationEnv::build(&aug, &splits, cfg.policy.train_target, &actions, &cfg.tta, &cfg.reward, &pop)?;
    let mut net = PolicyNet::new(env.state_dim(), actions.len(), cfg.ppo.hidden, cfg.ppo.seed)?;
    let mut log = Vec::new();
    train_policy(&mut net, &env, &cfg.ppo, |r| {
        writeln!(log, "{}", serde_json::to_string(r).expect("serializable")).unwrap();
    })?;
    ws.write("policy_log.jsonl", &log)?;
    let policy = TrainedPolicy {
        net,
        preset: cfg.policy.preset,
        reward: cfg.reward.clone(),
    };
    policy.to_checkpoint()?.save(&ws.path("policy.ckpt"))?;
    eprintln!("trained policy over {} actions", actions.len());
    Ok(())
}

fn cmd_evaluate(ws: &Workspace) -> Result<()> {
    let cfg = ws.cfg;
    let target = cfg.policy.eval_target;
    let ds = ws.dataset()?;
    let splits = splits_of(&ds)?;
    let (backbone, bytes) = ws.backbone()?;
    let index = ws.similarity_index(&backbone, &bytes)?;
    let aug = Augmenter::new(&backbone, &cfg.operators, Some(&index));
    let pop = popularity_percentiles(&ds)?;
    let policy = ws.policy()?;
    let fixed = policy
        .actions()
        .iter()
        .map(|&a| run_fixed_strategy(&aug, &ds, &splits, target, a, &cfg.tta))
        .collect::<Result<Vec<_>>>()?;
    let adaptive = run_adaptive_strategy(&aug, &ds, &splits, target, &cfg.tta, &policy, &pop)?;
    ws.emit(&format!("adaptive_{target}"), &Report::Ranking(&adaptive))?;
    let cmp = ComparisonReport {
        fixed: summary_rows(&fixed),
        adaptive: adaptive.summary.clone(),
    };
    let p = ws.emit(&format!("evaluate_{target}"), &Report::Comparison(&cmp))?;
    eprintln!("wrote {}", p.display());
    Ok(())
}

fn cmd_study(ws: &Workspace) -> Result<()> {
    let cfg = ws.cfg;
    let target = cfg.study.target;
    let ds = ws.dataset()?;
    let splits = splits_of(&ds)?;
    let (backbone, bytes) = ws.backbone()?;
    let index = ws.similarity_index(&backbone, &bytes)?;
    let aug = Augmenter::new(&backbone, &cfg.operators, Some(&index));
    let actions = AugAction::ALL.to_vec();
    let ranks = actions
        .iter()
        .map(|&a| Ok(run_fixed_strategy(&aug, &ds, &splits, target, a, &cfg.tta)?.ranks()))
        .collect::<Result<Vec<_>>>()?;
    let mut embeddings = None;
    for spec in &cfg.study.groups {
        let (stem, grouping) = match spec {
            GroupSpec::Length { thresholds } => ("study_length".to_string(), group_by_length(&ds, &splits, thresholds)),
            GroupSpec::Cluster { k, seed } => {
                if embeddings.is_none() {
                    embeddings = Some(user_embeddings(&backbone, &splits)?);
                }
                let g = group_by_cluster(embeddings.as_ref().expect("set"), *k, *seed)?;
                let ids: Vec<String> = splits.iter().map(|s| ds.user_id(s.user).to_string()).collect();
                export_clusters(&ws.path(&format!("clusters_k{k}.tsv")), &ids, &g.assignment)?;
                (format!("study_cluster_k{k}"), g)
            }
        };
        let table = GroupedReport::from_ranks(&grouping, &actions, ranks.clone(), cfg.study.selection)?;
        let oracle = oracle_report(&table, cfg.study.selection)?;
        let p = ws.emit(&format!("{stem}_{target}"), &Report::Grouped(&table, Some(&oracle)))?;
        eprintln!("wrote {}", p.display());
    }
    Ok(())
}

/// Mean hidden state of each user's training prefix.
pub fn user_embeddings(backbone: &Backbone, splits: &[LooSplit]) -> Result<Vec<Vec<f64>>> {
    use rayon::prelude::*;
    splits
        .par_iter()
        .map(|s| backbone.mean_hidden(backbone.truncate(&s.train_prefix)))
        .collect()
}

pub fn default_out_dir() -> PathBuf {
    RunConfig::default().out_dir()
}
