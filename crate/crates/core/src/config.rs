//! Run configuration: one TOML file, every field defaulted.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::augment::OperatorParams;
use crate::backbone::{BackboneConfig, BackboneKind};
use crate::data::{EvalTarget, InputFormat, PopulationSpec, SyntheticSpec, TransitionKind};
use crate::error::{Error, Result};
use crate::metrics::Metric;
use crate::policy::{ActionPreset, PpoConfig, RewardConfig};
use crate::study::{GroupSpec, ReportFormat};
use crate::tta::TtaConfig;

pub const OUT_DIR_ENV: &str = "ADATTA_OUT_DIR";
pub const DEFAULT_OUT_DIR: &str = "adatta-out";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    /// Interaction log to ingest; the synthetic spec is used when absent.
    pub input: Option<PathBuf>,
    pub format: InputFormat,
    pub k_core: usize,
    pub synthetic: SyntheticSpec,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            input: None,
            format: InputFormat::Auto,
            k_core: 5,
            synthetic: two_population_spec(1000, 42),
        }
    }
}

/// Two populations over disjoint item ranges whose sessions both end with
/// an accidental click (from a shared junk range) right before the
/// held-out items: long histories (30 to 50 items) and short fixed-length
/// sessions (5 items).
pub fn two_population_spec(users_per_population: usize, seed: u64) -> SyntheticSpec {
    let pop = |lo: usize, transition_seed: u64, min_len: usize, max_len: usize| PopulationSpec {
        num_users: users_per_population,
        transition_seed,
        transitions: TransitionKind::Sparse {
            branching: 3,
            decay: 0.5,
        },
        noise_rate: 0.0,
        reorder_rate: 0.0,
        min_len,
        max_len,
        items: Some((lo, lo + 99)),
        holdout_junk: Some((201, 220)),
        noise_items: None,
    };
    SyntheticSpec {
        num_items: 220,
        rng_seed: seed,
        populations: vec![pop(1, 1, 30, 50), pop(101, 2, 5, 5)],
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PolicySection {
    pub preset: ActionPreset,
    /// Target that supervises policy training.
    pub train_target: EvalTarget,
    /// Target the adaptive strategy is scored on.
    pub eval_target: EvalTarget,
}

impl Default for PolicySection {
    fn default() -> Self {
        Self {
            preset: ActionPreset::Eight,
            train_target: EvalTarget::Valid,
            eval_target: EvalTarget::Test,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StudyConfig {
    pub groups: Vec<GroupSpec>,
    pub selection: Metric,
    pub target: EvalTarget,
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self {
            groups: vec![
                GroupSpec::default(),
                GroupSpec::Cluster { k: 3, seed: 42 },
                GroupSpec::Cluster { k: 5, seed: 42 },
            ],
            selection: Metric::Hr(10),
            target: EvalTarget::Test,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// When set, overrides every component seed.
    pub seed: Option<u64>,
    /// Output directory; falls back to the environment, then `adatta-out`.
    pub out_dir: Option<PathBuf>,
    pub report_format: ReportFormatField,
    pub data: DataConfig,
    pub backbone: BackboneConfig,
    pub operators: OperatorParams,
    pub tta: TtaConfig,
    pub reward: RewardConfig,
    pub ppo: PpoConfig,
    pub policy: PolicySection,
    pub study: StudyConfig,
}

impl Default for RunConfig {
    /// Component defaults, except for a small recurrent backbone sized for
    /// the bundled synthetic data. Its junk click sits at the end of every
    /// training prefix, which a position-aware encoder memorises.
    fn default() -> Self {
        Self {
            seed: None,
            out_dir: None,
            report_format: ReportFormatField::default(),
            data: DataConfig::default(),
            backbone: demo_backbone(),
            operators: OperatorParams::default(),
            tta: TtaConfig::default(),
            reward: RewardConfig::default(),
            ppo: PpoConfig::default(),
            policy: PolicySection::default(),
            study: StudyConfig::default(),
        }
    }
}

pub fn demo_backbone() -> BackboneConfig {
    BackboneConfig {
        kind: BackboneKind::Recurrent,
        embed_dim: 32,
        max_len: 20,
        lr: 0.005,
        batch_size: 64,
        epochs: 8,
        rng_seed: 3,
    }
}

fn merge(base: &mut toml::Value, over: toml::Value) {
    match (base, over) {
        (toml::Value::Table(b), toml::Value::Table(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) if slot.is_table() && v.is_table() => merge(slot, v),
                    _ => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (b, o) => *b = o,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ReportFormatField(pub ReportFormat);

impl Default for ReportFormatField {
    fn default() -> Self {
        Self(ReportFormat::Tsv)
    }
}

impl RunConfig {
    /// Parses a possibly partial file; every key left out keeps its value
    /// from [`RunConfig::default`], including keys inside a present table.
    pub fn from_toml(text: &str) -> Result<Self> {
        let err = |e: &dyn std::fmt::Display| Error::Config(e.to_string());
        let over: toml::Value = toml::from_str(text).map_err(|e| err(&e))?;
        let mut base = toml::Value::try_from(Self::default()).map_err(|e| err(&e))?;
        merge(&mut base, over);
        base.try_into().map_err(|e| err(&e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Propagates the global seed (if any) into every component.
    pub fn apply_seed(&mut self) {
        if let Some(s) = self.seed {
            self.data.synthetic.rng_seed = s;
            self.backbone.rng_seed = s;
            self.tta.seed = s;
            self.ppo.seed = s;
            for g in &mut self.study.groups {
                if let GroupSpec::Cluster { seed, .. } = g {
                    *seed = s;
                }
            }
        }
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out_dir
            .clone()
            .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR))
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(p) = &self.data.input {
            if !p.is_file() {
                return Err(Error::Config(format!("input file {} does not exist", p.display())));
            }
        } else {
            self.data.synthetic.validate()?;
        }
        if self.data.k_core == 0 {
            return Err(Error::Config("k_core must be >= 1".into()));
        }
        self.backbone.validate()?;
        self.operators.validate()?;
        self.tta.validate()?;
        self.reward.validate()?;
        self.ppo.validate()?;
        for g in &self.study.groups {
            g.validate()?;
        }
        Ok(())
    }
}
