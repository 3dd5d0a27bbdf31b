//! Grouped operator analysis: length buckets, behavior clusters, per-group
//! operator tables and the per-group oracle.

mod kmeans;
pub mod report;

use serde::{Deserialize, Serialize};

use crate::augment::{AugAction, Augmenter};
use crate::data::{EvalTarget, InteractionDataset, LooSplit};
use crate::error::{Error, Result};
use crate::metrics::{Metric, MetricsSummary};
use crate::tta::{run_fixed_strategy, TtaConfig};

pub use kmeans::{kmeans_cluster, KMeansResult, MAX_ITERATIONS, SHIFT_TOLERANCE};
pub use report::{emit_report, export_clusters, render, ComparisonReport, Report, ReportFormat};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum GroupSpec {
    Length { thresholds: Vec<usize> },
    Cluster { k: usize, seed: u64 },
}

impl Default for GroupSpec {
    fn default() -> Self {
        GroupSpec::Length {
            thresholds: vec![8, 20],
        }
    }
}

impl GroupSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            GroupSpec::Length { thresholds } => {
                if thresholds.is_empty() || thresholds.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(Error::Config(
                        "length thresholds must be non-empty and strictly increasing".into(),
                    ));
                }
            }
            GroupSpec::Cluster { k, .. } => {
                if *k < 2 {
                    return Err(Error::Config("cluster grouping needs k >= 2".into()));
                }
            }
        }
        Ok(())
    }
}

/// Partition of evaluation users into named groups.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grouping {
    pub names: Vec<String>,
    /// Group of each evaluation user, aligned with the split list.
    pub assignment: Vec<usize>,
}

impl Grouping {
    pub fn single(n: usize) -> Self {
        Self {
            names: vec!["all".into()],
            assignment: vec![0; n],
        }
    }

    pub fn members(&self, group: usize) -> impl Iterator<Item = usize> + '_ {
        self.assignment
            .iter()
            .enumerate()
            .filter(move |(_, &g)| g == group)
            .map(|(i, _)| i)
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![0; self.names.len()];
        self.assignment.iter().for_each(|&g| s[g] += 1);
        s
    }
}

/// Group index for a full-sequence length: group `g` holds lengths in
/// `(thresholds[g−1], thresholds[g]]`, the last group everything above.
pub fn length_group(len: usize, thresholds: &[usize]) -> usize {
    thresholds
        .iter()
        .position(|&t| len <= t)
        .unwrap_or(thresholds.len())
}

pub fn length_group_names(thresholds: &[usize]) -> Vec<String> {
    let mut names = Vec::with_capacity(thresholds.len() + 1);
    for (g, t) in thresholds.iter().enumerate() {
        names.push(if g == 0 {
            format!("len<={t}")
        } else {
            format!("{}<len<={t}", thresholds[g - 1])
        });
    }
    names.push(format!("len>{}", thresholds.last().copied().unwrap_or(0)));
    names
}

/// Buckets each split's user by the length of their full sequence.
pub fn group_by_length(ds: &InteractionDataset, splits: &[LooSplit], thresholds: &[usize]) -> Grouping {
    Grouping {
        names: length_group_names(thresholds),
        assignment: splits
            .iter()
            .map(|s| length_group(ds.sequences[s.user].len(), thresholds))
            .collect(),
    }
}

/// Clusters evaluation users by the given per-user embeddings.
pub fn group_by_cluster(embeddings: &[Vec<f64>], k: usize, seed: u64) -> Result<Grouping> {
    let r = kmeans_cluster(embeddings, k, seed)?;
    Ok(Grouping {
        names: (0..k).map(|c| format!("cluster{c}")).collect(),
        assignment: r.assignment,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupedReport {
    pub group_names: Vec<String>,
    pub actions: Vec<AugAction>,
    /// `cells[g][a]`: group `g` under action `a`.
    pub cells: Vec<Vec<MetricsSummary>>,
    /// Whole-population summary per action.
    pub overall: Vec<MetricsSummary>,
    /// Per-group winner under `selection`; `None` for empty groups.
    pub best: Vec<Option<AugAction>>,
    pub selection: Metric,
    /// `ranks[a][i]`: rank of evaluation user `i` under action `a`.
    pub ranks: Vec<Vec<usize>>,
}

impl GroupedReport {
    /// Builds the table from precomputed per-user ranks.
    pub fn from_ranks(
        grouping: &Grouping,
        actions: &[AugAction],
        ranks: Vec<Vec<usize>>,
        selection: Metric,
    ) -> Result<Self> {
        if ranks.len() != actions.len()
            || ranks.iter().any(|r| r.len() != grouping.assignment.len())
        {
            return Err(Error::dim("rank table does not match actions × users"));
        }
        let cells: Vec<Vec<MetricsSummary>> = (0..grouping.names.len())
            .map(|g| {
                ranks
                    .iter()
                    .map(|r| {
                        let sub: Vec<usize> = grouping.members(g).map(|i| r[i]).collect();
                        MetricsSummary::from_ranks(&sub)
                    })
                    .collect()
            })
            .collect();
        let overall = ranks.iter().map(|r| MetricsSummary::from_ranks(r)).collect();
        let best = cells
            .iter()
            .map(|row| best_action(row, actions, selection))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            group_names: grouping.names.clone(),
            actions: actions.to_vec(),
            cells,
            overall,
            best,
            selection,
            ranks,
        })
    }

    /// Overall best fixed action and its score under `selection`.
    pub fn best_fixed(&self) -> Result<(AugAction, f64)> {
        let a = best_action(&self.overall, &self.actions, self.selection)?
            .ok_or_else(|| Error::Config("no evaluation users".into()))?;
        let i = self.actions.iter().position(|x| *x == a).expect("present");
        Ok((a, metric_of(&self.overall[i], self.selection)?))
    }
}

fn metric_of(s: &MetricsSummary, m: Metric) -> Result<f64> {
    s.get(m)
        .ok_or_else(|| Error::Config(format!("{m} is not a reported cutoff")))
}

/// First action attaining the maximum of `metric`; `None` when the group is empty.
fn best_action(row: &[MetricsSummary], actions: &[AugAction], metric: Metric) -> Result<Option<AugAction>> {
    let mut best: Option<(usize, f64)> = None;
    for (a, s) in row.iter().enumerate() {
        if s.users == 0 {
            return Ok(None);
        }
        let v = metric_of(s, metric)?;
        if best.map_or(true, |(_, b)| v > b) {
            best = Some((a, v));
        }
    }
    Ok(best.map(|(a, _)| actions[a]))
}

/// Runs every action over every evaluation user and tabulates per group.
#[allow(clippy::too_many_arguments)]
pub fn per_group_operator_table(
    aug: &Augmenter,
    ds: &InteractionDataset,
    splits: &[LooSplit],
    which: EvalTarget,
    grouping: &Grouping,
    actions: &[AugAction],
    cfg: &TtaConfig,
    selection: Metric,
) -> Result<GroupedReport> {
    if grouping.assignment.len() != splits.len() {
        return Err(Error::dim("grouping does not cover the evaluation users"));
    }
    let ranks = actions
        .iter()
        .map(|&a| Ok(run_fixed_strategy(aug, ds, splits, which, a, cfg)?.ranks()))
        .collect::<Result<Vec<_>>>()?;
    GroupedReport::from_ranks(grouping, actions, ranks, selection)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleSummary {
    pub selection: Metric,
    /// Chosen action per group (`None` for empty groups).
    pub choices: Vec<Option<AugAction>>,
    pub summary: MetricsSummary,
}

/// Per group, the action maximizing `selection`; overall metrics are the
/// user-weighted combination of each group under its chosen action.
pub fn oracle_report(grouped: &GroupedReport, selection: Metric) -> Result<OracleSummary> {
    let mut parts = Vec::new();
    let mut choices = Vec::new();
    for row in &grouped.cells {
        let choice = best_action(row, &grouped.actions, selection)?;
        if let Some(a) = choice {
            let i = grouped.actions.iter().position(|x| *x == a).expect("present");
            parts.push(row[i].clone());
        }
        choices.push(choice);
    }
    Ok(OracleSummary {
        selection,
        choices,
        summary: MetricsSummary::combine(&parts),
    })
}
