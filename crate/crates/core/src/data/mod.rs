//! Interaction logs: ingestion, k-core filtering, leave-one-out splits,
//! popularity statistics and a synthetic generator.

mod snapshot;
mod synthetic;

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use snapshot::{load_snapshot, save_snapshot, SNAPSHOT_VERSION};
pub use synthetic::{
    generate_synthetic, generate_synthetic_labeled, PopulationSpec, SyntheticDataset,
    SyntheticSpec, TransitionKind,
};

/// Dense item index. `0` is padding, `1..=num_items` are items and
/// `num_items + 1` is the mask token.
pub type ItemIdx = usize;

pub const PAD: ItemIdx = 0;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Interaction {
    pub user_id: String,
    pub item_id: String,
    pub timestamp: i64,
}

/// Bijection between external string ids and dense indices.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(from = "Vec<String>", into = "Vec<String>")]
pub struct IdMap {
    names: Vec<String>,
    lookup: HashMap<String, usize>,
}

impl From<Vec<String>> for IdMap {
    fn from(names: Vec<String>) -> Self {
        let lookup = names
            .iter()
            .enumerate()
            .map(|(i, n)| (n.clone(), i))
            .collect();
        Self { names, lookup }
    }
}

impl From<IdMap> for Vec<String> {
    fn from(m: IdMap) -> Self {
        m.names
    }
}

impl PartialEq for IdMap {
    fn eq(&self, other: &Self) -> bool {
        self.names == other.names
    }
}

impl IdMap {
    /// Returns the dense position of `name`, inserting it if unseen.
    pub fn intern(&mut self, name: &str) -> usize {
        if let Some(&i) = self.lookup.get(name) {
            return i;
        }
        self.names.push(name.to_string());
        self.lookup.insert(name.to_string(), self.names.len() - 1);
        self.names.len() - 1
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.lookup.get(name).copied()
    }

    pub fn name(&self, pos: usize) -> &str {
        &self.names[pos]
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InteractionDataset {
    /// Position `u` holds the external id of user `u`.
    pub users: IdMap,
    /// Position `i` holds the external id of item index `i + 1`.
    pub items: IdMap,
    /// Per-user chronological item indices.
    pub sequences: Vec<Vec<ItemIdx>>,
    /// Interaction count per item index (length `num_items + 2`).
    pub item_popularity: Vec<usize>,
}

impl InteractionDataset {
    pub fn num_users(&self) -> usize {
        self.sequences.len()
    }

    pub fn num_items(&self) -> usize {
        self.items.len()
    }

    pub fn mask_token(&self) -> ItemIdx {
        self.num_items() + 1
    }

    pub fn user_id(&self, user: usize) -> &str {
        self.users.name(user)
    }

    pub fn item_id(&self, item: ItemIdx) -> &str {
        self.items.name(item - 1)
    }

    pub fn num_interactions(&self) -> usize {
        self.sequences.iter().map(Vec::len).sum()
    }

    /// Builds a dataset from per-user sequences over items `1..=num_items`,
    /// recomputing popularity.
    pub fn from_sequences(
        users: IdMap,
        items: IdMap,
        sequences: Vec<Vec<ItemIdx>>,
    ) -> Result<Self> {
        let n = items.len();
        let mut item_popularity = vec![0; n + 2];
        for s in &sequences {
            for &i in s {
                if i == PAD || i > n {
                    return Err(Error::ItemOutOfRange {
                        item: i,
                        num_items: n,
                    });
                }
                item_popularity[i] += 1;
            }
        }
        if users.len() != sequences.len() {
            return Err(Error::Format(format!(
                "{} user ids for {} sequences",
                users.len(),
                sequences.len()
            )));
        }
        Ok(Self {
            users,
            items,
            sequences,
            item_popularity,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InputFormat {
    Tsv,
    Csv,
    /// Tab if the first line has a tab, otherwise comma.
    Auto,
}

fn parse_rows(text: &str, path: &Path, format: InputFormat) -> Result<Vec<Interaction>> {
    let sep = match format {
        InputFormat::Tsv => '\t',
        InputFormat::Csv => ',',
        InputFormat::Auto => {
            if text.lines().next().is_some_and(|l| l.contains('\t')) {
                '\t'
            } else {
                ','
            }
        }
    };
    let mut rows = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(sep).map(str::trim).collect();
        let err = |msg: String| Error::Parse {
            path: path.to_path_buf(),
            line: lineno + 1,
            msg,
        };
        if fields.len() != 3 {
            return Err(err(format!("expected 3 fields, found {}", fields.len())));
        }
        let timestamp = match fields[2].parse::<i64>() {
            Ok(t) => t,
            // a non-numeric timestamp on the first line is a header
            Err(_) if rows.is_empty() && lineno == 0 => continue,
            Err(_) => return Err(err(format!("bad timestamp `{}`", fields[2]))),
        };
        if fields[0].is_empty() || fields[1].is_empty() {
            return Err(err("empty user or item id".into()));
        }
        rows.push(Interaction {
            user_id: fields[0].to_string(),
            item_id: fields[1].to_string(),
            timestamp,
        });
    }
    Ok(rows)
}

/// Assigns dense ids in first-seen order and sorts each user's interactions
/// by timestamp (stable, so ties keep file order).
pub fn from_interactions(rows: &[Interaction]) -> Result<InteractionDataset> {
    if rows.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut users = IdMap::default();
    let mut items = IdMap::default();
    let mut per_user: Vec<Vec<(i64, ItemIdx)>> = Vec::new();
    for r in rows {
        let u = users.intern(&r.user_id);
        let i = items.intern(&r.item_id) + 1;
        if u == per_user.len() {
            per_user.push(Vec::new());
        }
        per_user[u].push((r.timestamp, i));
    }
    let sequences = per_user
        .into_iter()
        .map(|mut s| {
            s.sort_by_key(|&(t, _)| t);
            s.into_iter().map(|(_, i)| i).collect()
        })
        .collect();
    InteractionDataset::from_sequences(users, items, sequences)
}

pub fn ingest(path: &Path, format: InputFormat) -> Result<InteractionDataset> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let rows = parse_rows(&text, path, format)?;
    from_interactions(&rows)
}

/// Iteratively drops users and items with fewer than `k` interactions until
/// nothing changes, then re-densifies ids preserving their relative order.
pub fn k_core_filter(ds: &InteractionDataset, k: usize) -> Result<InteractionDataset> {
    if k == 0 {
        return Err(Error::Config("k-core requires k >= 1".into()));
    }
    let mut seqs: Vec<Vec<ItemIdx>> = ds.sequences.clone();
    let mut alive_user = vec![true; seqs.len()];
    loop {
        let mut counts = vec![0usize; ds.num_items() + 2];
        for (u, s) in seqs.iter().enumerate() {
            if alive_user[u] {
                for &i in s {
                    counts[i] += 1;
                }
            }
        }
        let mut changed = false;
        for (u, s) in seqs.iter_mut().enumerate() {
            if !alive_user[u] {
                continue;
            }
            let before = s.len();
            s.retain(|&i| counts[i] >= k);
            changed |= s.len() != before;
            if s.len() < k {
                alive_user[u] = false;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }

    let mut item_remap = vec![0usize; ds.num_items() + 2];
    let mut items = IdMap::default();
    let mut used = vec![false; ds.num_items() + 2];
    for (u, s) in seqs.iter().enumerate() {
        if alive_user[u] {
            s.iter().for_each(|&i| used[i] = true);
        }
    }
    for i in 1..=ds.num_items() {
        if used[i] {
            item_remap[i] = items.intern(ds.item_id(i)) + 1;
        }
    }
    let mut users = IdMap::default();
    let mut sequences = Vec::new();
    for (u, s) in seqs.into_iter().enumerate() {
        if alive_user[u] {
            users.intern(ds.user_id(u));
            sequences.push(s.into_iter().map(|i| item_remap[i]).collect());
        }
    }
    if sequences.is_empty() {
        return Err(Error::EmptyAfterFilter { k });
    }
    InteractionDataset::from_sequences(users, items, sequences)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LooSplit {
    pub user: usize,
    pub train_prefix: Vec<ItemIdx>,
    pub valid_target: ItemIdx,
    pub test_target: ItemIdx,
}

impl LooSplit {
    /// Inference context for predicting the validation target.
    pub fn valid_input(&self) -> &[ItemIdx] {
        &self.train_prefix
    }

    /// Inference context for predicting the test target: prefix + validation item.
    pub fn test_input(&self) -> Vec<ItemIdx> {
        let mut s = self.train_prefix.clone();
        s.push(self.valid_target);
        s
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EvalTarget {
    Valid,
    Test,
}

impl LooSplit {
    pub fn input_and_target(&self, which: EvalTarget) -> (Vec<ItemIdx>, ItemIdx) {
        match which {
            EvalTarget::Valid => (self.train_prefix.clone(), self.valid_target),
            EvalTarget::Test => (self.test_input(), self.test_target),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SplitResult {
    pub splits: Vec<LooSplit>,
    /// Users skipped because their sequence has fewer than three items.
    pub dropped: usize,
}

pub fn split_leave_one_out(ds: &InteractionDataset) -> SplitResult {
    let mut splits = Vec::with_capacity(ds.num_users());
    let mut dropped = 0;
    for (user, s) in ds.sequences.iter().enumerate() {
        let n = s.len();
        if n < 3 {
            dropped += 1;
            continue;
        }
        splits.push(LooSplit {
            user,
            train_prefix: s[..n - 2].to_vec(),
            valid_target: s[n - 2],
            test_target: s[n - 1],
        });
    }
    SplitResult { splits, dropped }
}

/// Per-item popularity percentile (`rank / num_items`, ascending count,
/// average rank on ties). Indexed by item; padding and mask entries are 0.
pub fn popularity_percentiles(ds: &InteractionDataset) -> Result<Vec<f64>> {
    let n = ds.num_items();
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    let mut order: Vec<ItemIdx> = (1..=n).collect();
    order.sort_by_key(|&i| ds.item_popularity[i]);
    let mut pct = vec![0.0; n + 2];
    let mut start = 0;
    while start < n {
        let c = ds.item_popularity[order[start]];
        let mut end = start;
        while end < n && ds.item_popularity[order[end]] == c {
            end += 1;
        }
        // ranks start+1 ..= end share their mean
        let avg_rank = (start + 1 + end) as f64 / 2.0;
        for &i in &order[start..end] {
            pct[i] = avg_rank / n as f64;
        }
        start = end;
    }
    Ok(pct)
}
