//! Versioned JSON dataset snapshot.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::InteractionDataset;
use crate::error::{Error, Result};

pub const SNAPSHOT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Snapshot {
    format_version: u32,
    dataset: InteractionDataset,
}

pub fn save_snapshot(ds: &InteractionDataset, path: &Path) -> Result<()> {
    let snap = Snapshot {
        format_version: SNAPSHOT_VERSION,
        dataset: ds.clone(),
    };
    let bytes = serde_json::to_vec(&snap)?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn load_snapshot(path: &Path) -> Result<InteractionDataset> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let snap: Snapshot = serde_json::from_slice(&bytes)?;
    if snap.format_version != SNAPSHOT_VERSION {
        return Err(Error::Format(format!(
            "snapshot version {} (expected {SNAPSHOT_VERSION})",
            snap.format_version
        )));
    }
    let ds = snap.dataset;
    // re-derive popularity and validate indices
    let checked = InteractionDataset::from_sequences(ds.users.clone(), ds.items.clone(), ds.sequences.clone())?;
    if checked.item_popularity != ds.item_popularity {
        return Err(Error::Format("snapshot popularity does not match its sequences".into()));
    }
    Ok(checked)
}
