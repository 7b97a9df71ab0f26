use std::fs;
use std::path::Path;

use serde::Deserialize;

use crate::model::RatioModel;
use crate::{RatioMetaError, Result};

/// Version of the on-disk checkpoint document. Loading any other version is
/// refused outright rather than migrated.
pub const CHECKPOINT_FORMAT_VERSION: u32 = 1;

/// Write the model as a self-describing JSON text document: format version,
/// architecture, normalization statistics, and every parameter tensor as
/// decimal floating-point literals with full round-trip precision.
pub fn save_checkpoint(model: &RatioModel, path: &Path) -> Result<()> {
    model.validate()?;
    let text = serde_json::to_string_pretty(model)
        .map_err(|e| RatioMetaError::CheckpointCorrupt(format!("serialize failed: {e}")))?;
    fs::write(path, text)?;
    Ok(())
}

#[derive(Deserialize)]
struct VersionProbe {
    format_version: u32,
}

/// Load a checkpoint saved by [`save_checkpoint`]. The round trip is exact:
/// `load(save(m)) == m` bit for bit.
pub fn load_checkpoint(path: &Path) -> Result<RatioModel> {
    let text = fs::read_to_string(path)?;
    let probe: VersionProbe = serde_json::from_str(&text)
        .map_err(|e| RatioMetaError::CheckpointCorrupt(format!("{e}")))?;
    if probe.format_version != CHECKPOINT_FORMAT_VERSION {
        return Err(RatioMetaError::CheckpointVersion {
            found: probe.format_version,
            supported: CHECKPOINT_FORMAT_VERSION,
        });
    }
    let model: RatioModel = serde_json::from_str(&text)
        .map_err(|e| RatioMetaError::CheckpointCorrupt(format!("{e}")))?;
    model.validate()?;
    Ok(model)
}
