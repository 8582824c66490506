//! Layout of a conditioning batch along the frame dimension.
//!
//! Predicted latents come first and keep positions `0..pred_len`, exactly
//! as without context. Context frames follow, one clean latent each, at
//! positions starting from `pred_len + context_offset`. Only the predicted
//! block is updated during denoising.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Temporal compression of the reference video autoencoder.
pub const TEMPORAL_COMPRESSION: usize = 4;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ConditioningError {
    #[error("{frames} frames cannot be encoded at compression {r}: need 1 + n·{r}")]
    InvalidFrameCount { frames: usize, r: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind", content = "frame_id")]
pub enum SlotSource {
    Predicted,
    Context(u32),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatentSlot {
    pub source: SlotSource,
    pub position_index: usize,
    pub is_clean: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConditioningBatch {
    pub slots: Vec<LatentSlot>,
    pub pred_len: usize,
    pub context_len: usize,
}

impl ConditioningBatch {
    /// True for slots that are denoised (the predicted block).
    pub fn update_mask(&self) -> Vec<bool> {
        self.slots.iter().map(|s| !s.is_clean).collect()
    }

    pub fn context_ids(&self) -> Vec<u32> {
        self.slots
            .iter()
            .filter_map(|s| match s.source {
                SlotSource::Context(id) => Some(id),
                SlotSource::Predicted => None,
            })
            .collect()
    }
}

/// Latent count for `frames` video frames: `1 + (frames − 1) / r`.
pub fn frames_to_latent_len(frames: usize, r: usize) -> Result<usize, ConditioningError> {
    if r == 0 || frames == 0 || !(frames - 1).is_multiple_of(r) {
        return Err(ConditioningError::InvalidFrameCount { frames, r });
    }
    Ok(1 + (frames - 1) / r)
}

/// Contiguous positions: context directly after the predicted block.
pub fn assemble_batch(
    pred_frames: usize,
    context_ids: &[u32],
    r: usize,
) -> Result<ConditioningBatch, ConditioningError> {
    assemble_batch_with_offset(pred_frames, context_ids, r, 0)
}

/// Context positions start `context_offset` past the predicted block.
pub fn assemble_batch_with_offset(
    pred_frames: usize,
    context_ids: &[u32],
    r: usize,
    context_offset: usize,
) -> Result<ConditioningBatch, ConditioningError> {
    let pred_len = frames_to_latent_len(pred_frames, r)?;
    let predicted = (0..pred_len).map(|i| LatentSlot {
        source: SlotSource::Predicted,
        position_index: i,
        is_clean: false,
    });
    let context = context_ids.iter().enumerate().map(|(i, &id)| LatentSlot {
        source: SlotSource::Context(id),
        position_index: pred_len + context_offset + i,
        is_clean: true,
    });
    Ok(ConditioningBatch {
        slots: predicted.chain(context).collect(),
        pred_len,
        context_len: context_ids.len(),
    })
}
