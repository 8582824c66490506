use context_memory::conditioning::{
    assemble_batch, assemble_batch_with_offset, frames_to_latent_len, ConditioningError,
    SlotSource, TEMPORAL_COMPRESSION,
};
use proptest::prelude::*;

const R: usize = TEMPORAL_COMPRESSION;

#[test]
fn full_batch_layout() {
    let ids: Vec<u32> = (100..120).collect();
    let b = assemble_batch(77, &ids, R).unwrap();
    assert_eq!((b.slots.len(), b.pred_len, b.context_len), (40, 20, 20));
    let pos: Vec<usize> = b.slots.iter().map(|s| s.position_index).collect();
    assert_eq!(pos, (0..40).collect::<Vec<_>>());
    let mask = b.update_mask();
    assert!(mask[..20].iter().all(|&m| m) && mask[20..].iter().all(|&m| !m));
    assert_eq!(b.context_ids(), ids);
}

#[test]
fn small_batches() {
    let b = assemble_batch(77, &[], R).unwrap();
    assert_eq!(b.slots.len(), 20);
    assert!(b.slots.iter().all(|s| s.source == SlotSource::Predicted));
    let b = assemble_batch(77, &[9], R).unwrap();
    assert_eq!(b.slots.len(), 21);
    assert_eq!(b.slots[20].position_index, 20);
    assert_eq!(b.slots[20].source, SlotSource::Context(9));
}

#[test]
fn frame_count_rules() {
    assert_eq!(frames_to_latent_len(77, 4), Ok(20));
    assert_eq!(frames_to_latent_len(1, 3), Ok(1));
    assert_eq!(
        frames_to_latent_len(78, 4),
        Err(ConditioningError::InvalidFrameCount { frames: 78, r: 4 })
    );
    assert!(assemble_batch(78, &[1, 2], 4).is_err());
}

#[test]
fn offset_band() {
    let b = assemble_batch_with_offset(77, &[1, 2, 3], R, 100).unwrap();
    let ctx: Vec<usize> = b.slots[20..].iter().map(|s| s.position_index).collect();
    assert_eq!(ctx, [120, 121, 122]);
}

#[test]
fn descriptor_json_shape() {
    let b = assemble_batch(5, &[7], R).unwrap();
    let v = serde_json::to_value(&b).unwrap();
    assert_eq!(v["pred_len"], 2);
    assert_eq!(v["slots"][2]["source"]["kind"], "context");
    assert_eq!(v["slots"][2]["source"]["frame_id"], 7);
    assert_eq!(v["slots"][0]["source"]["kind"], "predicted");
    let back: context_memory::conditioning::ConditioningBatch = serde_json::from_value(v).unwrap();
    assert_eq!(back, b);
}

proptest! {
    #[test]
    fn predicted_block_ignores_context(n in 0usize..40, m in 0usize..64, r in 1usize..9) {
        let frames = 1 + n * r;
        let ids: Vec<u32> = (0..m as u32).map(|i| i * 3).collect();
        let bare = assemble_batch(frames, &[], r).unwrap();
        let full = assemble_batch(frames, &ids, r).unwrap();
        prop_assert_eq!(&full.slots[..full.pred_len], &bare.slots[..]);
        prop_assert_eq!(full.slots.iter().filter(|s| s.is_clean).count(), m);
        for s in &full.slots {
            prop_assert_eq!(s.is_clean, matches!(s.source, SlotSource::Context(_)));
        }
    }
}
