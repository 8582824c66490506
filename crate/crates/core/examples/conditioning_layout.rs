//! Latent slot layout for one generation step: a 77-frame block to predict
//! followed by the retrieved context frames.

use context_memory::conditioning::{assemble_batch_with_offset, TEMPORAL_COMPRESSION};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let context = [0, 14, 152, 153, 301, 459, 460, 611];
    let batch = assemble_batch_with_offset(77, &context, TEMPORAL_COMPRESSION, 4)?;
    println!(
        "{} predicted + {} context latents",
        batch.pred_len, batch.context_len
    );
    let mask: String = batch
        .update_mask()
        .iter()
        .map(|&u| if u { 'P' } else { 'c' })
        .collect();
    println!("{mask}");
    println!(
        "{}",
        serde_json::to_string_pretty(&batch.slots[batch.pred_len - 1..batch.pred_len + 2])?
    );
    Ok(())
}
