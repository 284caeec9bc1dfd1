//! Per-step attention weights for offline inspection.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::features::slot_labels;

use super::{Decoder, DecoderError, DecoderParams, Features, Vocabulary, END};

/// Attention used to emit the `t`-th token (1-based).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttentionRecord {
    pub t: usize,
    pub token: String,
    pub alpha: Vec<f64>,
    pub slot_labels: Vec<String>,
}

/// Replays `tokens` (a decoded caption without `<start>` or `<end>`)
/// through the decoder and records `α_t` for every step the decoder took.
/// A caption shorter than `max_len` ended on an emitted `<end>`, whose step
/// is recorded too; one of exactly `max_len` words was cut off instead.
pub fn attention_trace(
    params: &DecoderParams,
    features: Features<'_>,
    tokens: &[usize],
    max_len: usize,
    vocab: &Vocabulary,
) -> Result<Vec<AttentionRecord>, DecoderError> {
    let mut seq = tokens.to_vec();
    if seq.len() < max_len {
        seq.push(END);
    }
    let labels = slot_labels(features.n());
    let mut dec = Decoder::new(params, features)?;
    let mut state = dec.init_state()?;
    let mut records = Vec::with_capacity(seq.len());
    for (i, &tok) in seq.iter().enumerate() {
        let out = dec.step(&state)?;
        records.push(AttentionRecord {
            t: i + 1,
            token: vocab.word(tok).unwrap_or("<unk>").to_string(),
            alpha: out.state.alpha.clone(),
            slot_labels: labels.clone(),
        });
        state = out.state;
        state.prev_token = tok;
    }
    Ok(records)
}

/// Writes the records as a pretty-printed JSON array.
pub fn write_attention_dump(path: &Path, records: &[AttentionRecord]) -> Result<(), DecoderError> {
    let json = serde_json::to_string_pretty(records).map_err(std::io::Error::other)?;
    std::fs::write(path, json + "\n")?;
    Ok(())
}
