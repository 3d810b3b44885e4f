use std::collections::HashMap;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::format::{Dataset, EmbeddingRecord, NegativeMode, PairSample, Split, FLIP_SUFFIX};
use crate::error::{Error, Result};
use crate::models::Example;
use crate::nn::Tensor;

/// One positive and one negative pair per record, in record order.
///
/// `shuffle` negatives take the audio of another record drawn uniformly
/// from `records`; `theme-flip` negatives take the record's own
/// sign-flipped audio, referenced as `<id>#flip`.
pub fn sample_pairs(
    records: &[&EmbeddingRecord],
    mode: NegativeMode,
    seed: u64,
) -> Result<Vec<PairSample>> {
    sample_with(records, mode, &mut ChaCha8Rng::seed_from_u64(seed))
}

fn sample_with(
    records: &[&EmbeddingRecord],
    mode: NegativeMode,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<PairSample>> {
    let n = records.len();
    if mode == NegativeMode::Shuffle && n < 2 {
        return Err(Error::Dataset(format!(
            "shuffle negatives need at least 2 records in the split, got {n}"
        )));
    }
    let mut pairs = Vec::with_capacity(2 * n);
    for (i, r) in records.iter().enumerate() {
        pairs.push(PairSample {
            visual_id: r.id.clone(),
            audio_id: r.id.clone(),
            label: 1,
            theme_true: r.theme_id,
        });
        let audio_id = match mode {
            NegativeMode::Shuffle => {
                let mut j = rng.random_range(0..n - 1);
                if j >= i {
                    j += 1;
                }
                records[j].id.clone()
            }
            NegativeMode::ThemeFlip => {
                if r.audio_flip.is_none() {
                    return Err(Error::record(
                        &r.id,
                        "audio_flip",
                        "theme-flip negatives need a flipped audio on every record",
                    ));
                }
                format!("{}{FLIP_SUFFIX}", r.id)
            }
        };
        pairs.push(PairSample {
            visual_id: r.id.clone(),
            audio_id,
            label: 0,
            theme_true: r.theme_id,
        });
    }
    Ok(pairs)
}

impl Dataset {
    /// Pairs for one split. Each split draws from its own stream of `seed`.
    pub fn pairs(&self, split: Split, mode: NegativeMode, seed: u64) -> Result<Vec<PairSample>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(split as u64);
        sample_with(&self.split(split), mode, &mut rng)
    }

    /// Resolves pair ids into model inputs, sharing the embedding buffers.
    pub fn examples(&self, pairs: &[PairSample]) -> Result<Vec<Example>> {
        let by_id: HashMap<&str, &EmbeddingRecord> =
            self.records.iter().map(|r| (r.id.as_str(), r)).collect();
        let lookup = |id: &str| {
            by_id
                .get(id)
                .copied()
                .ok_or_else(|| Error::Dataset(format!("pair references unknown record `{id}`")))
        };
        pairs
            .iter()
            .map(|p| {
                let visual = lookup(&p.visual_id)?;
                if p.theme_true != visual.theme_id {
                    return Err(Error::record(
                        &p.visual_id,
                        "theme_true",
                        format!(
                            "pair says {}, visual record has {}",
                            p.theme_true, visual.theme_id
                        ),
                    ));
                }
                let audio: Arc<Tensor<f32>> = match p.audio_id.strip_suffix(FLIP_SUFFIX) {
                    Some(base) => lookup(base)?.audio_flip.clone().ok_or_else(|| {
                        Error::record(base, "audio_flip", "referenced by a pair but missing")
                    })?,
                    None => lookup(&p.audio_id)?.audio.clone(),
                };
                if p.is_positive() != (p.audio_id == p.visual_id) {
                    return Err(Error::record(
                        &p.visual_id,
                        "label",
                        format!("label {} inconsistent with audio `{}`", p.label, p.audio_id),
                    ));
                }
                Ok(Example {
                    visual: visual.visual.clone(),
                    audio,
                    theme: p.theme_true,
                    label: p.is_positive(),
                })
            })
            .collect()
    }
}
