//! Corpus statistics.

use super::{CorpusStats, DataError, DatasetManifest, Label};
use std::collections::{HashMap, HashSet};

/// Aggregate counts and per-label hours from a manifest and a duration map
/// (`utt_id -> seconds`). Fails on the first utterance without a duration.
pub fn corpus_stats(
    manifest: &DatasetManifest,
    durations: &HashMap<String, f64>,
) -> Result<CorpusStats, DataError> {
    manifest.validate()?;
    let mut speakers: HashSet<&str> = HashSet::new();
    let mut seconds_bona = 0.0;
    let mut seconds_spoof = 0.0;
    let mut n_bona = 0usize;
    let mut n_spoof = 0usize;
    let mut total_seconds = 0.0;
    for e in &manifest.entries {
        let d = *durations
            .get(&e.utt_id)
            .ok_or_else(|| DataError::MissingDuration(e.utt_id.clone()))?;
        speakers.insert(e.speaker_id.as_str());
        total_seconds += d;
        match e.label {
            Label::Bonafide => {
                n_bona += 1;
                seconds_bona += d;
            }
            Label::Spoof => {
                n_spoof += 1;
                seconds_spoof += d;
            }
        }
    }
    Ok(CorpusStats {
        n_speakers: speakers.len(),
        hours_bonafide: seconds_bona / 3600.0,
        hours_spoof: seconds_spoof / 3600.0,
        n_bonafide: n_bona,
        n_spoof: n_spoof,
        mean_clip_seconds: total_seconds / manifest.entries.len() as f64,
    })
}
