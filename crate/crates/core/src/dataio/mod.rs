//! Dataset loading: audio decode and normalization, protocol/metadata
//! parsing, corpus statistics, and the synthetic desk-scale corpus.

mod audio;
mod manifest;
mod resample;
mod stats;
mod synth;
mod wav;

pub use audio::{load_audio, load_audio_as, DecodeCache};
pub use manifest::{
    parse_asvspoof_protocol, parse_itw_manifest, serialize_asvspoof_protocol,
    serialize_itw_manifest, ProtocolOptions,
};
pub use resample::resample;
pub use stats::corpus_stats;
pub use synth::{generate_synthetic_corpus, spectral_centroid_hz};
pub use wav::{read_wav, write_wav_mono16};

use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

/// Canonical sample rate; every clip is normalized to this on load.
pub const CANONICAL_RATE: u32 = 16_000;

/// Environment variable naming the default dataset root directory.
pub const DATA_ROOT_ENV: &str = "SPOOFBENCH_DATA_ROOT";

/// Dataset root: explicit override, else `$SPOOFBENCH_DATA_ROOT`, else cwd.
pub fn data_root(override_path: Option<&Path>) -> PathBuf {
    if let Some(p) = override_path {
        return p.to_path_buf();
    }
    match std::env::var_os(DATA_ROOT_ENV) {
        Some(v) => PathBuf::from(v),
        None => PathBuf::from("."),
    }
}

#[derive(Debug, thiserror::Error)]
pub enum DataError {
    #[error("file not found: {0}")]
    MissingFile(PathBuf),
    #[error("cannot decode {path}: {reason}")]
    UndecodableAudio { path: PathBuf, reason: String },
    #[error("audio stream is empty: {0}")]
    ZeroLengthAudio(PathBuf),
    #[error("malformed protocol line {line_no}")]
    MalformedLine { line_no: usize },
    #[error("unknown key {key:?} on line {line_no}")]
    UnknownKey { line_no: usize, key: String },
    #[error("duplicate utterance id {0:?}")]
    DuplicateUttId(String),
    #[error("metadata is missing required column {0:?}")]
    MissingColumn(String),
    #[error("unknown label value {0:?}")]
    UnknownLabel(String),
    #[error("no duration recorded for utterance {0:?}")]
    MissingDuration(String),
    #[error("cannot write to directory {0}")]
    UnwritableDirectory(PathBuf),
    #[error("manifest is empty")]
    EmptyManifest,
    #[error("manifest mixes split tags {0:?} and {1:?}")]
    MixedSplits(Split, Split),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Bonafide,
    Spoof,
}

impl Label {
    pub fn is_bonafide(self) -> bool {
        matches!(self, Label::Bonafide)
    }
}

/// Attack system tag (`A01`..`A19`) or none for bona-fide utterances.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Attack {
    None,
    Id(String),
}

impl Attack {
    pub fn parse(field: &str) -> Option<Attack> {
        if field == "-" {
            return Some(Attack::None);
        }
        let bytes = field.as_bytes();
        if bytes.len() == 3
            && bytes[0] == b'A'
            && bytes[1].is_ascii_digit()
            && bytes[2].is_ascii_digit()
        {
            Some(Attack::Id(field.to_string()))
        } else {
            None
        }
    }

    pub fn as_field(&self) -> &str {
        match self {
            Attack::None => "-",
            Attack::Id(s) => s,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Dev,
    Eval,
    Itw,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Dev => "dev",
            Split::Eval => "eval",
            Split::Itw => "itw",
        }
    }
}

impl std::str::FromStr for Split {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "train" => Ok(Split::Train),
            "dev" => Ok(Split::Dev),
            "eval" => Ok(Split::Eval),
            "itw" => Ok(Split::Itw),
            other => Err(format!("unknown split {other:?}")),
        }
    }
}

/// One labeled utterance of a dataset manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub utt_id: String,
    pub speaker_id: String,
    pub attack: Attack,
    pub label: Label,
    pub path: PathBuf,
    pub split: Split,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub name: String,
    pub entries: Vec<ManifestEntry>,
}

impl DatasetManifest {
    /// Validate the manifest invariants: non-empty, unique ids, one split,
    /// and bona-fide entries carrying no attack tag.
    pub fn validate(&self) -> Result<(), DataError> {
        if self.entries.is_empty() {
            return Err(DataError::EmptyManifest);
        }
        let split = self.entries[0].split;
        let mut seen = std::collections::HashSet::new();
        for e in &self.entries {
            if e.split != split {
                return Err(DataError::MixedSplits(split, e.split));
            }
            if !seen.insert(e.utt_id.as_str()) {
                return Err(DataError::DuplicateUttId(e.utt_id.clone()));
            }
            if e.label == Label::Bonafide {
                debug_assert_eq!(e.attack, Attack::None);
            }
        }
        Ok(())
    }

    pub fn split(&self) -> Option<Split> {
        self.entries.first().map(|e| e.split)
    }

    /// Merge several manifests into a single training pool. The split-tag
    /// invariant applies per source manifest, not to the merged view, so the
    /// result is only intended for iteration.
    pub fn merged(name: &str, parts: &[&DatasetManifest]) -> DatasetManifest {
        let mut entries = Vec::new();
        for p in parts {
            entries.extend(p.entries.iter().cloned());
        }
        DatasetManifest { name: name.to_string(), entries }
    }
}

/// Decoded mono waveform at a known rate.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioClip {
    pub utt_id: String,
    pub samples: Vec<f64>,
    pub sample_rate: u32,
}

impl AudioClip {
    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    /// Check the normalized-clip invariants.
    pub fn validate(&self) -> bool {
        self.sample_rate == CANONICAL_RATE
            && !self.samples.is_empty()
            && self.samples.iter().all(|s| s.is_finite() && (-1.0..=1.0).contains(s))
    }
}

/// Corpus-level statistics derived from a manifest plus clip durations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub n_speakers: usize,
    pub hours_bonafide: f64,
    pub hours_spoof: f64,
    pub n_bonafide: usize,
    pub n_spoof: usize,
    pub mean_clip_seconds: f64,
}
