//! Audio decode + normalization to the canonical format.

use super::{resample, wav, AudioClip, DataError, ManifestEntry};
use std::collections::HashMap;
use std::path::Path;
use std::sync::{Arc, RwLock};

fn decode(path: &Path) -> Result<(Vec<f64>, u16, u32), DataError> {
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(|e| e.to_ascii_lowercase())
        .unwrap_or_default();
    match ext.as_str() {
        "wav" => wav::read_wav(path),
        "flac" => read_flac(path),
        other => Err(DataError::UndecodableAudio {
            path: path.to_path_buf(),
            reason: format!("unsupported container {other:?} (wav and flac are accepted)"),
        }),
    }
}

fn read_flac(path: &Path) -> Result<(Vec<f64>, u16, u32), DataError> {
    if !path.exists() {
        return Err(DataError::MissingFile(path.to_path_buf()));
    }
    let mut reader = claxon::FlacReader::open(path).map_err(|e| DataError::UndecodableAudio {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    let info = reader.streaminfo();
    let scale = (1i64 << (info.bits_per_sample - 1)) as f64;
    let mut samples = Vec::new();
    for s in reader.samples() {
        let v = s.map_err(|e| DataError::UndecodableAudio {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
        samples.push(v as f64 / scale);
    }
    if samples.is_empty() {
        return Err(DataError::ZeroLengthAudio(path.to_path_buf()));
    }
    Ok((samples, info.channels as u16, info.sample_rate))
}

fn mixdown(interleaved: &[f64], channels: u16) -> Vec<f64> {
    if channels <= 1 {
        return interleaved.to_vec();
    }
    let ch = channels as usize;
    interleaved
        .chunks_exact(ch)
        .map(|frame| frame.iter().sum::<f64>() / ch as f64)
        .collect()
}

/// Decode, mix to mono, resample to `target_rate`, and clamp to [-1, 1].
pub fn load_audio(path: &Path, target_rate: u32) -> Result<AudioClip, DataError> {
    let utt_id = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("unknown")
        .to_string();
    load_audio_as(path, target_rate, &utt_id)
}

/// Same as [`load_audio`] but with the caller-supplied utterance id.
pub fn load_audio_as(path: &Path, target_rate: u32, utt_id: &str) -> Result<AudioClip, DataError> {
    if !path.exists() {
        return Err(DataError::MissingFile(path.to_path_buf()));
    }
    let (interleaved, channels, rate) = decode(path)?;
    let mono = mixdown(&interleaved, channels);
    if mono.is_empty() {
        return Err(DataError::ZeroLengthAudio(path.to_path_buf()));
    }
    let mut samples = if rate == target_rate {
        mono
    } else {
        resample::resample(&mono, rate, target_rate)
    };
    for s in &mut samples {
        *s = s.clamp(-1.0, 1.0);
    }
    Ok(AudioClip { utt_id: utt_id.to_string(), samples, sample_rate: target_rate })
}

/// Thread-safe decode cache keyed by utterance id.
///
/// Decoding is a pure function of the file, so double decodes under
/// contention are harmless; the cache is an optimization only.
#[derive(Default)]
pub struct DecodeCache {
    clips: RwLock<HashMap<String, Arc<AudioClip>>>,
}

impl DecodeCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get_or_load(
        &self,
        entry: &ManifestEntry,
        target_rate: u32,
    ) -> Result<Arc<AudioClip>, DataError> {
        if let Some(clip) = self.clips.read().unwrap().get(&entry.utt_id) {
            return Ok(Arc::clone(clip));
        }
        let clip = Arc::new(load_audio_as(&entry.path, target_rate, &entry.utt_id)?);
        self.clips
            .write()
            .unwrap()
            .insert(entry.utt_id.clone(), Arc::clone(&clip));
        Ok(clip)
    }

    pub fn len(&self) -> usize {
        self.clips.read().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataio::{write_wav_mono16, CANONICAL_RATE};

    #[test]
    fn no_resample_preserves_duration() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.wav");
        let samples = vec![0.1f64; 64_000];
        write_wav_mono16(&p, &samples, 16_000).unwrap();
        let clip = load_audio(&p, CANONICAL_RATE).unwrap();
        assert_eq!(clip.samples.len(), 64_000);
        assert!((clip.duration() - 4.0).abs() < 1e-12);
        assert!(clip.validate());
    }

    #[test]
    fn rate_ratio_preserves_duration() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("b.wav");
        let samples: Vec<f64> = (0..48_000)
            .map(|i| (2.0 * std::f64::consts::PI * 440.0 * i as f64 / 48_000.0).sin() * 0.5)
            .collect();
        write_wav_mono16(&p, &samples, 48_000).unwrap();
        let clip = load_audio(&p, CANONICAL_RATE).unwrap();
        assert_eq!(clip.samples.len(), 16_000);
        assert!((clip.duration() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn stereo_mixes_to_channel_mean() {
        // Hand-build a stereo PCM16 WAV: c1 = 0.5, c2 = -0.25 constant.
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.wav");
        let n = 1000usize;
        let mut bytes = Vec::new();
        let data_len = (n * 4) as u32;
        bytes.extend_from_slice(b"RIFF");
        bytes.extend_from_slice(&(36 + data_len).to_le_bytes());
        bytes.extend_from_slice(b"WAVEfmt ");
        bytes.extend_from_slice(&16u32.to_le_bytes());
        bytes.extend_from_slice(&1u16.to_le_bytes());
        bytes.extend_from_slice(&2u16.to_le_bytes());
        bytes.extend_from_slice(&16_000u32.to_le_bytes());
        bytes.extend_from_slice(&64_000u32.to_le_bytes());
        bytes.extend_from_slice(&4u16.to_le_bytes());
        bytes.extend_from_slice(&16u16.to_le_bytes());
        bytes.extend_from_slice(b"data");
        bytes.extend_from_slice(&data_len.to_le_bytes());
        let c1 = (0.5f64 * 32767.0).round() as i16;
        let c2 = (-0.25f64 * 32767.0).round() as i16;
        for _ in 0..n {
            bytes.extend_from_slice(&c1.to_le_bytes());
            bytes.extend_from_slice(&c2.to_le_bytes());
        }
        std::fs::write(&p, bytes).unwrap();
        let clip = load_audio(&p, CANONICAL_RATE).unwrap();
        assert_eq!(clip.samples.len(), n);
        let expected = (c1 as f64 / 32768.0 + c2 as f64 / 32768.0) / 2.0;
        for s in &clip.samples {
            assert!((s - expected).abs() < 1e-12);
        }
    }
}
