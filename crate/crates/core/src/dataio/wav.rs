//! Minimal RIFF/WAVE codec: PCM 8/16/24/32-bit and IEEE float 32/64 in,
//! PCM 16-bit mono out.

use super::DataError;
use std::io::{Read, Write};
use std::path::Path;

pub(crate) struct WavData {
    pub channels: u16,
    pub sample_rate: u32,
    /// Interleaved samples scaled to [-1, 1].
    pub samples: Vec<f64>,
}

fn bad(path: &Path, reason: &str) -> DataError {
    DataError::UndecodableAudio { path: path.to_path_buf(), reason: reason.to_string() }
}

fn u16le(b: &[u8]) -> u16 {
    u16::from_le_bytes([b[0], b[1]])
}

fn u32le(b: &[u8]) -> u32 {
    u32::from_le_bytes([b[0], b[1], b[2], b[3]])
}

/// Read a WAV file. Returns interleaved normalized samples.
pub fn read_wav(path: &Path) -> Result<(Vec<f64>, u16, u32), DataError> {
    let raw = read_wav_data(path)?;
    Ok((raw.samples, raw.channels, raw.sample_rate))
}

pub(crate) fn read_wav_data(path: &Path) -> Result<WavData, DataError> {
    if !path.exists() {
        return Err(DataError::MissingFile(path.to_path_buf()));
    }
    let mut buf = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut buf)?;
    if buf.len() < 12 || &buf[0..4] != b"RIFF" || &buf[8..12] != b"WAVE" {
        return Err(bad(path, "not a RIFF/WAVE stream"));
    }

    let mut pos = 12usize;
    let mut fmt: Option<(u16, u16, u32, u16)> = None; // (format, channels, rate, bits)
    let mut data: Option<&[u8]> = None;
    while pos + 8 <= buf.len() {
        let id = &buf[pos..pos + 4];
        let size = u32le(&buf[pos + 4..pos + 8]) as usize;
        let body_start = pos + 8;
        let body_end = (body_start + size).min(buf.len());
        match id {
            b"fmt " => {
                if size < 16 {
                    return Err(bad(path, "fmt chunk too small"));
                }
                let b = &buf[body_start..body_end];
                fmt = Some((u16le(&b[0..2]), u16le(&b[2..4]), u32le(&b[4..8]), u16le(&b[14..16])));
            }
            b"data" => {
                data = Some(&buf[body_start..body_end]);
            }
            _ => {}
        }
        // chunks are word-aligned
        pos = body_start + size + (size & 1);
    }
    let (format, channels, sample_rate, bits) = fmt.ok_or_else(|| bad(path, "missing fmt chunk"))?;
    let data = data.ok_or_else(|| bad(path, "missing data chunk"))?;
    if channels == 0 || sample_rate == 0 {
        return Err(bad(path, "degenerate fmt fields"));
    }

    let samples: Vec<f64> = match (format, bits) {
        // PCM
        (1, 8) => data.iter().map(|&b| (b as f64 - 128.0) / 128.0).collect(),
        (1, 16) => data
            .chunks_exact(2)
            .map(|c| i16::from_le_bytes([c[0], c[1]]) as f64 / 32768.0)
            .collect(),
        (1, 24) => data
            .chunks_exact(3)
            .map(|c| {
                let v = i32::from_le_bytes([0, c[0], c[1], c[2]]) >> 8;
                v as f64 / 8_388_608.0
            })
            .collect(),
        (1, 32) => data
            .chunks_exact(4)
            .map(|c| i32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64 / 2_147_483_648.0)
            .collect(),
        // IEEE float
        (3, 32) => data
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
            .collect(),
        (3, 64) => data
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes([c[0], c[1], c[2], c[3], c[4], c[5], c[6], c[7]]))
            .collect(),
        (f, b) => return Err(bad(path, &format!("unsupported wav encoding: format {f}, {b} bits"))),
    };
    if samples.is_empty() {
        return Err(DataError::ZeroLengthAudio(path.to_path_buf()));
    }
    Ok(WavData { channels, sample_rate, samples })
}

/// Write mono samples as 16-bit PCM. Values are clamped to [-1, 1] before
/// quantization, so output bytes are a pure function of the input.
pub fn write_wav_mono16(path: &Path, samples: &[f64], sample_rate: u32) -> Result<(), DataError> {
    let n = samples.len();
    let data_len = (n * 2) as u32;
    let mut out = Vec::with_capacity(44 + n * 2);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(36 + data_len).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes()); // PCM
    out.extend_from_slice(&1u16.to_le_bytes()); // mono
    out.extend_from_slice(&sample_rate.to_le_bytes());
    out.extend_from_slice(&(sample_rate * 2).to_le_bytes()); // byte rate
    out.extend_from_slice(&2u16.to_le_bytes()); // block align
    out.extend_from_slice(&16u16.to_le_bytes()); // bits
    out.extend_from_slice(b"data");
    out.extend_from_slice(&data_len.to_le_bytes());
    for &s in samples {
        let q = (s.clamp(-1.0, 1.0) * 32767.0).round() as i16;
        out.extend_from_slice(&q.to_le_bytes());
    }
    let mut f = std::fs::File::create(path)
        .map_err(|_| DataError::UnwritableDirectory(path.parent().unwrap_or(path).to_path_buf()))?;
    f.write_all(&out)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_mono16() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.wav");
        let samples: Vec<f64> = (0..100).map(|i| ((i as f64) * 0.37).sin() * 0.8).collect();
        write_wav_mono16(&path, &samples, 16_000).unwrap();
        let (read, ch, rate) = read_wav(&path).unwrap();
        assert_eq!(ch, 1);
        assert_eq!(rate, 16_000);
        assert_eq!(read.len(), samples.len());
        for (a, b) in read.iter().zip(&samples) {
            assert!((a - b).abs() < 1.0 / 32000.0);
        }
    }

    #[test]
    fn rejects_garbage() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.wav");
        std::fs::write(&path, b"not audio at all").unwrap();
        assert!(matches!(read_wav(&path), Err(DataError::UndecodableAudio { .. })));
    }

    #[test]
    fn missing_file() {
        assert!(matches!(
            read_wav(Path::new("/nonexistent/x.wav")),
            Err(DataError::MissingFile(_))
        ));
    }
}
