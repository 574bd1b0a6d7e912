//! Protocol and metadata parsers.
//!
//! Two on-disk formats are understood:
//! - ASVspoof CM protocol: five whitespace-separated columns per line,
//!   `speaker utt_id unused attack_or_dash key`.
//! - In-the-wild metadata: CSV with header `file,speaker,label` and label
//!   values `bona-fide` / `spoof`.

use super::{Attack, DataError, DatasetManifest, Label, ManifestEntry, Split};
use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::Path;

/// How protocol entries resolve to audio files.
#[derive(Debug, Clone)]
pub struct ProtocolOptions {
    /// File extension appended to `utt_id` (without the dot).
    pub extension: String,
    /// Split tag stamped on every entry.
    pub split: Split,
    /// Manifest display name.
    pub name: String,
}

impl ProtocolOptions {
    pub fn new(extension: &str, split: Split, name: &str) -> Self {
        ProtocolOptions {
            extension: extension.trim_start_matches('.').to_string(),
            split,
            name: name.to_string(),
        }
    }
}

/// Parse an ASVspoof-style CM protocol file.
pub fn parse_asvspoof_protocol(
    text: &str,
    audio_root: &Path,
    opts: &ProtocolOptions,
) -> Result<DatasetManifest, DataError> {
    let mut entries = Vec::new();
    let mut seen: HashSet<String> = HashSet::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 5 {
            return Err(DataError::MalformedLine { line_no });
        }
        let (speaker, utt, _unused, attack_field, key) =
            (fields[0], fields[1], fields[2], fields[3], fields[4]);
        let (label, attack) = match key {
            "bonafide" => (Label::Bonafide, Attack::None),
            "spoof" => {
                let attack = Attack::parse(attack_field)
                    .ok_or(DataError::MalformedLine { line_no })?;
                (Label::Spoof, attack)
            }
            other => {
                return Err(DataError::UnknownKey { line_no, key: other.to_string() });
            }
        };
        if !seen.insert(utt.to_string()) {
            return Err(DataError::DuplicateUttId(utt.to_string()));
        }
        entries.push(ManifestEntry {
            utt_id: utt.to_string(),
            speaker_id: speaker.to_string(),
            attack,
            label,
            path: audio_root.join(format!("{utt}.{}", opts.extension)),
            split: opts.split,
        });
    }
    let manifest = DatasetManifest { name: opts.name.clone(), entries };
    manifest.validate()?;
    Ok(manifest)
}

/// Render a manifest back into the five-column protocol format.
pub fn serialize_asvspoof_protocol(manifest: &DatasetManifest) -> String {
    let mut out = String::new();
    for e in &manifest.entries {
        let key = match e.label {
            Label::Bonafide => "bonafide",
            Label::Spoof => "spoof",
        };
        let _ = writeln!(out, "{} {} - {} {}", e.speaker_id, e.utt_id, e.attack.as_field(), key);
    }
    out
}

/// Parse the in-the-wild metadata CSV.
pub fn parse_itw_manifest(
    csv_text: &str,
    audio_root: &Path,
    name: &str,
) -> Result<DatasetManifest, DataError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(csv_text.as_bytes());
    let headers = rdr.headers()?.clone();
    let col = |want: &str| -> Result<usize, DataError> {
        headers
            .iter()
            .position(|h| h == want)
            .ok_or_else(|| DataError::MissingColumn(want.to_string()))
    };
    let file_col = col("file")?;
    let speaker_col = col("speaker")?;
    let label_col = col("label")?;

    let mut entries = Vec::new();
    let mut seen: HashSet<String> = HashSet::new();
    for record in rdr.records() {
        let record = record?;
        let file = record.get(file_col).unwrap_or("").to_string();
        let speaker = record.get(speaker_col).unwrap_or("").to_string();
        let label = match record.get(label_col).unwrap_or("") {
            "bona-fide" => Label::Bonafide,
            "spoof" => Label::Spoof,
            other => return Err(DataError::UnknownLabel(other.to_string())),
        };
        if !seen.insert(file.clone()) {
            return Err(DataError::DuplicateUttId(file));
        }
        entries.push(ManifestEntry {
            utt_id: file.clone(),
            speaker_id: speaker,
            attack: Attack::None,
            label,
            path: audio_root.join(&file),
            split: Split::Itw,
        });
    }
    let manifest = DatasetManifest { name: name.to_string(), entries };
    manifest.validate()?;
    Ok(manifest)
}

/// Render a manifest back into the metadata CSV format.
pub fn serialize_itw_manifest(manifest: &DatasetManifest) -> String {
    let mut wtr = csv::Writer::from_writer(Vec::new());
    wtr.write_record(["file", "speaker", "label"]).unwrap();
    for e in &manifest.entries {
        let label = match e.label {
            Label::Bonafide => "bona-fide",
            Label::Spoof => "spoof",
        };
        wtr.write_record([e.utt_id.as_str(), e.speaker_id.as_str(), label]).unwrap();
    }
    String::from_utf8(wtr.into_inner().unwrap()).unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;

    const ROOT: &str = "/data/flac";

    fn opts() -> ProtocolOptions {
        ProtocolOptions::new("flac", Split::Train, "asvspoof-train")
    }

    #[test]
    fn parses_bonafide_line() {
        let m = parse_asvspoof_protocol(
            "LA_0079 LA_T_1138215 - - bonafide\n",
            Path::new(ROOT),
            &opts(),
        )
        .unwrap();
        let e = &m.entries[0];
        assert_eq!(e.speaker_id, "LA_0079");
        assert_eq!(e.utt_id, "LA_T_1138215");
        assert_eq!(e.attack, Attack::None);
        assert_eq!(e.label, Label::Bonafide);
        assert_eq!(e.path, Path::new(ROOT).join("LA_T_1138215.flac"));
    }

    #[test]
    fn parses_spoof_line() {
        let m = parse_asvspoof_protocol(
            "LA_0079 LA_T_1271820 - A01 spoof\n",
            Path::new(ROOT),
            &opts(),
        )
        .unwrap();
        let e = &m.entries[0];
        assert_eq!(e.attack, Attack::Id("A01".into()));
        assert_eq!(e.label, Label::Spoof);
    }

    #[test]
    fn rejects_three_fields() {
        let err = parse_asvspoof_protocol("LA_0079 LA_T_1 bonafide\n", Path::new(ROOT), &opts())
            .unwrap_err();
        assert!(matches!(err, DataError::MalformedLine { line_no: 1 }));
    }

    #[test]
    fn rejects_unknown_key() {
        let err = parse_asvspoof_protocol(
            "LA_0079 LA_T_1 - - genuine\n",
            Path::new(ROOT),
            &opts(),
        )
        .unwrap_err();
        assert!(matches!(err, DataError::UnknownKey { .. }));
    }

    #[test]
    fn rejects_duplicate_utt() {
        let text = "LA_0079 LA_T_1 - - bonafide\nLA_0080 LA_T_1 - A02 spoof\n";
        let err = parse_asvspoof_protocol(text, Path::new(ROOT), &opts()).unwrap_err();
        assert!(matches!(err, DataError::DuplicateUttId(_)));
    }

    #[test]
    fn itw_rows() {
        let csv = "file,speaker,label\n0.wav,Alec Guinness,spoof\n1.wav,Alec Guinness,bona-fide\n";
        let m = parse_itw_manifest(csv, Path::new("/data/itw"), "itw").unwrap();
        assert_eq!(m.entries.len(), 2);
        assert_eq!(m.entries[0].utt_id, "0.wav");
        assert_eq!(m.entries[0].speaker_id, "Alec Guinness");
        assert_eq!(m.entries[0].label, Label::Spoof);
        assert_eq!(m.entries[1].label, Label::Bonafide);
        assert_eq!(m.entries[0].split, Split::Itw);
    }

    #[test]
    fn itw_rejects_unknown_label() {
        let csv = "file,speaker,label\n0.wav,Someone,genuine\n";
        let err = parse_itw_manifest(csv, Path::new("/d"), "itw").unwrap_err();
        assert!(matches!(err, DataError::UnknownLabel(v) if v == "genuine"));
    }

    #[test]
    fn itw_rejects_missing_column() {
        let csv = "file,who,label\n0.wav,Someone,spoof\n";
        let err = parse_itw_manifest(csv, Path::new("/d"), "itw").unwrap_err();
        assert!(matches!(err, DataError::MissingColumn(c) if c == "speaker"));
    }

    #[test]
    fn protocol_round_trip() {
        let text = "LA_0079 LA_T_1 - - bonafide\nLA_0080 LA_T_2 - A05 spoof\n";
        let m = parse_asvspoof_protocol(text, Path::new(ROOT), &opts()).unwrap();
        let rendered = serialize_asvspoof_protocol(&m);
        let m2 = parse_asvspoof_protocol(&rendered, Path::new(ROOT), &opts()).unwrap();
        assert_eq!(m, m2);
    }

    #[test]
    fn itw_round_trip_with_quoting() {
        let csv = "file,speaker,label\n0.wav,\"Guinness, Alec\",spoof\n";
        let m = parse_itw_manifest(csv, Path::new("/d"), "itw").unwrap();
        assert_eq!(m.entries[0].speaker_id, "Guinness, Alec");
        let rendered = serialize_itw_manifest(&m);
        let m2 = parse_itw_manifest(&rendered, Path::new("/d"), "itw").unwrap();
        assert_eq!(m, m2);
    }
}
