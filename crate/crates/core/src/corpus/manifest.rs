//! Manifest and alignment TSV ingestion.
//!
//! Manifest: one utterance per line,
//! `utterance_id<TAB>speaker_id<TAB>wav_path<TAB>alignment_path`.
//! Alignment: one segment per line,
//! `utterance_id<TAB>phoneme_symbol<TAB>start_seconds<TAB>end_seconds`
//! with six decimal places. Relative paths resolve against the manifest's
//! directory.

use std::path::{Path, PathBuf};

use super::{
    AlignmentSegment, CorpusError, PhonemeInventory, SpeakerDomainCorpus, UtteranceRecord,
};

/// Loads and validates a one-domain manifest. Every referenced file must
/// exist; every alignment row must parse and use known phoneme symbols.
pub fn load_manifest(
    path: &Path,
    inventory: &PhonemeInventory,
) -> Result<SpeakerDomainCorpus, CorpusError> {
    let text = std::fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let base = path.parent().unwrap_or(Path::new("."));
    let mut utterances: Vec<UtteranceRecord> = Vec::new();
    let mut domain_id: Option<String> = None;

    for (lineno, line) in text.lines().enumerate() {
        let line_1 = lineno + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 4 {
            return Err(CorpusError::MalformedManifest {
                path: path.display().to_string(),
                line: line_1,
                detail: format!("expected 4 tab-separated fields, got {}", fields.len()),
            });
        }
        let (utterance_id, speaker_id) = (fields[0].to_string(), fields[1].to_string());
        let wav_path = resolve(base, fields[2]);
        let align_path = resolve(base, fields[3]);

        match &domain_id {
            None => domain_id = Some(speaker_id.clone()),
            Some(d) if *d != speaker_id => {
                return Err(CorpusError::MixedSpeakers {
                    path: path.display().to_string(),
                    a: d.clone(),
                    b: speaker_id,
                });
            }
            _ => {}
        }

        if !wav_path.is_file() {
            return Err(CorpusError::MissingFile { path: wav_path.display().to_string() });
        }
        if !align_path.is_file() {
            return Err(CorpusError::MissingFile { path: align_path.display().to_string() });
        }

        let segments = load_alignment(&align_path, &utterance_id, inventory)?;
        let record = UtteranceRecord { utterance_id, speaker_id, audio: wav_path, segments };
        record.validate()?;
        utterances.push(record);
    }

    match domain_id {
        None => Err(CorpusError::EmptyCorpus(path.display().to_string())),
        Some(domain_id) => Ok(SpeakerDomainCorpus { domain_id, utterances }),
    }
}

fn resolve(base: &Path, p: &str) -> PathBuf {
    let path = Path::new(p);
    if path.is_absolute() {
        path.to_path_buf()
    } else {
        base.join(path)
    }
}

fn load_alignment(
    path: &Path,
    utterance_id: &str,
    inventory: &PhonemeInventory,
) -> Result<Vec<AlignmentSegment>, CorpusError> {
    let text = std::fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let malformed = |line: usize, detail: String| CorpusError::MalformedAlignment {
        path: path.display().to_string(),
        line,
        detail,
    };

    let mut segments = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line_1 = lineno + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 4 {
            return Err(malformed(
                line_1,
                format!("expected 4 tab-separated fields, got {}", fields.len()),
            ));
        }
        if fields[0] != utterance_id {
            return Err(malformed(
                line_1,
                format!("utterance_id \"{}\" does not match \"{}\"", fields[0], utterance_id),
            ));
        }
        let phoneme_id = inventory.index_of(fields[1]).ok_or_else(|| CorpusError::UnknownPhoneme {
            path: path.display().to_string(),
            line: line_1,
            symbol: fields[1].to_string(),
        })?;
        let start: f64 = fields[2]
            .parse()
            .map_err(|_| malformed(line_1, format!("bad start_seconds \"{}\"", fields[2])))?;
        let end: f64 = fields[3]
            .parse()
            .map_err(|_| malformed(line_1, format!("bad end_seconds \"{}\"", fields[3])))?;
        segments.push(AlignmentSegment { phoneme_id, start, end });
    }
    Ok(segments)
}

/// Writes an alignment TSV with six decimal places.
pub fn write_alignment(
    path: &Path,
    utterance_id: &str,
    segments: &[AlignmentSegment],
    inventory: &PhonemeInventory,
) -> Result<(), CorpusError> {
    let mut out = String::new();
    for s in segments {
        out.push_str(&format!(
            "{}\t{}\t{:.6}\t{:.6}\n",
            utterance_id,
            inventory.symbol(s.phoneme_id),
            s.start,
            s.end
        ));
    }
    std::fs::write(path, out).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Writes a manifest with paths relative to the manifest's directory where
/// possible.
pub fn write_manifest(path: &Path, corpus: &SpeakerDomainCorpus, alignment_paths: &[PathBuf]) -> Result<(), CorpusError> {
    assert_eq!(corpus.utterances.len(), alignment_paths.len());
    let base = path.parent().unwrap_or(Path::new("."));
    let rel = |p: &Path| -> String {
        p.strip_prefix(base).unwrap_or(p).display().to_string()
    };
    let mut out = String::new();
    for (u, align) in corpus.utterances.iter().zip(alignment_paths) {
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\n",
            u.utterance_id,
            u.speaker_id,
            rel(&u.audio),
            rel(align)
        ));
    }
    std::fs::write(path, out).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsp::{wav, Waveform};

    fn write_wav_stub(path: &Path) {
        let w = Waveform::new(vec![0.0; 100], 16000).unwrap();
        wav::write_wav(path, &w).unwrap();
    }

    #[test]
    fn empty_manifest_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let m = dir.path().join("m.tsv");
        std::fs::write(&m, "").unwrap();
        let err = load_manifest(&m, &PhonemeInventory::cmu_stress()).unwrap_err();
        assert!(err.to_string().contains("empty corpus"));
    }

    #[test]
    fn missing_wav_is_named_in_error() {
        let dir = tempfile::tempdir().unwrap();
        let m = dir.path().join("m.tsv");
        std::fs::write(&m, "u0\tspk\tnope.wav\tu0.tsv\n").unwrap();
        let err = load_manifest(&m, &PhonemeInventory::cmu_stress()).unwrap_err();
        assert!(err.to_string().contains("nope.wav"), "{err}");
    }

    #[test]
    fn valid_two_utterance_manifest_preserves_order() {
        let dir = tempfile::tempdir().unwrap();
        let inv = PhonemeInventory::cmu_stress();
        for id in ["a", "b"] {
            write_wav_stub(&dir.path().join(format!("{id}.wav")));
            std::fs::write(
                dir.path().join(format!("{id}.tsv")),
                format!("{id}\tAA1\t0.000000\t0.100000\n{id}\tN\t0.100000\t0.200000\n"),
            )
            .unwrap();
        }
        let m = dir.path().join("m.tsv");
        std::fs::write(&m, "b\tspk\tb.wav\tb.tsv\na\tspk\ta.wav\ta.tsv\n").unwrap();
        let c = load_manifest(&m, &inv).unwrap();
        assert_eq!(c.domain_id, "spk");
        assert_eq!(c.utterances.len(), 2);
        assert_eq!(c.utterances[0].utterance_id, "b");
        assert_eq!(c.utterances[1].utterance_id, "a");
        assert_eq!(c.utterances[0].segments.len(), 2);
        assert_eq!(c.utterances[0].segments[1].phoneme_id, inv.index_of("N").unwrap());
    }

    #[test]
    fn unknown_symbol_is_named() {
        let dir = tempfile::tempdir().unwrap();
        write_wav_stub(&dir.path().join("a.wav"));
        std::fs::write(dir.path().join("a.tsv"), "a\tQX9\t0.000000\t0.100000\n").unwrap();
        let m = dir.path().join("m.tsv");
        std::fs::write(&m, "a\tspk\ta.wav\ta.tsv\n").unwrap();
        let err = load_manifest(&m, &PhonemeInventory::cmu_stress()).unwrap_err();
        assert!(err.to_string().contains("QX9"), "{err}");
    }

    #[test]
    fn malformed_alignment_row_reports_line_number() {
        let dir = tempfile::tempdir().unwrap();
        write_wav_stub(&dir.path().join("a.wav"));
        std::fs::write(
            dir.path().join("a.tsv"),
            "a\tAA1\t0.000000\t0.100000\na\tN\tnot_a_number\t0.200000\n",
        )
        .unwrap();
        let m = dir.path().join("m.tsv");
        std::fs::write(&m, "a\tspk\ta.wav\ta.tsv\n").unwrap();
        let err = load_manifest(&m, &PhonemeInventory::cmu_stress()).unwrap_err();
        assert!(err.to_string().contains(":2:"), "{err}");
    }

    #[test]
    fn mixed_speakers_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let inv = PhonemeInventory::cmu_stress();
        for id in ["a", "b"] {
            write_wav_stub(&dir.path().join(format!("{id}.wav")));
            std::fs::write(
                dir.path().join(format!("{id}.tsv")),
                format!("{id}\tAA1\t0.000000\t0.100000\n"),
            )
            .unwrap();
        }
        let m = dir.path().join("m.tsv");
        std::fs::write(&m, "a\tspk1\ta.wav\ta.tsv\nb\tspk2\tb.wav\tb.tsv\n").unwrap();
        assert!(load_manifest(&m, &inv).is_err());
    }
}
