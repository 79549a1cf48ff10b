//! Corpus ingestion and generation.
//!
//! Utterance manifests and phoneme alignments, frame-label expansion,
//! dataset splitting, and a synthetic two-speaker corpus generator with
//! controlled rhythm for desk-scale verification.

use std::path::PathBuf;

use thiserror::Error;

mod alignment;
mod inventory;
mod manifest;
mod split;
mod synth;

pub use alignment::{frame_labels, FrameLabelSequence};
pub use inventory::PhonemeInventory;
pub use manifest::{load_manifest, write_alignment, write_manifest};
pub use split::split_dataset;
pub use synth::{
    generate_synthetic_corpus, synthesize_utterance, DurationLaw, HarmonicTemplate,
    PhonemeSynthSpec, SpeakerSynthSpec, SyntheticSpec,
};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("empty corpus: {0}")]
    EmptyCorpus(String),
    #[error("corpus too small: {n} utterances, need at least {need}")]
    TooSmall { n: usize, need: usize },
    #[error("missing file: {path}")]
    MissingFile { path: String },
    #[error("{path}:{line}: malformed manifest row: {detail}")]
    MalformedManifest { path: String, line: usize, detail: String },
    #[error("{path}:{line}: malformed alignment row: {detail}")]
    MalformedAlignment { path: String, line: usize, detail: String },
    #[error("{path}:{line}: unknown phoneme symbol \"{symbol}\"")]
    UnknownPhoneme { path: String, line: usize, symbol: String },
    #[error("manifest {path} mixes speakers ({a} and {b}); one domain per manifest")]
    MixedSpeakers { path: String, a: String, b: String },
    #[error("invalid inventory: {0}")]
    InvalidInventory(String),
    #[error("invalid segment in {utterance}: {detail}")]
    InvalidSegment { utterance: String, detail: String },
    #[error("alignment shorter than audio in {utterance}: frame center {center:.6}s beyond last segment end {end:.6}s")]
    AlignmentTooShort { utterance: String, center: f64, end: f64 },
    #[error("invalid synthetic spec: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Dsp(#[from] crate::dsp::DspError),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// A timed phoneme segment, in seconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlignmentSegment {
    pub phoneme_id: usize,
    pub start: f64,
    pub end: f64,
}

impl AlignmentSegment {
    pub fn duration(&self) -> f64 {
        self.end - self.start
    }
}

/// One utterance: audio location plus its phoneme alignment.
#[derive(Debug, Clone)]
pub struct UtteranceRecord {
    pub utterance_id: String,
    pub speaker_id: String,
    pub audio: PathBuf,
    /// Non-overlapping, sorted by start; gaps carry the silence phoneme.
    pub segments: Vec<AlignmentSegment>,
}

impl UtteranceRecord {
    /// Checks segment ordering, bounds and phoneme ranges.
    pub fn validate(&self) -> Result<(), CorpusError> {
        let err = |detail: String| CorpusError::InvalidSegment {
            utterance: self.utterance_id.clone(),
            detail,
        };
        if self.segments.is_empty() {
            return Err(err("no segments".into()));
        }
        let mut prev_end = 0.0f64;
        for (i, s) in self.segments.iter().enumerate() {
            if s.phoneme_id >= PhonemeInventory::SIZE {
                return Err(err(format!(
                    "segment {i}: phoneme_id {} out of range",
                    s.phoneme_id
                )));
            }
            if !(s.start >= 0.0 && s.start < s.end) {
                return Err(err(format!(
                    "segment {i}: need 0 <= start < end, got [{}, {})",
                    s.start, s.end
                )));
            }
            if s.start + 1e-9 < prev_end {
                return Err(err(format!(
                    "segment {i} overlaps previous (starts {} before end {prev_end})",
                    s.start
                )));
            }
            prev_end = s.end;
        }
        Ok(())
    }

    pub fn total_span(&self) -> f64 {
        self.segments.last().map_or(0.0, |s| s.end)
    }
}

/// All utterances of one speaker domain.
#[derive(Debug, Clone)]
pub struct SpeakerDomainCorpus {
    pub domain_id: String,
    pub utterances: Vec<UtteranceRecord>,
}

impl SpeakerDomainCorpus {
    pub fn len(&self) -> usize {
        self.utterances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.utterances.is_empty()
    }
}
