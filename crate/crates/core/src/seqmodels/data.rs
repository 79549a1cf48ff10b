//! Feature/label assembly from corpora.

use ndarray::Array2;

use super::{ppr_forward, Posteriorgram, PprModel, TrainError};
use crate::corpus::{frame_labels, SpeakerDomainCorpus};
use crate::dsp::{log_magnitude, mel_spectrogram, wav, DspConfig};

/// Mel frames plus per-frame phoneme labels.
pub struct PprExample {
    pub mel: Array2<f64>,
    pub labels: Vec<usize>,
}

/// Posteriorgram input (from a frozen recognizer) plus log-magnitude
/// target.
pub struct PptsExample {
    pub posteriorgram: Array2<f64>,
    pub target: Array2<f64>,
}

/// Reads every utterance, extracts mel features and expands alignments to
/// frame labels.
pub fn ppr_examples(
    corpus: &SpeakerDomainCorpus,
    dsp: &DspConfig,
    silence_id: usize,
) -> Result<Vec<PprExample>, TrainError> {
    let mut out = Vec::with_capacity(corpus.len());
    for u in &corpus.utterances {
        let w = wav::read_wav(&u.audio)?;
        let mel = mel_spectrogram(&w, dsp)?;
        let labels = frame_labels(u, mel.hop_seconds(), mel.n_frames(), silence_id)?;
        out.push(PprExample { mel: mel.frames, labels: labels.labels });
    }
    Ok(out)
}

/// Runs the frozen recognizer over every utterance and pairs its
/// posteriorgrams with log-magnitude targets (the staged recipe: the
/// recognizer acts as a pseudo-labeler).
pub fn ppts_examples(
    corpus: &SpeakerDomainCorpus,
    dsp: &DspConfig,
    ppr: &PprModel,
) -> Result<Vec<PptsExample>, TrainError> {
    let mut out = Vec::with_capacity(corpus.len());
    for u in &corpus.utterances {
        let w = wav::read_wav(&u.audio)?;
        let mel = mel_spectrogram(&w, dsp)?;
        let pg = ppr_forward(&mel, ppr)?;
        let lm = log_magnitude(&w, dsp)?;
        out.push(PptsExample { posteriorgram: pg.into_rows(), target: lm.frames });
    }
    Ok(out)
}

/// Collects estimated posteriorgram sequences for a whole corpus.
pub fn posteriorgram_set(
    corpus: &SpeakerDomainCorpus,
    dsp: &DspConfig,
    ppr: &PprModel,
) -> Result<Vec<Posteriorgram>, TrainError> {
    let mut out = Vec::with_capacity(corpus.len());
    for u in &corpus.utterances {
        let w = wav::read_wav(&u.audio)?;
        let mel = mel_spectrogram(&w, dsp)?;
        out.push(ppr_forward(&mel, ppr)?);
    }
    Ok(out)
}
