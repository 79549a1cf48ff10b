//! Synthetic two-speaker corpus with controlled rhythm.
//!
//! Each phoneme carries a fixed harmonic template; speakers share templates
//! and transition weights but differ in duration distributions (and
//! optionally pitch), which gives desk-scale corpora where rhythm is the
//! controlled variable and exact alignments come for free.

use std::path::{Path, PathBuf};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal};

use super::{
    write_alignment, write_manifest, AlignmentSegment, CorpusError, PhonemeInventory,
    SpeakerDomainCorpus, UtteranceRecord,
};
use crate::dsp::{wav, Waveform};
use crate::rng::derive_rng;

/// Harmonic stack: one (frequency Hz, amplitude) pair per partial.
#[derive(Debug, Clone)]
pub struct HarmonicTemplate {
    pub partials: Vec<(f64, f64)>,
}

impl HarmonicTemplate {
    /// Fundamental plus two octaves with decaying amplitudes.
    pub fn three_partial(f0: f64) -> Self {
        Self { partials: vec![(f0, 1.0), (2.0 * f0, 0.5), (4.0 * f0, 0.25)] }
    }

    pub fn fundamental(&self) -> f64 {
        self.partials.first().map_or(0.0, |p| p.0)
    }
}

/// Log-normal duration law: `mean` is the distribution mean in seconds and
/// `sigma` the standard deviation of the underlying normal.
#[derive(Debug, Clone, Copy)]
pub struct DurationLaw {
    pub mean: f64,
    pub sigma: f64,
}

impl DurationLaw {
    fn sampler(&self) -> LogNormal<f64> {
        // E[LogNormal(mu, sigma)] = exp(mu + sigma^2/2).
        let mu = self.mean.ln() - self.sigma * self.sigma / 2.0;
        LogNormal::new(mu, self.sigma).expect("valid log-normal parameters")
    }
}

/// One phoneme usable by the generator.
#[derive(Debug, Clone)]
pub struct PhonemeSynthSpec {
    /// Inventory index.
    pub phoneme: usize,
    pub template: HarmonicTemplate,
}

/// Per-speaker rhythm: one duration law per active phoneme (parallel to
/// `SyntheticSpec::phonemes`).
#[derive(Debug, Clone)]
pub struct SpeakerSynthSpec {
    pub speaker_id: String,
    pub durations: Vec<DurationLaw>,
    /// Multiplies every template frequency; lets speakers differ in pitch.
    pub pitch_factor: f64,
}

/// Full recipe for a two-speaker corpus.
#[derive(Debug, Clone)]
pub struct SyntheticSpec {
    pub phonemes: Vec<PhonemeSynthSpec>,
    pub speakers: [SpeakerSynthSpec; 2],
    /// Row-stochastic up to normalization; diagonal must be zero so argmax
    /// run extraction can recover segment boundaries.
    pub transitions: Vec<Vec<f64>>,
    /// Initial phoneme weights.
    pub initial: Vec<f64>,
    /// Inclusive range of phonemes per utterance.
    pub utterance_len: (usize, usize),
    pub sample_rate: u32,
    /// Fade-in/out inside each segment, seconds.
    pub fade: f64,
    pub amplitude: f64,
}

impl SyntheticSpec {
    /// Desk-scale default: eight phonemes (four vowel-class, four
    /// consonant-class) with log-spaced fundamentals, uniform no-repeat
    /// transitions, and per-speaker mean durations `mean_a` / `mean_b`.
    pub fn two_speaker_rhythm(
        inventory: &PhonemeInventory,
        mean_a: f64,
        mean_b: f64,
        sigma: f64,
    ) -> Self {
        let symbols = ["AA1", "IY1", "EH1", "OW1", "N", "S", "L", "T"];
        let phonemes: Vec<PhonemeSynthSpec> = symbols
            .iter()
            .enumerate()
            .map(|(i, s)| PhonemeSynthSpec {
                phoneme: inventory.index_of(s).expect("default inventory symbol"),
                // Log-spaced fundamentals in [220, 2200) Hz.
                template: HarmonicTemplate::three_partial(
                    220.0 * 10f64.powf(i as f64 / symbols.len() as f64),
                ),
            })
            .collect();
        let k = phonemes.len();
        let transitions = (0..k)
            .map(|i| (0..k).map(|j| if i == j { 0.0 } else { 1.0 }).collect())
            .collect();
        let speaker = |id: &str, mean: f64, pitch: f64| SpeakerSynthSpec {
            speaker_id: id.to_string(),
            durations: vec![DurationLaw { mean, sigma }; k],
            pitch_factor: pitch,
        };
        Self {
            phonemes,
            speakers: [speaker("spk_a", mean_a, 1.0), speaker("spk_b", mean_b, 1.05)],
            transitions,
            initial: vec![1.0; k],
            utterance_len: (4, 8),
            sample_rate: 16000,
            fade: 0.005,
            amplitude: 0.25,
        }
    }

    pub fn validate(&self) -> Result<(), CorpusError> {
        let k = self.phonemes.len();
        let fail = |m: String| Err(CorpusError::InvalidSpec(m));
        if k == 0 {
            return fail("no phonemes".into());
        }
        for p in &self.phonemes {
            if p.phoneme >= PhonemeInventory::SIZE {
                return fail(format!("phoneme index {} out of range", p.phoneme));
            }
            if p.template.partials.is_empty() {
                return fail("template with no partials".into());
            }
        }
        // Templates must be distinct so the frame classifier has a chance.
        for i in 0..k {
            for j in i + 1..k {
                let (a, b) = (self.phonemes[i].template.fundamental(), self.phonemes[j].template.fundamental());
                if (a - b).abs() < 1e-6 {
                    return fail(format!("phonemes {i} and {j} share fundamental {a} Hz"));
                }
            }
        }
        for s in &self.speakers {
            if s.durations.len() != k {
                return fail(format!(
                    "speaker {} has {} duration laws for {} phonemes",
                    s.speaker_id,
                    s.durations.len(),
                    k
                ));
            }
            for d in &s.durations {
                if !(d.mean > 0.0) || !(d.sigma >= 0.0) {
                    return fail(format!("speaker {}: invalid duration law", s.speaker_id));
                }
            }
            if !(s.pitch_factor > 0.0) {
                return fail(format!("speaker {}: pitch_factor must be > 0", s.speaker_id));
            }
        }
        if self.transitions.len() != k || self.transitions.iter().any(|r| r.len() != k) {
            return fail("transition matrix must be k x k".into());
        }
        for (i, row) in self.transitions.iter().enumerate() {
            if row[i] != 0.0 {
                return fail(format!("self-transition weight at {i} must be 0"));
            }
            if row.iter().any(|&w| w < 0.0) || row.iter().sum::<f64>() <= 0.0 {
                return fail(format!("transition row {i} must be nonnegative and nonzero"));
            }
        }
        if self.initial.len() != k || self.initial.iter().sum::<f64>() <= 0.0 {
            return fail("initial weights must be length k with positive sum".into());
        }
        let (lo, hi) = self.utterance_len;
        if lo == 0 || lo > hi {
            return fail(format!("bad utterance_len range ({lo}, {hi})"));
        }
        if self.sample_rate == 0 || self.sample_rate % 1000 != 0 {
            // Millisecond duration quantization keeps alignment files exact.
            return fail("sample_rate must be a positive multiple of 1000".into());
        }
        if !(self.fade >= 0.0) || !(self.amplitude > 0.0) {
            return fail("fade must be >= 0 and amplitude > 0".into());
        }
        Ok(())
    }
}

fn pick_weighted(weights: &[f64], rng: &mut ChaCha8Rng) -> usize {
    let total: f64 = weights.iter().sum();
    let mut x = rng.gen_range(0.0..total);
    for (i, &w) in weights.iter().enumerate() {
        if x < w {
            return i;
        }
        x -= w;
    }
    weights.len() - 1
}

/// Renders one utterance for speaker `speaker_idx`: samples a phoneme walk
/// and durations, concatenates the harmonic templates (faded inside each
/// segment) and returns the waveform together with exact alignments.
///
/// Durations are quantized to whole milliseconds (minimum 25 ms) so segment
/// boundaries survive the six-decimal alignment format losslessly.
pub fn synthesize_utterance(
    spec: &SyntheticSpec,
    speaker_idx: usize,
    rng: &mut ChaCha8Rng,
) -> (Waveform, Vec<AlignmentSegment>) {
    let speaker = &spec.speakers[speaker_idx];
    let sr = spec.sample_rate;
    let samples_per_ms = (sr / 1000) as usize;

    let n_phonemes = rng.gen_range(spec.utterance_len.0..=spec.utterance_len.1);
    let mut walk = Vec::with_capacity(n_phonemes);
    walk.push(pick_weighted(&spec.initial, rng));
    while walk.len() < n_phonemes {
        let prev = *walk.last().unwrap();
        walk.push(pick_weighted(&spec.transitions[prev], rng));
    }

    let mut samples: Vec<f64> = Vec::new();
    let mut segments = Vec::with_capacity(n_phonemes);
    let mut start_samples = 0usize;
    for &p in &walk {
        let law = speaker.durations[p];
        let dur_s = law.sampler().sample(rng);
        let dur_ms = (dur_s * 1000.0).round().max(25.0) as usize;
        let n = dur_ms * samples_per_ms;
        let fade_n = ((spec.fade * f64::from(sr)) as usize).min(n / 2);

        let template = &spec.phonemes[p].template;
        for i in 0..n {
            let t = i as f64 / f64::from(sr);
            let mut v = 0.0;
            for &(f, a) in &template.partials {
                v += a * (2.0 * std::f64::consts::PI * f * speaker.pitch_factor * t).sin();
            }
            let env = if i < fade_n {
                i as f64 / fade_n as f64
            } else if i >= n - fade_n {
                (n - 1 - i) as f64 / fade_n as f64
            } else {
                1.0
            };
            samples.push(spec.amplitude * env * v);
        }
        segments.push(AlignmentSegment {
            phoneme_id: spec.phonemes[p].phoneme,
            start: start_samples as f64 / f64::from(sr),
            end: (start_samples + n) as f64 / f64::from(sr),
        });
        start_samples += n;
    }

    (Waveform::new(samples, sr).expect("synthesized samples are finite"), segments)
}

/// Generates `n_utterances` per speaker under `out_dir`, writing wavs,
/// alignment TSVs and one manifest per speaker, and returns the two
/// corpora. Bit-identical output for identical spec and seed.
pub fn generate_synthetic_corpus(
    spec: &SyntheticSpec,
    inventory: &PhonemeInventory,
    n_utterances: usize,
    seed: u64,
    out_dir: &Path,
) -> Result<(SpeakerDomainCorpus, SpeakerDomainCorpus), CorpusError> {
    spec.validate()?;
    if n_utterances == 0 {
        return Err(CorpusError::InvalidSpec("n_utterances must be >= 1".into()));
    }

    let mut corpora = Vec::with_capacity(2);
    for (si, speaker) in spec.speakers.iter().enumerate() {
        let dir = out_dir.join(&speaker.speaker_id);
        std::fs::create_dir_all(&dir).map_err(|source| CorpusError::Io {
            path: dir.display().to_string(),
            source,
        })?;
        let mut rng = derive_rng(seed, &format!("synth-{}", speaker.speaker_id));
        let mut utterances = Vec::with_capacity(n_utterances);
        let mut alignment_paths: Vec<PathBuf> = Vec::with_capacity(n_utterances);
        for i in 0..n_utterances {
            let utterance_id = format!("{}_{i:04}", speaker.speaker_id);
            let (waveform, segments) = synthesize_utterance(spec, si, &mut rng);
            let wav_path = dir.join(format!("{utterance_id}.wav"));
            let align_path = dir.join(format!("{utterance_id}.tsv"));
            wav::write_wav(&wav_path, &waveform)?;
            write_alignment(&align_path, &utterance_id, &segments, inventory)?;
            alignment_paths.push(align_path);
            utterances.push(UtteranceRecord {
                utterance_id,
                speaker_id: speaker.speaker_id.clone(),
                audio: wav_path,
                segments,
            });
        }
        let corpus = SpeakerDomainCorpus { domain_id: speaker.speaker_id.clone(), utterances };
        write_manifest(
            &out_dir.join(format!("manifest_{}.tsv", speaker.speaker_id)),
            &corpus,
            &alignment_paths,
        )?;
        corpora.push(corpus);
    }

    let b = corpora.pop().unwrap();
    let a = corpora.pop().unwrap();
    Ok((a, b))
}
