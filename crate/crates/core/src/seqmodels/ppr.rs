//! Phoneme posteriorgram recognizer: speaker-independent frame classifier.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::layers::{bigru, bigru_register, conv_bank, conv_bank_register, dense, dense_register};
use super::params::{Bindings, ParamSet};
use super::tape::{Tape, Var};
use super::{ModelError, Posteriorgram};
use crate::dsp::MelSpectrogram;
use crate::rng::derive_rng;

/// Convolution bank over several kernel widths, a bidirectional recurrent
/// layer, and a frame-wise softmax head.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct PprConfig {
    pub mel_bands: usize,
    pub conv_widths: Vec<usize>,
    pub conv_filters: usize,
    pub hidden: usize,
    pub classes: usize,
    /// Disable for a purely frame-wise variant.
    pub recurrent: bool,
}

impl Default for PprConfig {
    fn default() -> Self {
        Self {
            mel_bands: 80,
            conv_widths: (1..=8).collect(),
            conv_filters: 16,
            hidden: 128,
            classes: Posteriorgram::CLASSES,
            recurrent: true,
        }
    }
}

impl PprConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.mel_bands == 0 || self.conv_filters == 0 || self.hidden == 0 || self.classes == 0 {
            return Err(ModelError::InvalidConfig("ppr dims must be >= 1".into()));
        }
        if self.conv_widths.is_empty() || self.conv_widths.contains(&0) {
            return Err(ModelError::InvalidConfig("conv_widths must be nonempty, nonzero".into()));
        }
        Ok(())
    }

    fn bank_dim(&self) -> usize {
        self.conv_widths.len() * self.conv_filters
    }

    fn trunk_dim(&self) -> usize {
        if self.recurrent {
            2 * self.hidden
        } else {
            self.bank_dim()
        }
    }
}

#[derive(Debug, Clone)]
pub struct PprModel {
    pub config: PprConfig,
    pub params: ParamSet,
}

impl PprModel {
    pub fn init(config: PprConfig, seed: u64) -> Result<Self, ModelError> {
        config.validate()?;
        let mut rng = derive_rng(seed, "ppr-init");
        let mut params = ParamSet::new();
        conv_bank_register(&mut params, "bank", &config.conv_widths, config.mel_bands, config.conv_filters, &mut rng);
        if config.recurrent {
            bigru_register(&mut params, "rnn", config.bank_dim(), config.hidden, &mut rng);
        }
        dense_register(&mut params, "out", config.trunk_dim(), config.classes, &mut rng);
        Ok(Self { config, params })
    }

    /// Builds logits (T x classes) for a mel input node.
    pub fn logits_graph(&self, tape: &mut Tape, binds: &Bindings, prefix: &str, mel: Var) -> Var {
        let bank = conv_bank(tape, binds, &format!("{prefix}bank"), mel, &self.config.conv_widths);
        let trunk = if self.config.recurrent {
            bigru(tape, binds, &format!("{prefix}rnn"), bank, self.config.hidden)
        } else {
            bank
        };
        dense(tape, binds, &format!("{prefix}out"), trunk)
    }

    /// Log-compresses raw mel energies; applied before the input enters
    /// the graph (inputs carry no gradient).
    pub fn compress_input(frames: &Array2<f64>) -> Array2<f64> {
        frames.mapv(|v| (v + 1e-5).ln())
    }
}

/// Frame-by-frame posterior estimation; output has one simplex row per
/// input frame.
pub fn ppr_forward(m: &MelSpectrogram, model: &PprModel) -> Result<Posteriorgram, ModelError> {
    if m.frames.ncols() != model.config.mel_bands {
        return Err(ModelError::DimMismatch {
            what: "mel bands".into(),
            expected: model.config.mel_bands,
            got: m.frames.ncols(),
        });
    }
    let mut tape = Tape::new();
    let binds = Bindings::bind(&mut tape, &model.params);
    let x = tape.constant(PprModel::compress_input(&m.frames));
    let logits = model.logits_graph(&mut tape, &binds, "", x);
    let probs = tape.softmax_rows(logits);
    Posteriorgram::new(tape.value(probs).clone())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_config() -> PprConfig {
        PprConfig {
            mel_bands: 8,
            conv_widths: vec![1, 2, 3],
            conv_filters: 4,
            hidden: 6,
            recurrent: true,
            ..PprConfig::default()
        }
    }

    fn mel(frames: Array2<f64>) -> MelSpectrogram {
        MelSpectrogram { frames, sample_rate: 16000, hop_size: 200 }
    }

    #[test]
    fn output_rows_match_input_frames_and_sum_to_one() {
        let model = PprModel::init(tiny_config(), 1).unwrap();
        let m = mel(Array2::from_shape_fn((13, 8), |(i, j)| ((i + j) as f64 * 0.37).sin().abs()));
        let p = ppr_forward(&m, &model).unwrap();
        assert_eq!(p.len(), 13);
        for row in p.rows().rows() {
            assert!((row.sum() - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn deterministic_given_same_model() {
        let model = PprModel::init(tiny_config(), 2).unwrap();
        let m = mel(Array2::from_shape_fn((9, 8), |(i, j)| (i * 8 + j) as f64 * 0.01));
        let a = ppr_forward(&m, &model).unwrap();
        let b = ppr_forward(&m, &model).unwrap();
        assert_eq!(a.rows(), b.rows());
    }

    #[test]
    fn wrong_mel_bands_rejected() {
        let model = PprModel::init(tiny_config(), 3).unwrap();
        let m = mel(Array2::zeros((5, 10)));
        assert!(ppr_forward(&m, &model).is_err());
    }
}
