//! Phoneme-posteriorgram-to-speech synthesizer: speaker-dependent
//! frame-wise map onto log-magnitude spectra.

use serde::{Deserialize, Serialize};

use super::layers::{bigru, bigru_register, conv_bank, conv_bank_register, dense, dense_register};
use super::params::{Bindings, ParamSet};
use super::tape::{Tape, Var};
use super::{ModelError, Posteriorgram};
use crate::dsp::{DspConfig, LogMagnitudeSpectrogram};
use crate::rng::derive_rng;

/// Same trunk shape as the recognizer, linear output head.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct PptsConfig {
    pub classes: usize,
    pub conv_widths: Vec<usize>,
    pub conv_filters: usize,
    pub hidden: usize,
    /// Output bins (fft_size/2 + 1).
    pub out_dim: usize,
    /// Disable for the purely frame-wise variant (constant input rows then
    /// give constant output rows).
    pub recurrent: bool,
}

impl Default for PptsConfig {
    fn default() -> Self {
        Self {
            classes: Posteriorgram::CLASSES,
            conv_widths: (1..=8).collect(),
            conv_filters: 16,
            hidden: 128,
            out_dim: 513,
            recurrent: true,
        }
    }
}

impl PptsConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.classes == 0 || self.conv_filters == 0 || self.hidden == 0 || self.out_dim == 0 {
            return Err(ModelError::InvalidConfig("ppts dims must be >= 1".into()));
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
pub struct PptsModel {
    pub config: PptsConfig,
    pub params: ParamSet,
}

impl PptsModel {
    pub fn init(config: PptsConfig, seed: u64) -> Result<Self, ModelError> {
        Self::init_with_role(config, seed, "ppts-init")
    }

    /// Distinct role strings keep the two speaker-dependent synthesizers
    /// independently initialized from one master seed.
    pub fn init_with_role(config: PptsConfig, seed: u64, role: &str) -> Result<Self, ModelError> {
        config.validate()?;
        let mut rng = derive_rng(seed, role);
        let mut params = ParamSet::new();
        conv_bank_register(&mut params, "bank", &config.conv_widths, config.classes, config.conv_filters, &mut rng);
        if config.recurrent {
            bigru_register(&mut params, "rnn", config.bank_dim(), config.hidden, &mut rng);
        }
        dense_register(&mut params, "out", config.trunk_dim(), config.out_dim, &mut rng);
        Ok(Self { config, params })
    }

    /// Predicted log-magnitude rows (T x out_dim) for a posteriorgram node.
    pub fn graph(&self, tape: &mut Tape, binds: &Bindings, prefix: &str, pg: Var) -> Var {
        let bank = conv_bank(tape, binds, &format!("{prefix}bank"), pg, &self.config.conv_widths);
        let trunk = if self.config.recurrent {
            bigru(tape, binds, &format!("{prefix}rnn"), bank, self.config.hidden)
        } else {
            bank
        };
        dense(tape, binds, &format!("{prefix}out"), trunk)
    }
}

/// Frame-by-frame spectral prediction; row count equals the input row
/// count. Values are floored at ln(log_floor) so the output is a valid
/// log-magnitude spectrogram.
pub fn ppts_forward(
    p: &Posteriorgram,
    model: &PptsModel,
    dsp: &DspConfig,
    sample_rate: u32,
) -> Result<LogMagnitudeSpectrogram, ModelError> {
    if p.rows().ncols() != model.config.classes {
        return Err(ModelError::DimMismatch {
            what: "posteriorgram columns".into(),
            expected: model.config.classes,
            got: p.rows().ncols(),
        });
    }
    let mut tape = Tape::new();
    let binds = Bindings::bind(&mut tape, &model.params);
    let x = tape.constant(p.rows().clone());
    let out = model.graph(&mut tape, &binds, "", x);
    let floor = dsp.log_floor.ln();
    let frames = tape.value(out).mapv(|v| v.max(floor));
    Ok(LogMagnitudeSpectrogram { frames, sample_rate, hop_size: dsp.hop_size })
}
