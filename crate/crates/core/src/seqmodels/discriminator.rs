//! Sequence discriminator: strided 1-D convolutions over time, global
//! pooling, sigmoid score.

use serde::{Deserialize, Serialize};

use super::layers::{conv_layer, conv_layer_register, dense, dense_register_zeroed};
use super::params::{Bindings, ParamSet};
use super::tape::{sigmoid, Tape, Var};
use super::{ModelError, Posteriorgram};
use crate::rng::derive_rng;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct DiscriminatorConfig {
    pub classes: usize,
    /// Channel count per strided conv layer.
    pub channels: Vec<usize>,
    pub width: usize,
    pub stride: usize,
    /// Sequences shorter than this are rejected.
    pub min_len: usize,
}

impl Default for DiscriminatorConfig {
    fn default() -> Self {
        Self {
            classes: Posteriorgram::CLASSES,
            channels: vec![64, 64, 64],
            width: 5,
            stride: 2,
            min_len: 8,
        }
    }
}

impl DiscriminatorConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.classes == 0 || self.width == 0 || self.stride == 0 || self.min_len == 0 {
            return Err(ModelError::InvalidConfig("discriminator dims must be >= 1".into()));
        }
        if self.channels.is_empty() || self.channels.contains(&0) {
            return Err(ModelError::InvalidConfig("channels must be nonempty, nonzero".into()));
        }
        Ok(())
    }
}

/// Global pooling makes the score length-agnostic above `min_len`; the
/// final layer starts at zero so an untrained discriminator scores exactly
/// 0.5.
#[derive(Debug, Clone)]
pub struct DiscriminatorModel {
    pub config: DiscriminatorConfig,
    pub params: ParamSet,
}

impl DiscriminatorModel {
    pub fn init(config: DiscriminatorConfig, seed: u64) -> Result<Self, ModelError> {
        Self::init_with_role(config, seed, "disc-init")
    }

    pub fn init_with_role(
        config: DiscriminatorConfig,
        seed: u64,
        role: &str,
    ) -> Result<Self, ModelError> {
        config.validate()?;
        let mut rng = derive_rng(seed, role);
        let mut params = ParamSet::new();
        let mut in_dim = config.classes;
        for (i, &ch) in config.channels.iter().enumerate() {
            conv_layer_register(&mut params, &format!("conv{i}"), config.width, in_dim, ch, &mut rng);
            in_dim = ch;
        }
        dense_register_zeroed(&mut params, "head", in_dim, 1);
        Ok(Self { config, params })
    }

    /// Builds the scalar logit node for a (T x classes) input node.
    pub fn logit_graph(&self, tape: &mut Tape, binds: &Bindings, prefix: &str, x: Var) -> Var {
        let mut h = x;
        for i in 0..self.config.channels.len() {
            let c = conv_layer(
                tape,
                binds,
                &format!("{prefix}conv{i}"),
                h,
                self.config.width,
                self.config.stride,
            );
            h = tape.relu(c);
        }
        let pooled = tape.mean_rows(h);
        dense(tape, binds, &format!("{prefix}head"), pooled)
    }
}

/// Scalar realness score, strictly inside (0, 1).
pub fn discriminator_score(
    p: &Posteriorgram,
    model: &DiscriminatorModel,
) -> Result<f64, ModelError> {
    if p.rows().ncols() != model.config.classes {
        return Err(ModelError::DimMismatch {
            what: "posteriorgram columns".into(),
            expected: model.config.classes,
            got: p.rows().ncols(),
        });
    }
    if p.len() < model.config.min_len {
        return Err(ModelError::SequenceTooShort { len: p.len(), min: model.config.min_len });
    }
    let mut tape = Tape::new();
    let binds = Bindings::bind(&mut tape, &model.params);
    let x = tape.constant(p.rows().clone());
    let logit = model.logit_graph(&mut tape, &binds, "", x);
    // The sigmoid contract: keep scores strictly inside the open interval
    // so downstream log terms stay finite.
    Ok(sigmoid(tape.scalar(logit)).clamp(1e-7, 1.0 - 1e-7))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn input(len: usize, seed: usize) -> Posteriorgram {
        Posteriorgram::from_labels(&(0..len).map(|i| (i * 31 + seed) % 70).collect::<Vec<_>>())
            .unwrap()
    }

    #[test]
    fn zero_initialized_head_scores_exactly_half() {
        let model = DiscriminatorModel::init(DiscriminatorConfig::default(), 1).unwrap();
        assert_eq!(discriminator_score(&input(32, 0), &model).unwrap(), 0.5);
    }

    #[test]
    fn accepts_variable_lengths() {
        let model = DiscriminatorModel::init(DiscriminatorConfig::default(), 2).unwrap();
        for len in [32usize, 57] {
            let s = discriminator_score(&input(len, 1), &model).unwrap();
            assert!(s > 0.0 && s < 1.0);
        }
    }

    #[test]
    fn too_short_rejected() {
        let model = DiscriminatorModel::init(DiscriminatorConfig::default(), 3).unwrap();
        let err = discriminator_score(&input(5, 2), &model).unwrap_err();
        assert!(err.to_string().contains("sequence too short for discriminator"));
    }

    #[test]
    fn scores_stay_in_open_interval() {
        let mut model = DiscriminatorModel::init(DiscriminatorConfig::default(), 4).unwrap();
        // Saturate the head; the clamp keeps the score inside (0, 1).
        model.params.get_mut("head.b")[[0, 0]] = 1e3;
        let s = discriminator_score(&input(20, 3), &model).unwrap();
        assert!(s < 1.0 && s > 0.0);
    }
}
