//! Unsupervised phoneme posteriorgram transformer: attention
//! encoder-decoder with an end-of-sequence head, so output length is
//! decoupled from input length.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::layers::{
    attention_precompute, attention_register, attention_step, dense, dense_register,
    gru_register, gru_sequence, gru_step,
};
use super::params::{Bindings, ParamSet};
use super::tape::{sigmoid, Tape, Var};
use super::{ModelError, Posteriorgram};
use crate::rng::derive_rng;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct UpptConfig {
    pub classes: usize,
    pub hidden: usize,
    pub attn_dim: usize,
}

impl Default for UpptConfig {
    fn default() -> Self {
        Self { classes: Posteriorgram::CLASSES, hidden: 128, attn_dim: 64 }
    }
}

impl UpptConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.classes == 0 || self.hidden == 0 || self.attn_dim == 0 {
            return Err(ModelError::InvalidConfig("uppt dims must be >= 1".into()));
        }
        Ok(())
    }
}

/// Encoder GRU + additive attention + decoder GRU with a softmax output
/// head and a sigmoid EOS head. The encoder's final state initializes the
/// decoder; at inference the previous soft output row is fed back as the
/// next decoder input.
#[derive(Debug, Clone)]
pub struct UpptModel {
    pub config: UpptConfig,
    pub params: ParamSet,
}

impl UpptModel {
    pub fn init(config: UpptConfig, seed: u64) -> Result<Self, ModelError> {
        Self::init_with_role(config, seed, "uppt-init")
    }

    /// Distinct role strings give the two generators of a pair independent
    /// initializations from one master seed.
    pub fn init_with_role(config: UpptConfig, seed: u64, role: &str) -> Result<Self, ModelError> {
        config.validate()?;
        let (c, h, a) = (config.classes, config.hidden, config.attn_dim);
        let mut rng = derive_rng(seed, role);
        let mut params = ParamSet::new();
        gru_register(&mut params, "enc", c, h, &mut rng);
        attention_register(&mut params, "attn", h, h, a, &mut rng);
        gru_register(&mut params, "dec", c + h, h, &mut rng);
        dense_register(&mut params, "out", 2 * h, c, &mut rng);
        // The EOS head also sees the attention weight on the final input
        // position; "content exhausted" is its most direct cue.
        dense_register(&mut params, "eos", 2 * h + 1, 1, &mut rng);
        // Start pessimistic about stopping: untrained decoders should run,
        // not emit one-frame outputs.
        params.get_mut("eos.b")[[0, 0]] = -2.0;
        Ok(Self { config, params })
    }
}

/// Tape-level result of a decode: per-step soft rows (1 x classes),
/// attention weight rows (1 x T_in) and EOS logits (1 x 1).
pub struct DecodeGraph {
    pub rows: Vec<Var>,
    pub alphas: Vec<Var>,
    pub eos_logits: Vec<Var>,
    pub truncated: bool,
}

impl DecodeGraph {
    /// Stacks the emitted rows into one T' x classes node.
    pub fn stack_rows(&self, tape: &mut Tape) -> Var {
        tape.stack_rows(self.rows.clone())
    }
}

/// Free-running decode: the previous output row feeds the next step, EOS
/// (sigmoid >= 0.5) or the `max_len` cap stops decoding. EOS is ignored
/// for the first `min_len - 1` steps.
pub fn decode_free_running(
    model: &UpptModel,
    tape: &mut Tape,
    binds: &Bindings,
    prefix: &str,
    input: Var,
    max_len: usize,
    min_len: usize,
) -> DecodeGraph {
    let (c, h) = (model.config.classes, model.config.hidden);
    let enc_prefix = format!("{prefix}enc");
    let (enc_states, enc_final) = gru_sequence(tape, binds, &enc_prefix, input, h, false);
    let enc_stack = tape.stack_rows(enc_states);
    let attn_prefix = format!("{prefix}attn");
    let actx = attention_precompute(tape, binds, &attn_prefix, enc_stack);

    let dec_prefix = format!("{prefix}dec");
    let out_prefix = format!("{prefix}out");
    let eos_prefix = format!("{prefix}eos");

    let mut state = enc_final;
    let mut prev = tape.constant(Array2::zeros((1, c)));
    let mut graph = DecodeGraph { rows: vec![], alphas: vec![], eos_logits: vec![], truncated: true };

    let t_in = tape.value(input).nrows();
    for t in 0..max_len {
        let (context, alpha) = attention_step(tape, binds, &attn_prefix, &actx, state);
        let dec_in = tape.concat_cols(prev, context);
        state = gru_step(tape, binds, &dec_prefix, dec_in, state, h);
        let features = tape.concat_cols(state, context);
        let logits = dense(tape, binds, &out_prefix, features);
        let row = tape.softmax_rows(logits);
        let alpha_last = tape.slice_cols(alpha, t_in - 1, 1);
        let eos_features = tape.concat_cols(features, alpha_last);
        let eos_logit = dense(tape, binds, &eos_prefix, eos_features);

        graph.rows.push(row);
        graph.alphas.push(alpha);
        graph.eos_logits.push(eos_logit);

        if t + 1 >= min_len && sigmoid(tape.scalar(eos_logit)) >= 0.5 {
            graph.truncated = false;
            break;
        }
        prev = row;
    }
    graph
}

/// Teacher-forced decode: target rows supply the previous-step inputs, so
/// exactly `target.nrows()` rows come out and the graph stays
/// differentiable w.r.t. both the input subgraph and the parameters.
pub fn decode_teacher_forced(
    model: &UpptModel,
    tape: &mut Tape,
    binds: &Bindings,
    prefix: &str,
    input: Var,
    target: &Array2<f64>,
) -> DecodeGraph {
    let (c, h) = (model.config.classes, model.config.hidden);
    let enc_prefix = format!("{prefix}enc");
    let (enc_states, enc_final) = gru_sequence(tape, binds, &enc_prefix, input, h, false);
    let enc_stack = tape.stack_rows(enc_states);
    let attn_prefix = format!("{prefix}attn");
    let actx = attention_precompute(tape, binds, &attn_prefix, enc_stack);

    let dec_prefix = format!("{prefix}dec");
    let out_prefix = format!("{prefix}out");
    let eos_prefix = format!("{prefix}eos");

    let mut state = enc_final;
    let mut prev = tape.constant(Array2::zeros((1, c)));
    let mut graph = DecodeGraph { rows: vec![], alphas: vec![], eos_logits: vec![], truncated: false };

    let t_in = tape.value(input).nrows();
    for t in 0..target.nrows() {
        let (context, alpha) = attention_step(tape, binds, &attn_prefix, &actx, state);
        let dec_in = tape.concat_cols(prev, context);
        state = gru_step(tape, binds, &dec_prefix, dec_in, state, h);
        let features = tape.concat_cols(state, context);
        let logits = dense(tape, binds, &out_prefix, features);
        let row = tape.softmax_rows(logits);
        let alpha_last = tape.slice_cols(alpha, t_in - 1, 1);
        let eos_features = tape.concat_cols(features, alpha_last);
        let eos_logit = dense(tape, binds, &eos_prefix, eos_features);

        graph.rows.push(row);
        graph.alphas.push(alpha);
        graph.eos_logits.push(eos_logit);

        let target_row = target.row(t).to_owned().insert_axis(ndarray::Axis(0));
        prev = tape.constant(target_row);
    }
    graph
}

/// Result of [`uppt_transform`].
#[derive(Debug, Clone)]
pub struct UpptTransform {
    pub posteriorgram: Posteriorgram,
    /// T' x T attention weights; each row sums to one.
    pub attention: Array2<f64>,
    /// Decoding hit `max_len` without the EOS unit firing.
    pub truncated: bool,
}

/// Autoregressive transform of a posteriorgram sequence; output length is
/// whatever the EOS head decides, capped at `max_len`.
pub fn uppt_transform(
    p: &Posteriorgram,
    model: &UpptModel,
    max_len: usize,
) -> Result<UpptTransform, ModelError> {
    check_classes(p, model)?;
    if max_len == 0 {
        return Err(ModelError::InvalidConfig("max_len must be >= 1".into()));
    }
    let mut tape = Tape::new();
    let binds = Bindings::bind(&mut tape, &model.params);
    let input = tape.constant(p.rows().clone());
    let graph = decode_free_running(model, &mut tape, &binds, "", input, max_len, 1);

    let rows = collect_rows(&tape, &graph.rows, model.config.classes);
    let attention = collect_rows(&tape, &graph.alphas, p.len());
    Ok(UpptTransform {
        posteriorgram: Posteriorgram::new(rows)?,
        attention,
        truncated: graph.truncated,
    })
}

/// Result of [`uppt_teacher_forced`].
#[derive(Debug, Clone)]
pub struct TeacherForcedRun {
    /// Exactly `target.len()` simplex rows.
    pub rows: Array2<f64>,
    pub attention: Array2<f64>,
    pub eos_logits: Vec<f64>,
}

/// Teacher-forced evaluation: the decoder consumes `p_target`'s rows as
/// previous-step inputs and emits one output row per target row.
pub fn uppt_teacher_forced(
    p_in: &Posteriorgram,
    p_target: &Posteriorgram,
    model: &UpptModel,
) -> Result<TeacherForcedRun, ModelError> {
    check_classes(p_in, model)?;
    check_classes(p_target, model)?;
    let mut tape = Tape::new();
    let binds = Bindings::bind(&mut tape, &model.params);
    let input = tape.constant(p_in.rows().clone());
    let graph = decode_teacher_forced(model, &mut tape, &binds, "", input, p_target.rows());

    Ok(TeacherForcedRun {
        rows: collect_rows(&tape, &graph.rows, model.config.classes),
        attention: collect_rows(&tape, &graph.alphas, p_in.len()),
        eos_logits: graph.eos_logits.iter().map(|&v| tape.scalar(v)).collect(),
    })
}

fn check_classes(p: &Posteriorgram, model: &UpptModel) -> Result<(), ModelError> {
    if p.rows().ncols() != model.config.classes {
        return Err(ModelError::DimMismatch {
            what: "posteriorgram columns".into(),
            expected: model.config.classes,
            got: p.rows().ncols(),
        });
    }
    Ok(())
}

fn collect_rows(tape: &Tape, vars: &[Var], cols: usize) -> Array2<f64> {
    let mut out = Array2::zeros((vars.len(), cols));
    for (i, &v) in vars.iter().enumerate() {
        out.row_mut(i).assign(&tape.value(v).row(0));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_model(seed: u64) -> UpptModel {
        UpptModel::init(UpptConfig { hidden: 8, attn_dim: 5, ..UpptConfig::default() }, seed).unwrap()
    }

    fn input(len: usize) -> Posteriorgram {
        Posteriorgram::from_labels(&(0..len).map(|i| i % 7).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn eos_always_firing_gives_length_one() {
        let mut model = tiny_model(1);
        *model.params.get_mut("eos.w") = Array2::zeros((17, 1));
        model.params.get_mut("eos.b")[[0, 0]] = 10.0; // sigmoid ~ 1
        let out = uppt_transform(&input(12), &model, 30).unwrap();
        assert_eq!(out.posteriorgram.len(), 1);
        assert!(!out.truncated);
    }

    #[test]
    fn eos_never_firing_truncates_at_max_len() {
        let mut model = tiny_model(2);
        *model.params.get_mut("eos.w") = Array2::zeros((17, 1));
        model.params.get_mut("eos.b")[[0, 0]] = -50.0;
        let out = uppt_transform(&input(12), &model, 30).unwrap();
        assert_eq!(out.posteriorgram.len(), 30);
        assert!(out.truncated);
    }

    #[test]
    fn attention_rows_are_simplex() {
        let model = tiny_model(3);
        let out = uppt_transform(&input(9), &model, 15).unwrap();
        assert_eq!(out.attention.ncols(), 9);
        for row in out.attention.rows() {
            assert!((row.sum() - 1.0).abs() < 1e-6);
            assert!(row.iter().all(|&a| a >= 0.0));
        }
    }

    #[test]
    fn teacher_forced_emits_exactly_target_length() {
        let model = tiny_model(4);
        let run = uppt_teacher_forced(&input(6), &input(11), &model).unwrap();
        assert_eq!(run.rows.nrows(), 11);
        assert_eq!(run.eos_logits.len(), 11);
        for row in run.rows.rows() {
            assert!((row.sum() - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn teacher_forced_step_k_ignores_later_targets() {
        // Perturbing target row k leaves outputs 0..=k unchanged (step t
        // consumes target rows < t only).
        let model = tiny_model(5);
        let p_in = input(5);
        let base_target = input(8);
        let run_a = uppt_teacher_forced(&p_in, &base_target, &model).unwrap();

        let k = 4;
        let mut rows = base_target.rows().clone();
        for j in 0..rows.ncols() {
            rows[[k, j]] = 1.0 / rows.ncols() as f64;
        }
        let perturbed = Posteriorgram::new(rows).unwrap();
        let run_b = uppt_teacher_forced(&p_in, &perturbed, &model).unwrap();

        for t in 0..=k {
            for j in 0..run_a.rows.ncols() {
                assert_eq!(run_a.rows[[t, j]], run_b.rows[[t, j]], "row {t} changed");
            }
        }
        let mut changed = false;
        for t in k + 1..run_a.rows.nrows() {
            for j in 0..run_a.rows.ncols() {
                if run_a.rows[[t, j]] != run_b.rows[[t, j]] {
                    changed = true;
                }
            }
        }
        assert!(changed, "later steps should depend on the perturbed row");
    }

    #[test]
    fn output_rows_are_simplex_under_free_running() {
        let model = tiny_model(6);
        let out = uppt_transform(&input(10), &model, 25).unwrap();
        for row in out.posteriorgram.rows().rows() {
            assert!((row.sum() - 1.0).abs() < 1e-6);
            assert!(row.iter().all(|&p| (0.0..=1.0 + 1e-9).contains(&p)));
        }
    }
}
