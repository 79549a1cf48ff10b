//! Graph builders for the layer zoo: dense, 1-D convolution bank, GRU and
//! content-based attention.
//!
//! Layers register named parameters into a [`ParamSet`] and build their
//! forward pass on a [`Tape`] from [`Bindings`]. Prefixes keep several
//! models apart when they share a tape.

use ndarray::Array2;
use rand_chacha::ChaCha8Rng;

use super::params::{xavier, Bindings, ParamSet};
use super::tape::{Tape, Var};

// ---------------------------------------------------------------- dense --

pub fn dense_register(
    params: &mut ParamSet,
    prefix: &str,
    in_dim: usize,
    out_dim: usize,
    rng: &mut ChaCha8Rng,
) {
    params.insert(&format!("{prefix}.w"), xavier(rng, in_dim, out_dim));
    params.insert(&format!("{prefix}.b"), Array2::zeros((1, out_dim)));
}

/// Dense layer with all-zero weights and bias (sigmoid of its output is
/// exactly 0.5); used for discriminator output heads.
pub fn dense_register_zeroed(params: &mut ParamSet, prefix: &str, in_dim: usize, out_dim: usize) {
    params.insert(&format!("{prefix}.w"), Array2::zeros((in_dim, out_dim)));
    params.insert(&format!("{prefix}.b"), Array2::zeros((1, out_dim)));
}

pub fn dense(tape: &mut Tape, binds: &Bindings, prefix: &str, x: Var) -> Var {
    let w = binds.var(&format!("{prefix}.w"));
    let b = binds.var(&format!("{prefix}.b"));
    let xw = tape.matmul(x, w);
    tape.add_row_broadcast(xw, b)
}

// ------------------------------------------------------------ conv bank --

/// One conv per kernel width, ReLU, channel-concatenated: captures local
/// patterns at several time scales.
pub fn conv_bank_register(
    params: &mut ParamSet,
    prefix: &str,
    widths: &[usize],
    in_dim: usize,
    filters: usize,
    rng: &mut ChaCha8Rng,
) {
    for &k in widths {
        params.insert(&format!("{prefix}.w{k}"), xavier(rng, k * in_dim, filters));
        params.insert(&format!("{prefix}.b{k}"), Array2::zeros((1, filters)));
    }
}

pub fn conv_bank(
    tape: &mut Tape,
    binds: &Bindings,
    prefix: &str,
    x: Var,
    widths: &[usize],
) -> Var {
    let mut parts: Option<Var> = None;
    for &k in widths {
        let w = binds.var(&format!("{prefix}.w{k}"));
        let b = binds.var(&format!("{prefix}.b{k}"));
        let c = tape.conv1d(x, w, b, k, 1);
        let r = tape.relu(c);
        parts = Some(match parts {
            None => r,
            Some(acc) => tape.concat_cols(acc, r),
        });
    }
    parts.expect("conv bank needs at least one width")
}

/// Strided conv layer (discriminator building block).
pub fn conv_layer_register(
    params: &mut ParamSet,
    prefix: &str,
    width: usize,
    in_dim: usize,
    out_dim: usize,
    rng: &mut ChaCha8Rng,
) {
    params.insert(&format!("{prefix}.w"), xavier(rng, width * in_dim, out_dim));
    params.insert(&format!("{prefix}.b"), Array2::zeros((1, out_dim)));
}

pub fn conv_layer(
    tape: &mut Tape,
    binds: &Bindings,
    prefix: &str,
    x: Var,
    width: usize,
    stride: usize,
) -> Var {
    let w = binds.var(&format!("{prefix}.w"));
    let b = binds.var(&format!("{prefix}.b"));
    tape.conv1d(x, w, b, width, stride)
}

// ------------------------------------------------------------------ gru --

/// Gate layout in the 3H projection: [reset | update | candidate].
pub fn gru_register(
    params: &mut ParamSet,
    prefix: &str,
    input_dim: usize,
    hidden: usize,
    rng: &mut ChaCha8Rng,
) {
    params.insert(&format!("{prefix}.wx"), xavier(rng, input_dim, 3 * hidden));
    params.insert(&format!("{prefix}.uh"), xavier(rng, hidden, 3 * hidden));
    params.insert(&format!("{prefix}.b"), Array2::zeros((1, 3 * hidden)));
}

/// One GRU step from a pre-projected input row `xp` (1 x 3H, input
/// projection plus bias already applied).
fn gru_step_preprojected(
    tape: &mut Tape,
    binds: &Bindings,
    prefix: &str,
    xp: Var,
    h_prev: Var,
    hidden: usize,
) -> Var {
    let uh = binds.var(&format!("{prefix}.uh"));
    let hp = tape.matmul(h_prev, uh);

    let xr = tape.slice_cols(xp, 0, hidden);
    let xz = tape.slice_cols(xp, hidden, hidden);
    let xn = tape.slice_cols(xp, 2 * hidden, hidden);
    let hr = tape.slice_cols(hp, 0, hidden);
    let hz = tape.slice_cols(hp, hidden, hidden);
    let hn = tape.slice_cols(hp, 2 * hidden, hidden);

    let r_pre = tape.add(xr, hr);
    let r = tape.sigmoid(r_pre);
    let z_pre = tape.add(xz, hz);
    let z = tape.sigmoid(z_pre);
    let gated = tape.mul(r, hn);
    let n_pre = tape.add(xn, gated);
    let n = tape.tanh(n_pre);

    // h = n + z * (h_prev - n)  ==  (1 - z) * n + z * h_prev
    let diff = tape.sub(h_prev, n);
    let scaled = tape.mul(z, diff);
    tape.add(n, scaled)
}

/// One GRU step from a raw input row (1 x I).
pub fn gru_step(
    tape: &mut Tape,
    binds: &Bindings,
    prefix: &str,
    input: Var,
    h_prev: Var,
    hidden: usize,
) -> Var {
    let wx = binds.var(&format!("{prefix}.wx"));
    let b = binds.var(&format!("{prefix}.b"));
    let proj = tape.matmul(input, wx);
    let xp = tape.add_row_broadcast(proj, b);
    gru_step_preprojected(tape, binds, prefix, xp, h_prev, hidden)
}

/// Runs a GRU over a T x I sequence. Returns per-step states in original
/// time order plus the final state; `reverse` walks the input backwards
/// (for the second half of a bidirectional layer).
pub fn gru_sequence(
    tape: &mut Tape,
    binds: &Bindings,
    prefix: &str,
    x: Var,
    hidden: usize,
    reverse: bool,
) -> (Vec<Var>, Var) {
    let t_len = tape.value(x).nrows();
    let wx = binds.var(&format!("{prefix}.wx"));
    let b = binds.var(&format!("{prefix}.b"));
    // One matmul projects every step's input.
    let proj = tape.matmul(x, wx);
    let xp_all = tape.add_row_broadcast(proj, b);

    let mut h = tape.constant(Array2::zeros((1, hidden)));
    let mut states = vec![h; t_len];
    let order: Vec<usize> = if reverse {
        (0..t_len).rev().collect()
    } else {
        (0..t_len).collect()
    };
    for t in order {
        let xp = tape.row(xp_all, t);
        h = gru_step_preprojected(tape, binds, prefix, xp, h, hidden);
        states[t] = h;
    }
    (states, h)
}

/// Bidirectional GRU: concatenated forward and backward states per step
/// (T x 2H).
pub fn bigru_register(
    params: &mut ParamSet,
    prefix: &str,
    input_dim: usize,
    hidden: usize,
    rng: &mut ChaCha8Rng,
) {
    gru_register(params, &format!("{prefix}.fwd"), input_dim, hidden, rng);
    gru_register(params, &format!("{prefix}.bwd"), input_dim, hidden, rng);
}

pub fn bigru(
    tape: &mut Tape,
    binds: &Bindings,
    prefix: &str,
    x: Var,
    hidden: usize,
) -> Var {
    let (fwd, _) = gru_sequence(tape, binds, &format!("{prefix}.fwd"), x, hidden, false);
    let (bwd, _) = gru_sequence(tape, binds, &format!("{prefix}.bwd"), x, hidden, true);
    let fwd_stack = tape.stack_rows(fwd);
    let bwd_stack = tape.stack_rows(bwd);
    tape.concat_cols(fwd_stack, bwd_stack)
}

// ------------------------------------------------------------ attention --

/// Additive content-based attention (tanh scoring).
pub fn attention_register(
    params: &mut ParamSet,
    prefix: &str,
    enc_dim: usize,
    query_dim: usize,
    attn_dim: usize,
    rng: &mut ChaCha8Rng,
) {
    params.insert(&format!("{prefix}.wk"), xavier(rng, enc_dim, attn_dim));
    params.insert(&format!("{prefix}.wq"), xavier(rng, query_dim, attn_dim));
    params.insert(&format!("{prefix}.b"), Array2::zeros((1, attn_dim)));
    params.insert(&format!("{prefix}.v"), xavier(rng, attn_dim, 1));
}

/// Keys projected once per decoded sequence.
pub struct AttentionContext {
    pub keys: Var,
    pub memory: Var,
}

pub fn attention_precompute(
    tape: &mut Tape,
    binds: &Bindings,
    prefix: &str,
    memory: Var,
) -> AttentionContext {
    let wk = binds.var(&format!("{prefix}.wk"));
    let keys = tape.matmul(memory, wk);
    AttentionContext { keys, memory }
}

/// One attention read: returns (context 1 x enc_dim, weights 1 x T).
/// The weight row is a softmax, so attention mass sums to one.
pub fn attention_step(
    tape: &mut Tape,
    binds: &Bindings,
    prefix: &str,
    ctx: &AttentionContext,
    query: Var,
) -> (Var, Var) {
    let wq = binds.var(&format!("{prefix}.wq"));
    let b = binds.var(&format!("{prefix}.b"));
    let v = binds.var(&format!("{prefix}.v"));

    let q = tape.matmul(query, wq);
    let shifted = tape.add_row_broadcast(ctx.keys, q);
    let pre = tape.add_row_broadcast(shifted, b);
    let act = tape.tanh(pre);
    let scores = tape.matmul(act, v);
    let scores_row = tape.transpose(scores);
    let alpha = tape.softmax_rows(scores_row);
    let context = tape.matmul(alpha, ctx.memory);
    (context, alpha)
}
