//! Training loops for the supervised stages (PPR, PPTS) and a supervised
//! teacher-forced trainer for the transformer, used for sanity runs on
//! paired data. Adversarial training lives in the cyclegan module.

use ndarray::Array2;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::data::{PprExample, PptsExample};
use super::optim::{Adam, GradAccumulator};
use super::params::Bindings;
use super::tape::Tape;
use super::uppt::decode_teacher_forced;
use super::{
    one_hot_rows, Checkpoint, ModelKind, Posteriorgram, PprConfig, PprModel, PptsConfig,
    PptsModel, TrainError, TrainingConfig, UpptConfig, UpptModel,
};
use crate::rng::derive_rng;

/// Deterministic epoch-shuffled batch index stream.
struct BatchSampler {
    order: Vec<usize>,
    cursor: usize,
    rng: ChaCha8Rng,
}

impl BatchSampler {
    fn new(n: usize, seed: u64, role: &str) -> Self {
        let mut s = Self { order: (0..n).collect(), cursor: 0, rng: derive_rng(seed, role) };
        s.reshuffle();
        s
    }

    fn reshuffle(&mut self) {
        let n = self.order.len();
        for i in (1..n).rev() {
            let j = self.rng.gen_range(0..=i);
            self.order.swap(i, j);
        }
        self.cursor = 0;
    }

    fn next_batch(&mut self, size: usize) -> Vec<usize> {
        let mut batch = Vec::with_capacity(size);
        for _ in 0..size {
            if self.cursor >= self.order.len() {
                self.reshuffle();
            }
            batch.push(self.order[self.cursor]);
            self.cursor += 1;
        }
        batch
    }
}

fn check_finite(loss: f64, step: usize, component: &str) -> Result<(), TrainError> {
    if loss.is_finite() {
        Ok(())
    } else {
        Err(TrainError::Diverged { step, component: component.into() })
    }
}

/// Outcome of a supervised stage: best-validation checkpoint plus the
/// training log lines ("step<TAB>train_loss<TAB>val_loss").
pub struct StageResult {
    pub checkpoint: Checkpoint,
    pub log: Vec<String>,
    pub best_val: f64,
    pub best_step: u64,
}

/// Trains the frame classifier on both domains jointly, minimizing
/// per-frame cross-entropy; returns the checkpoint with the lowest
/// validation cross-entropy seen.
pub fn train_ppr(
    model_cfg: &PprConfig,
    cfg: &TrainingConfig,
    train: &[PprExample],
    val: &[PprExample],
) -> Result<StageResult, TrainError> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(TrainError::EmptyDataset("ppr".into()));
    }
    let mut model = PprModel::init(model_cfg.clone(), cfg.seed)?;
    let mut opt = Adam::new(cfg.learning_rate);
    let mut sampler = BatchSampler::new(train.len(), cfg.seed, "ppr-batch");

    let classes = model.config.classes;
    let compressed: Vec<Array2<f64>> =
        train.iter().map(|e| PprModel::compress_input(&e.mel)).collect();
    let val_compressed: Vec<Array2<f64>> =
        val.iter().map(|e| PprModel::compress_input(&e.mel)).collect();

    let mut best: Option<(f64, u64, Checkpoint)> = None;
    let mut log = Vec::new();

    for step in 1..=cfg.max_steps {
        let batch = sampler.next_batch(cfg.batch_size);
        let mut acc = GradAccumulator::new();
        let mut train_loss = 0.0;
        for &i in &batch {
            let mut tape = Tape::new();
            let binds = Bindings::bind(&mut tape, &model.params);
            let x = tape.constant(compressed[i].clone());
            let logits = model.logits_graph(&mut tape, &binds, "", x);
            let loss = tape.softmax_xent_rows(logits, one_hot_rows(&train[i].labels, classes));
            train_loss += tape.scalar(loss);
            let grads = tape.backward(loss);
            for name in model.params.names() {
                if let Some(g) = grads.get(binds.var(name)) {
                    acc.add(name, g);
                }
            }
        }
        train_loss /= batch.len() as f64;
        check_finite(train_loss, step, "ppr train loss")?;
        acc.scale(1.0 / batch.len() as f64);
        opt.step(&mut model.params, acc.map());

        if step % cfg.eval_every == 0 || step == cfg.max_steps {
            let val_loss = ppr_validation_xent(&model, &val_compressed, val)?;
            check_finite(val_loss, step, "ppr validation loss")?;
            log.push(format!("{step}\t{train_loss:.6}\t{val_loss:.6}"));
            if best.as_ref().map_or(true, |(b, _, _)| val_loss < *b) {
                let ckpt = Checkpoint::capture(
                    ModelKind::Ppr,
                    &model.config,
                    step as u64,
                    cfg.seed,
                    &model.params,
                )?;
                best = Some((val_loss, step as u64, ckpt));
            }
        }
    }

    let (best_val, best_step, checkpoint) = best.expect("at least one evaluation ran");
    Ok(StageResult { checkpoint, log, best_val, best_step })
}

/// Frame-weighted mean cross-entropy over a validation set.
fn ppr_validation_xent(
    model: &PprModel,
    compressed: &[Array2<f64>],
    val: &[PprExample],
) -> Result<f64, TrainError> {
    if val.is_empty() {
        return Ok(f64::INFINITY);
    }
    let classes = model.config.classes;
    let (mut total, mut frames) = (0.0, 0usize);
    for (x, e) in compressed.iter().zip(val) {
        let mut tape = Tape::new();
        let binds = Bindings::bind(&mut tape, &model.params);
        let input = tape.constant(x.clone());
        let logits = model.logits_graph(&mut tape, &binds, "", input);
        let loss = tape.softmax_xent_rows(logits, one_hot_rows(&e.labels, classes));
        total += tape.scalar(loss) * e.labels.len() as f64;
        frames += e.labels.len();
    }
    Ok(total / frames as f64)
}

/// Fraction of frames whose argmax matches the label.
pub fn ppr_frame_accuracy(model: &PprModel, examples: &[PprExample]) -> Result<f64, TrainError> {
    let (mut hit, mut total) = (0usize, 0usize);
    for e in examples {
        let mut tape = Tape::new();
        let binds = Bindings::bind(&mut tape, &model.params);
        let x = tape.constant(PprModel::compress_input(&e.mel));
        let logits = model.logits_graph(&mut tape, &binds, "", x);
        let probs = tape.softmax_rows(logits);
        let pg = Posteriorgram::new(tape.value(probs).clone())?;
        for (pred, &truth) in pg.argmax_labels().iter().zip(&e.labels) {
            hit += usize::from(*pred == truth);
            total += 1;
        }
    }
    Ok(hit as f64 / total.max(1) as f64)
}

/// Trains a speaker-dependent synthesizer, minimizing MSE between
/// predicted and true log-magnitude frames; returns the checkpoint with
/// the lowest validation MSE.
pub fn train_ppts(
    model_cfg: &PptsConfig,
    cfg: &TrainingConfig,
    train: &[PptsExample],
    val: &[PptsExample],
    init_role: &str,
) -> Result<StageResult, TrainError> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(TrainError::EmptyDataset("ppts".into()));
    }
    let mut model = PptsModel::init_with_role(model_cfg.clone(), cfg.seed, init_role)?;
    // Log-magnitude targets sit far from zero; starting the output bias at
    // the mean training frame leaves only deviations to learn.
    {
        let mut mean = Array2::zeros((1, model_cfg.out_dim));
        let mut rows = 0usize;
        for e in train {
            for r in e.target.rows() {
                mean.row_mut(0).scaled_add(1.0, &r);
                rows += 1;
            }
        }
        mean /= rows.max(1) as f64;
        *model.params.get_mut("out.b") = mean;
    }
    let mut opt = Adam::new(cfg.learning_rate);
    let mut sampler = BatchSampler::new(train.len(), cfg.seed, &format!("{init_role}-batch"));

    let mut best: Option<(f64, u64, Checkpoint)> = None;
    let mut log = Vec::new();

    for step in 1..=cfg.max_steps {
        let batch = sampler.next_batch(cfg.batch_size);
        let mut acc = GradAccumulator::new();
        let mut train_loss = 0.0;
        for &i in &batch {
            let mut tape = Tape::new();
            let binds = Bindings::bind(&mut tape, &model.params);
            let x = tape.constant(train[i].posteriorgram.clone());
            let pred = model.graph(&mut tape, &binds, "", x);
            let loss = tape.mse(pred, train[i].target.clone());
            train_loss += tape.scalar(loss);
            let grads = tape.backward(loss);
            for name in model.params.names() {
                if let Some(g) = grads.get(binds.var(name)) {
                    acc.add(name, g);
                }
            }
        }
        train_loss /= batch.len() as f64;
        check_finite(train_loss, step, "ppts train loss")?;
        acc.scale(1.0 / batch.len() as f64);
        opt.step(&mut model.params, acc.map());

        if step % cfg.eval_every == 0 || step == cfg.max_steps {
            let val_loss = ppts_validation_mse(&model, val)?;
            check_finite(val_loss, step, "ppts validation loss")?;
            log.push(format!("{step}\t{train_loss:.6}\t{val_loss:.6}"));
            if best.as_ref().map_or(true, |(b, _, _)| val_loss < *b) {
                let ckpt = Checkpoint::capture(
                    ModelKind::Ppts,
                    &model.config,
                    step as u64,
                    cfg.seed,
                    &model.params,
                )?;
                best = Some((val_loss, step as u64, ckpt));
            }
        }
    }

    let (best_val, best_step, checkpoint) = best.expect("at least one evaluation ran");
    Ok(StageResult { checkpoint, log, best_val, best_step })
}

/// Element-weighted mean squared error over a validation set.
pub fn ppts_validation_mse(model: &PptsModel, val: &[PptsExample]) -> Result<f64, TrainError> {
    if val.is_empty() {
        return Ok(f64::INFINITY);
    }
    let (mut total, mut n) = (0.0, 0usize);
    for e in val {
        let mut tape = Tape::new();
        let binds = Bindings::bind(&mut tape, &model.params);
        let x = tape.constant(e.posteriorgram.clone());
        let pred = model.graph(&mut tape, &binds, "", x);
        let loss = tape.mse(pred, e.target.clone());
        let count = e.target.len();
        total += tape.scalar(loss) * count as f64;
        n += count;
    }
    Ok(total / n as f64)
}

/// MSE of predicting the element-wise mean frame of `of` on `val`; the
/// variance baseline a trained synthesizer must beat.
pub fn mean_frame_baseline_mse(of: &[PptsExample], val: &[PptsExample]) -> f64 {
    let cols = of[0].target.ncols();
    let mut mean = Array2::zeros((1, cols));
    let mut rows = 0usize;
    for e in of {
        for r in e.target.rows() {
            mean.row_mut(0).scaled_add(1.0, &r);
            rows += 1;
        }
    }
    mean /= rows as f64;
    let (mut total, mut n) = (0.0, 0usize);
    for e in val {
        for r in e.target.rows() {
            for (a, b) in r.iter().zip(mean.row(0).iter()) {
                total += (a - b) * (a - b);
                n += 1;
            }
        }
    }
    total / n as f64
}

/// Supervised teacher-forced training of the transformer on paired
/// sequences, with end-position EOS supervision. Used for identity-task
/// sanity checks on held-out data.
pub fn train_uppt_supervised(
    model_cfg: &UpptConfig,
    cfg: &TrainingConfig,
    pairs: &[(Posteriorgram, Posteriorgram)],
) -> Result<(UpptModel, Vec<String>), TrainError> {
    cfg.validate()?;
    if pairs.is_empty() {
        return Err(TrainError::EmptyDataset("uppt".into()));
    }
    let mut model = UpptModel::init(model_cfg.clone(), cfg.seed)?;
    let mut opt = Adam::new(cfg.learning_rate);
    let mut sampler = BatchSampler::new(pairs.len(), cfg.seed, "uppt-batch");
    let mut log = Vec::new();

    for step in 1..=cfg.max_steps {
        let batch = sampler.next_batch(cfg.batch_size);
        let mut acc = GradAccumulator::new();
        let mut total = 0.0;
        for &i in &batch {
            let (src, dst) = &pairs[i];
            let mut tape = Tape::new();
            let binds = Bindings::bind(&mut tape, &model.params);
            let input = tape.constant(src.rows().clone());
            let graph = decode_teacher_forced(&model, &mut tape, &binds, "", input, dst.rows());
            let stacked = graph.stack_rows(&mut tape);
            let xent = tape.xent_rows(stacked, dst.rows().clone(), 1e-8);
            let mut loss = xent;
            // EOS: 1 at the final step, 0 elsewhere.
            let last = graph.eos_logits.len() - 1;
            for (t, &logit) in graph.eos_logits.iter().enumerate() {
                let target = if t == last { 1.0 } else { 0.0 };
                let bce = tape.bce_logit(logit, target);
                let weighted = tape.scale(bce, cfg.eos_weight / graph.eos_logits.len() as f64);
                loss = tape.add(loss, weighted);
            }
            total += tape.scalar(loss);
            let grads = tape.backward(loss);
            for name in model.params.names() {
                if let Some(g) = grads.get(binds.var(name)) {
                    acc.add(name, g);
                }
            }
        }
        total /= batch.len() as f64;
        check_finite(total, step, "uppt supervised loss")?;
        acc.scale(1.0 / batch.len() as f64);
        opt.step(&mut model.params, acc.map());
        if step % cfg.eval_every == 0 || step == cfg.max_steps {
            log.push(format!("{step}\t{total:.6}"));
        }
    }
    Ok((model, log))
}
