//! Unsupervised training objective over posteriorgram sequences:
//! adversarial, cycle-consistency and identity losses, plus the
//! alternating minimax loop that trains the two transformers.

use thiserror::Error;

use ndarray::Array2;

use crate::seqmodels::{
    uppt_teacher_forced, uppt_transform, DiscriminatorConfig, DiscriminatorModel, ModelError,
    Posteriorgram, TrainingConfig, UpptConfig, UpptModel,
};

mod train;

pub use train::cyclegan_train;

/// Probability floor inside every log term.
pub const PROB_FLOOR: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum CycleGanError {
    #[error("discriminator score {0} outside (0, 1)")]
    ScoreOutOfRange(f64),
    #[error("sequence length mismatch: target {target}, predicted {predicted}")]
    LengthMismatch { target: usize, predicted: usize },
    #[error("row {row} is not row-stochastic (sum {sum})")]
    NotRowStochastic { row: usize, sum: f64 },
    #[error("empty posteriorgram set for domain {0}")]
    EmptyDomain(String),
    #[error("training diverged at step {step}: non-finite {component}")]
    Diverged { step: usize, component: String },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Generator pair, discriminator pair, and the training configuration
/// (including the two balancing parameters).
#[derive(Debug, Clone)]
pub struct CycleGanBundle {
    pub g_xy: UpptModel,
    pub g_yx: UpptModel,
    pub d_x: DiscriminatorModel,
    pub d_y: DiscriminatorModel,
    pub cfg: TrainingConfig,
}

impl CycleGanBundle {
    /// Seed-deterministic initialization; each of the four models draws
    /// from its own stream.
    pub fn init(
        uppt: &UpptConfig,
        disc: &DiscriminatorConfig,
        cfg: TrainingConfig,
    ) -> Result<Self, CycleGanError> {
        cfg.validate()?;
        if uppt.classes != disc.classes {
            return Err(CycleGanError::Model(ModelError::InvalidConfig(format!(
                "generator classes {} != discriminator classes {}",
                uppt.classes, disc.classes
            ))));
        }
        Ok(Self {
            g_xy: UpptModel::init_with_role(uppt.clone(), cfg.seed, "uppt-gxy-init")?,
            g_yx: UpptModel::init_with_role(uppt.clone(), cfg.seed, "uppt-gyx-init")?,
            d_x: DiscriminatorModel::init_with_role(disc.clone(), cfg.seed, "disc-x-init")?,
            d_y: DiscriminatorModel::init_with_role(disc.clone(), cfg.seed, "disc-y-init")?,
            cfg,
        })
    }
}

/// Per-step loss decomposition; `total` recomposes from the components.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossReport {
    pub step: usize,
    pub adv_xy: f64,
    pub adv_yx: f64,
    pub cycle: f64,
    pub identity: f64,
    pub total: f64,
}

impl LossReport {
    pub fn assemble(
        step: usize,
        adv_xy: f64,
        adv_yx: f64,
        cycle: f64,
        identity: f64,
        lambda_cycle: f64,
        lambda_identity: f64,
    ) -> Self {
        Self {
            step,
            adv_xy,
            adv_yx,
            cycle,
            identity,
            total: full_objective(adv_xy, adv_yx, cycle, identity, lambda_cycle, lambda_identity),
        }
    }

    /// Fixed-format log line: step, then the four components and total.
    pub fn log_line(&self) -> String {
        format!(
            "{}\t{:.6}\t{:.6}\t{:.6}\t{:.6}\t{:.6}",
            self.step, self.adv_xy, self.adv_yx, self.cycle, self.identity, self.total
        )
    }
}

/// Adversarial value for one mapping direction:
/// `mean(ln d_real) + mean(ln(1 - d_fake))`. The discriminator ascends
/// this; the generator descends its fake term.
pub fn adversarial_loss(d_real: &[f64], d_fake: &[f64]) -> Result<f64, CycleGanError> {
    for &s in d_real.iter().chain(d_fake) {
        if !(s > 0.0 && s < 1.0) {
            return Err(CycleGanError::ScoreOutOfRange(s));
        }
    }
    let real: f64 = d_real.iter().map(|&s| s.ln()).sum::<f64>() / d_real.len().max(1) as f64;
    let fake: f64 =
        d_fake.iter().map(|&s| (1.0 - s).ln()).sum::<f64>() / d_fake.len().max(1) as f64;
    Ok(real + fake)
}

/// Mean over frames of `-sum_c target[t,c] * ln(max(pred[t,c], floor))`;
/// the cross-entropy used by both the cycle and identity objectives.
pub fn sequence_xent(target: &Array2<f64>, predicted: &Array2<f64>) -> Result<f64, CycleGanError> {
    if target.nrows() != predicted.nrows() || target.ncols() != predicted.ncols() {
        return Err(CycleGanError::LengthMismatch {
            target: target.nrows(),
            predicted: predicted.nrows(),
        });
    }
    check_row_stochastic(target)?;
    check_row_stochastic(predicted)?;
    let mut total = 0.0;
    for (trow, prow) in target.rows().into_iter().zip(predicted.rows()) {
        for (&t, &p) in trow.iter().zip(prow.iter()) {
            if t > 0.0 {
                total -= t * p.max(PROB_FLOOR).ln();
            }
        }
    }
    Ok(total / target.nrows() as f64)
}

fn check_row_stochastic(m: &Array2<f64>) -> Result<(), CycleGanError> {
    for (i, row) in m.rows().into_iter().enumerate() {
        let sum: f64 = row.sum();
        if (sum - 1.0).abs() > 1e-4 || row.iter().any(|&p| p < -1e-9) {
            return Err(CycleGanError::NotRowStochastic { row: i, sum });
        }
    }
    Ok(())
}

/// Cycle-consistency loss: each domain's sequence is mapped over by the
/// forward generator free-running, then brought back teacher-forced on the
/// original sequence so frame-wise cross-entropy is defined.
pub fn cycle_loss(
    bundle: &CycleGanBundle,
    p_x: &Posteriorgram,
    p_y: &Posteriorgram,
) -> Result<f64, CycleGanError> {
    let x_leg = cycle_reconstruction(&bundle.g_xy, &bundle.g_yx, p_x, &bundle.cfg)?;
    let y_leg = cycle_reconstruction(&bundle.g_yx, &bundle.g_xy, p_y, &bundle.cfg)?;
    Ok(x_leg + y_leg)
}

fn cycle_reconstruction(
    forward: &UpptModel,
    backward: &UpptModel,
    p: &Posteriorgram,
    cfg: &TrainingConfig,
) -> Result<f64, CycleGanError> {
    let transformed = uppt_transform(p, forward, cfg.max_decode_len(p.len()))?;
    let back = uppt_teacher_forced(&transformed.posteriorgram, p, backward)?;
    sequence_xent(p.rows(), &back.rows)
}

/// Identity-mapping loss: a generator fed real target-domain input should
/// reproduce it (teacher-forced for frame alignment).
pub fn identity_loss(
    bundle: &CycleGanBundle,
    p_x: &Posteriorgram,
    p_y: &Posteriorgram,
) -> Result<f64, CycleGanError> {
    let x_term = {
        let run = uppt_teacher_forced(p_x, p_x, &bundle.g_yx)?;
        sequence_xent(p_x.rows(), &run.rows)?
    };
    let y_term = {
        let run = uppt_teacher_forced(p_y, p_y, &bundle.g_xy)?;
        sequence_xent(p_y.rows(), &run.rows)?
    };
    Ok(x_term + y_term)
}

/// Full objective: both adversarial values plus the weighted cycle and
/// identity terms.
pub fn full_objective(
    adv_xy: f64,
    adv_yx: f64,
    cycle: f64,
    identity: f64,
    lambda_cycle: f64,
    lambda_identity: f64,
) -> f64 {
    adv_xy + adv_yx + lambda_cycle * cycle + lambda_identity * identity
}
