//! The trainable components: PPR (mel -> posteriorgram), PPTS
//! (posteriorgram -> log-magnitude spectrogram), UPPT (posteriorgram ->
//! variable-length posteriorgram via an attention encoder-decoder), the
//! convolutional sequence discriminator, and a finite-difference gradient
//! verification utility.

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub mod checkpoint;
pub mod data;
pub mod discriminator;
pub mod gradcheck;
pub mod layers;
pub mod optim;
pub mod params;
pub mod ppr;
pub mod ppts;
pub mod tape;
pub mod train;
pub mod uppt;

pub use checkpoint::{Checkpoint, ModelKind};
pub use discriminator::{discriminator_score, DiscriminatorConfig, DiscriminatorModel};
pub use gradcheck::gradient_check;
pub use ppr::{ppr_forward, PprConfig, PprModel};
pub use ppts::{ppts_forward, PptsConfig, PptsModel};
pub use uppt::{
    uppt_teacher_forced, uppt_transform, TeacherForcedRun, UpptConfig, UpptModel, UpptTransform,
};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("dimension mismatch in {what}: expected {expected}, got {got}")]
    DimMismatch { what: String, expected: usize, got: usize },
    #[error("invalid model config: {0}")]
    InvalidConfig(String),
    #[error("sequence too short for discriminator: {len} frames, minimum {min}")]
    SequenceTooShort { len: usize, min: usize },
    #[error("posteriorgram row {row} is not on the simplex (sum {sum})")]
    NotRowStochastic { row: usize, sum: f64 },
    #[error("non-finite {0}")]
    NonFinite(String),
    #[error("checkpoint kind mismatch: expected {expected}, got {got}")]
    WrongKind { expected: String, got: String },
    #[error("checkpoint config: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] crate::io::MatrixIoError),
}

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("training diverged at step {step}: non-finite {component}")]
    Diverged { step: usize, component: String },
    #[error("empty training set for {0}")]
    EmptyDataset(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Corpus(#[from] crate::corpus::CorpusError),
    #[error(transparent)]
    Dsp(#[from] crate::dsp::DspError),
}

/// Sequence of per-frame probability rows over the 70 phoneme classes.
#[derive(Debug, Clone, PartialEq)]
pub struct Posteriorgram {
    rows: Array2<f64>,
}

impl Posteriorgram {
    pub const CLASSES: usize = 70;

    /// Validates shape, entry range and row sums (1 within 1e-6).
    pub fn new(rows: Array2<f64>) -> Result<Self, ModelError> {
        if rows.ncols() != Self::CLASSES {
            return Err(ModelError::DimMismatch {
                what: "posteriorgram columns".into(),
                expected: Self::CLASSES,
                got: rows.ncols(),
            });
        }
        for (i, row) in rows.rows().into_iter().enumerate() {
            let sum: f64 = row.sum();
            if !(sum - 1.0).abs().le(&1e-6) || row.iter().any(|&p| !(-1e-9..=1.0 + 1e-9).contains(&p)) {
                return Err(ModelError::NotRowStochastic { row: i, sum });
            }
        }
        Ok(Self { rows })
    }

    /// One-hot posteriorgram from frame labels.
    pub fn from_labels(labels: &[usize]) -> Result<Self, ModelError> {
        let mut rows = Array2::zeros((labels.len(), Self::CLASSES));
        for (i, &l) in labels.iter().enumerate() {
            if l >= Self::CLASSES {
                return Err(ModelError::DimMismatch {
                    what: "label".into(),
                    expected: Self::CLASSES,
                    got: l,
                });
            }
            rows[[i, l]] = 1.0;
        }
        Self::new(rows)
    }

    pub fn rows(&self) -> &Array2<f64> {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.nrows() == 0
    }

    pub fn into_rows(self) -> Array2<f64> {
        self.rows
    }

    /// Per-frame argmax labels.
    pub fn argmax_labels(&self) -> Vec<usize> {
        self.rows
            .rows()
            .into_iter()
            .map(|r| r.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0)
            .collect()
    }
}

/// Stage-level training knobs. One instance per stage invocation; the
/// balancing weights only matter for adversarial training.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainingConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_steps: usize,
    /// Validation cadence in steps.
    pub eval_every: usize,
    pub seed: u64,
    /// Cycle-consistency weight (the first balancing parameter).
    pub lambda_cycle: f64,
    /// Identity-mapping weight (the second balancing parameter).
    pub lambda_identity: f64,
    /// Free-running decode budget: factor times input length...
    pub max_decode_factor: f64,
    /// ...hard-capped here.
    pub max_decode_cap: usize,
    /// Reconstruction/identity decoding runs teacher-forced.
    pub teacher_forcing: bool,
    /// Weight of the auxiliary end-of-sequence BCE term.
    pub eos_weight: f64,
    /// Free-running decode ignores EOS before this many steps (keeps
    /// adversarial fakes long enough for the discriminator).
    pub min_decode_len: usize,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            batch_size: 4,
            max_steps: 1000,
            eval_every: 50,
            seed: 0,
            lambda_cycle: 10.0,
            lambda_identity: 5.0,
            max_decode_factor: 2.5,
            max_decode_cap: 1000,
            teacher_forcing: true,
            eos_weight: 1.0,
            min_decode_len: 1,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        let fail = |m: &str| Err(ModelError::InvalidConfig(m.into()));
        if !(self.learning_rate > 0.0) {
            return fail("learning_rate must be > 0");
        }
        if self.batch_size == 0 || self.max_steps == 0 || self.eval_every == 0 {
            return fail("batch_size, max_steps and eval_every must be >= 1");
        }
        if self.lambda_cycle < 0.0 || self.lambda_identity < 0.0 {
            return fail("balancing parameters must be >= 0");
        }
        if self.max_decode_cap < 1 {
            return fail("max decode length must be >= 1");
        }
        if !(self.max_decode_factor > 0.0) {
            return fail("max_decode_factor must be > 0");
        }
        if self.eos_weight < 0.0 {
            return fail("eos_weight must be >= 0");
        }
        Ok(())
    }

    /// Decode budget for an input of length `t_in`.
    pub fn max_decode_len(&self, t_in: usize) -> usize {
        (((t_in as f64) * self.max_decode_factor).ceil() as usize)
            .clamp(1, self.max_decode_cap)
    }
}

/// One-hot rows for frame labels (training targets).
pub fn one_hot_rows(labels: &[usize], classes: usize) -> Array2<f64> {
    let mut m = Array2::zeros((labels.len(), classes));
    for (i, &l) in labels.iter().enumerate() {
        m[[i, l]] = 1.0;
    }
    m
}
