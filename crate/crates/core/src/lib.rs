//! Rhythm-flexible voice conversion over phoneme posteriorgram sequences.
//!
//! The pipeline has three trained components and a deterministic DSP
//! frontend/backend:
//!
//! * [`dsp`] — STFT analysis, mel / log-magnitude features and Griffin-Lim
//!   waveform reconstruction.
//! * [`corpus`] — phoneme inventories, alignments, manifests, dataset splits
//!   and a synthetic two-speaker corpus generator with controlled rhythm.
//! * [`seqmodels`] — the frame-wise recognizer (PPR), the frame-wise
//!   synthesizer (PPTS), the attention seq2seq posteriorgram transformer
//!   (UPPT) and the convolutional sequence discriminator, all built on a
//!   small reverse-mode tape so gradients can be checked numerically.
//! * [`cyclegan`] — adversarial + cycle + identity objectives over
//!   posteriorgram sequences and the alternating minimax training loop.
//! * [`eval`] — speaking-rate measurement and per-phoneme duration
//!   distributions (Gaussian KDE) with distribution distances.
//!
//! Everything is seed-deterministic: one seed fixes corpus generation,
//! splits, parameter initialization, batch order, decoding and Griffin-Lim
//! phase initialization.

pub mod corpus;
pub mod cyclegan;
pub mod dsp;
pub mod eval;
pub mod io;
pub mod rng;
pub mod seqmodels;
