//! Desk-scale training runs: capacity sanity for each trainable component.

use ndarray::Array2;
use rand::Rng;
use rfvc_core::corpus::{generate_synthetic_corpus, split_dataset, PhonemeInventory, SyntheticSpec};
use rfvc_core::dsp::DspConfig;
use rfvc_core::rng::derive_rng;
use rfvc_core::seqmodels::data::{ppr_examples, ppts_examples};
use rfvc_core::seqmodels::train::{
    mean_frame_baseline_mse, ppr_frame_accuracy, ppts_validation_mse, train_ppr, train_ppts,
    train_uppt_supervised,
};
use rfvc_core::seqmodels::{
    ppr_forward, uppt_transform, Posteriorgram, PprConfig, PprModel, PptsConfig, PptsModel,
    TrainingConfig, UpptConfig,
};

fn small_dsp() -> DspConfig {
    DspConfig {
        fft_size: 256,
        window_size: 200,
        hop_size: 50, // 3.125 ms at 16 kHz
        mel_bands: 40,
        fmax: 8000.0,
        ..DspConfig::default()
    }
}

fn mini_ppr_config(dsp: &DspConfig) -> PprConfig {
    PprConfig {
        mel_bands: dsp.mel_bands,
        conv_widths: vec![1, 2, 3, 4],
        conv_filters: 8,
        hidden: 24,
        recurrent: true,
        ..PprConfig::default()
    }
}

#[test]
fn ppr_zeroed_head_outputs_uniform_rows() {
    let dsp = small_dsp();
    let mut model = PprModel::init(mini_ppr_config(&dsp), 5).unwrap();
    let out_w = model.params.get("out.w").dim();
    *model.params.get_mut("out.w") = Array2::zeros(out_w);
    let mel = rfvc_core::dsp::MelSpectrogram {
        frames: Array2::from_elem((9, dsp.mel_bands), 0.3),
        sample_rate: 16000,
        hop_size: dsp.hop_size,
    };
    let p = ppr_forward(&mel, &model).unwrap();
    for row in p.rows().rows() {
        for &v in row {
            assert!((v - 1.0 / 70.0).abs() < 1e-12);
        }
    }
    // Per-frame cross-entropy against any one-hot target is ln 70.
    let target = rfvc_core::seqmodels::one_hot_rows(&vec![3; 9], 70);
    let xent = rfvc_core::cyclegan::sequence_xent(&target, p.rows()).unwrap();
    assert!((xent - 70f64.ln()).abs() < 1e-6);
    assert!((xent - 4.2485).abs() < 1e-4);
}

#[test]
fn ppr_single_utterance_overfit() {
    let inv = PhonemeInventory::cmu_stress();
    let spec = SyntheticSpec::two_speaker_rhythm(&inv, 0.060, 0.120, 0.15);
    let dir = tempfile::tempdir().unwrap();
    let dsp = small_dsp();
    let (ca, _cb) = generate_synthetic_corpus(&spec, &inv, 1, 31, dir.path()).unwrap();
    let examples = ppr_examples(&ca, &dsp, inv.silence().unwrap()).unwrap();

    let cfg = TrainingConfig {
        learning_rate: 1e-3,
        batch_size: 1,
        max_steps: 400, // well under the 2000-step budget
        eval_every: 100,
        seed: 31,
        ..TrainingConfig::default()
    };
    let result = train_ppr(&mini_ppr_config(&dsp), &cfg, &examples, &examples).unwrap();
    assert!(
        result.best_val < 0.1,
        "overfit cross-entropy {} (log: {:?})",
        result.best_val,
        result.log
    );
}

#[test]
fn ppr_learns_separable_templates() {
    let inv = PhonemeInventory::cmu_stress();
    let spec = SyntheticSpec::two_speaker_rhythm(&inv, 0.060, 0.120, 0.15);
    let dir = tempfile::tempdir().unwrap();
    let dsp = small_dsp();
    let (ca, cb) = generate_synthetic_corpus(&spec, &inv, 30, 32, dir.path()).unwrap();
    let (train_a, val_a, _) = split_dataset(&ca, 32).unwrap();
    let (train_b, val_b, _) = split_dataset(&cb, 32).unwrap();

    let silence = inv.silence().unwrap();
    let mut train = ppr_examples(&train_a, &dsp, silence).unwrap();
    train.extend(ppr_examples(&train_b, &dsp, silence).unwrap());
    let mut val = ppr_examples(&val_a, &dsp, silence).unwrap();
    val.extend(ppr_examples(&val_b, &dsp, silence).unwrap());

    let cfg = TrainingConfig {
        learning_rate: 1e-3,
        batch_size: 4,
        max_steps: 500,
        eval_every: 100,
        seed: 32,
        ..TrainingConfig::default()
    };
    let result = train_ppr(&mini_ppr_config(&dsp), &cfg, &train, &val).unwrap();
    let model = result.checkpoint.to_ppr().unwrap();
    let acc = ppr_frame_accuracy(&model, &val).unwrap();
    assert!(acc >= 0.9, "validation frame accuracy {acc}");
}

#[test]
fn ppts_zero_head_baseline_and_overfit() {
    let inv = PhonemeInventory::cmu_stress();
    let spec = SyntheticSpec::two_speaker_rhythm(&inv, 0.060, 0.120, 0.15);
    let dir = tempfile::tempdir().unwrap();
    let dsp = small_dsp();
    let (ca, _cb) = generate_synthetic_corpus(&spec, &inv, 1, 33, dir.path()).unwrap();

    // Staged recipe: the recognizer is trained first and then acts as a
    // pseudo-labeler. An untrained one emits near-uniform rows that carry
    // no frame information.
    let labeled = ppr_examples(&ca, &dsp, inv.silence().unwrap()).unwrap();
    let ppr_cfg = TrainingConfig {
        learning_rate: 1e-3,
        batch_size: 1,
        max_steps: 300,
        eval_every: 100,
        seed: 33,
        ..TrainingConfig::default()
    };
    let ppr = train_ppr(&mini_ppr_config(&dsp), &ppr_cfg, &labeled, &labeled)
        .unwrap()
        .checkpoint
        .to_ppr()
        .unwrap();
    let examples = ppts_examples(&ca, &dsp, &ppr).unwrap();

    let ppts_cfg = PptsConfig {
        conv_widths: vec![1, 2, 3, 4],
        conv_filters: 8,
        hidden: 32,
        out_dim: dsp.n_bins(),
        recurrent: true,
        ..PptsConfig::default()
    };

    // Zero-initialized output layer predicts zero: MSE = mean of squared
    // targets.
    let mut zeroed = PptsModel::init(ppts_cfg.clone(), 33).unwrap();
    let wdim = zeroed.params.get("out.w").dim();
    *zeroed.params.get_mut("out.w") = Array2::zeros(wdim);
    let mse0 = ppts_validation_mse(&zeroed, &examples).unwrap();
    let mean_sq: f64 = {
        let (mut total, mut n) = (0.0, 0usize);
        for e in &examples {
            total += e.target.iter().map(|v| v * v).sum::<f64>();
            n += e.target.len();
        }
        total / n as f64
    };
    assert!((mse0 - mean_sq).abs() < 1e-9, "{mse0} vs {mean_sq}");

    // Variance baseline: predicting the mean frame.
    let baseline = mean_frame_baseline_mse(&examples, &examples);

    let cfg = TrainingConfig {
        learning_rate: 5e-3,
        batch_size: 1,
        max_steps: 4000,
        eval_every: 100,
        seed: 33,
        ..TrainingConfig::default()
    };
    let result = train_ppts(&ppts_cfg, &cfg, &examples, &examples, "ppts-test").unwrap();
    assert!(
        result.best_val < 0.01 * baseline,
        "overfit MSE {} vs variance baseline {baseline}",
        result.best_val
    );
}

/// Builds one-hot run sequences resembling recognizer output: random
/// phoneme walks with per-phoneme run lengths.
fn run_sequence(len_runs: usize, run_len: std::ops::Range<usize>, seed: u64, tag: u64) -> Posteriorgram {
    let mut rng = derive_rng(seed, &format!("runs-{tag}"));
    let phonemes = [1usize, 9, 17, 25, 33, 41];
    let mut labels = Vec::new();
    let mut prev = usize::MAX;
    for _ in 0..len_runs {
        let mut p = phonemes[rng.gen_range(0..phonemes.len())];
        while p == prev {
            p = phonemes[rng.gen_range(0..phonemes.len())];
        }
        prev = p;
        let n = rng.gen_range(run_len.clone());
        labels.extend(std::iter::repeat(p).take(n));
    }
    Posteriorgram::from_labels(&labels).unwrap()
}

#[test]
fn uppt_identity_task_preserves_length() {
    // Supervised sanity run: trained on (p, p) pairs, the transformer
    // should reproduce input length within +-2 frames on held-out data.
    let pairs: Vec<(Posteriorgram, Posteriorgram)> = (0..32)
        .map(|i| {
            let p = run_sequence(3, 3..7, 71, i);
            (p.clone(), p)
        })
        .collect();

    let cfg = TrainingConfig {
        learning_rate: 2e-3,
        batch_size: 4,
        max_steps: 2500,
        eval_every: 250,
        seed: 71,
        eos_weight: 2.0,
        ..TrainingConfig::default()
    };
    let model_cfg = UpptConfig { hidden: 48, attn_dim: 24, ..UpptConfig::default() };
    let (model, log) = train_uppt_supervised(&model_cfg, &cfg, &pairs).unwrap();

    let mut failures = Vec::new();
    for i in 100..112 {
        let p = run_sequence(3, 3..7, 72, i); // held-out draws
        if p.len() > 40 {
            continue;
        }
        let out = uppt_transform(&p, &model, 2 * p.len() + 10).unwrap();
        let diff = out.posteriorgram.len() as i64 - p.len() as i64;
        if diff.abs() > 2 {
            failures.push((p.len(), out.posteriorgram.len()));
        }
    }
    assert!(
        failures.is_empty(),
        "length mismatches on held-out inputs: {failures:?} (log tail {:?})",
        log.last()
    );
}
