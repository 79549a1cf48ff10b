//! Dev experiment: staged training on the two-rate synthetic corpus, then
//! length-ratio measurement. Not part of the test suite.

use rfvc_core::corpus::{generate_synthetic_corpus, split_dataset, PhonemeInventory, SyntheticSpec};
use rfvc_core::cyclegan::cyclegan_train;
use rfvc_core::dsp::DspConfig;
use rfvc_core::seqmodels::data::{posteriorgram_set, ppr_examples};
use rfvc_core::seqmodels::train::{ppr_frame_accuracy, train_ppr};
use rfvc_core::seqmodels::{
    uppt_transform, DiscriminatorConfig, PprConfig, TrainingConfig, UpptConfig,
};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let arg = |i: usize, default: f64| -> f64 {
        args.get(i).and_then(|s| s.parse().ok()).unwrap_or(default)
    };
    let gan_steps = arg(1, 1000.0) as usize;
    let hidden = arg(2, 48.0) as usize;
    let hop = arg(3, 200.0) as usize;
    let n_utt = arg(4, 200.0) as usize;
    let batch = arg(5, 2.0) as usize;
    let lr = arg(6, 2e-4);
    let lambda_cycle = arg(7, 10.0);
    let lambda_identity = arg(8, 5.0);

    let seed = 2024u64;
    let inv = PhonemeInventory::cmu_stress();
    let spec = SyntheticSpec::two_speaker_rhythm(&inv, 0.060, 0.120, 0.15);
    let dsp = DspConfig { hop_size: hop, ..DspConfig::default() };

    let dir = tempfile::tempdir().unwrap();
    let t0 = std::time::Instant::now();
    let (ca, cb) = generate_synthetic_corpus(&spec, &inv, n_utt, seed, dir.path()).unwrap();
    let (tr_a, va_a, te_a) = split_dataset(&ca, seed).unwrap();
    let (tr_b, va_b, te_b) = split_dataset(&cb, seed).unwrap();
    println!("[{:6.1?}] corpus done", t0.elapsed());

    let silence = inv.silence().unwrap();
    let mut ppr_train = ppr_examples(&tr_a, &dsp, silence).unwrap();
    ppr_train.extend(ppr_examples(&tr_b, &dsp, silence).unwrap());
    let mut ppr_val = ppr_examples(&va_a, &dsp, silence).unwrap();
    ppr_val.extend(ppr_examples(&va_b, &dsp, silence).unwrap());

    let ppr_cfg = PprConfig {
        mel_bands: dsp.mel_bands,
        conv_widths: vec![1, 2, 3, 4],
        conv_filters: 8,
        hidden: 32,
        ..PprConfig::default()
    };
    let tcfg = TrainingConfig {
        learning_rate: 1e-3,
        batch_size: 4,
        max_steps: 600,
        eval_every: 100,
        seed,
        ..TrainingConfig::default()
    };
    let ppr = train_ppr(&ppr_cfg, &tcfg, &ppr_train, &ppr_val).unwrap();
    let model = ppr.checkpoint.to_ppr().unwrap();
    let acc = ppr_frame_accuracy(&model, &ppr_val).unwrap();
    println!("[{:6.1?}] ppr val acc {acc:.4} best_val {:.4}", t0.elapsed(), ppr.best_val);

    let set_x = posteriorgram_set(&tr_a, &dsp, &model).unwrap();
    let set_y = posteriorgram_set(&tr_b, &dsp, &model).unwrap();
    println!(
        "[{:6.1?}] posteriorgrams: x mean len {:.1}, y mean len {:.1}",
        t0.elapsed(),
        set_x.iter().map(|p| p.len()).sum::<usize>() as f64 / set_x.len() as f64,
        set_y.iter().map(|p| p.len()).sum::<usize>() as f64 / set_y.len() as f64
    );

    let uppt_cfg = UpptConfig { hidden, attn_dim: hidden / 2, ..UpptConfig::default() };
    let disc_cfg = DiscriminatorConfig::default();
    let gan_cfg = TrainingConfig {
        learning_rate: lr,
        batch_size: batch,
        max_steps: gan_steps,
        seed,
        lambda_cycle,
        lambda_identity,
        eos_weight: 1.0,
        ..TrainingConfig::default()
    };
    let (bundle, reports) = cyclegan_train(&set_x, &set_y, &uppt_cfg, &disc_cfg, &gan_cfg).unwrap();
    for r in reports.iter().step_by((gan_steps / 20).max(1)) {
        println!("  {}", r.log_line());
    }
    println!("[{:6.1?}] cyclegan done", t0.elapsed());

    // Held-out ratio measurement.
    let eval_cfg = TrainingConfig::default();
    for (name, corpus, gen, expect) in [
        ("x->y", [&va_a, &te_a], &bundle.g_xy, 2.0),
        ("y->x", [&va_b, &te_b], &bundle.g_yx, 0.5),
    ] {
        let mut ratios = Vec::new();
        let mut truncated = 0usize;
        for part in corpus {
            for p in posteriorgram_set(part, &dsp, &model).unwrap() {
                let out = uppt_transform(&p, gen, eval_cfg.max_decode_len(p.len())).unwrap();
                ratios.push(out.posteriorgram.len() as f64 / p.len() as f64);
                truncated += usize::from(out.truncated);
            }
        }
        let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
        let lo = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = ratios.iter().cloned().fold(0.0f64, f64::max);
        println!(
            "{name}: mean ratio {mean:.3} (range {lo:.2}..{hi:.2}, n {}, truncated {truncated}) expect ~{expect}",
            ratios.len()
        );
    }
    println!("[{:6.1?}] total", t0.elapsed());
}
