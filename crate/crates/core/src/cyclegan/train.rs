//! Alternating minimax training: one discriminator ascent step, then one
//! generator descent step per iteration.

use ndarray::Array2;
use rand::Rng;

use super::{adversarial_loss, CycleGanBundle, CycleGanError, LossReport, PROB_FLOOR};
use crate::rng::derive_rng;
use crate::seqmodels::optim::{Adam, GradAccumulator};
use crate::seqmodels::params::{Bindings, ParamSet};
use crate::seqmodels::tape::{sigmoid, Tape, Var};
use crate::seqmodels::uppt::{decode_free_running, decode_teacher_forced};
use crate::seqmodels::{DiscriminatorConfig, Posteriorgram, TrainingConfig, UpptConfig, UpptModel};

/// Trains the two generators and two discriminators on non-parallel
/// posteriorgram sets. Deterministic given the seed in `cfg`; emits one
/// [`LossReport`] per step.
///
/// The generator update uses the non-saturating adversarial form (ascend
/// `ln D(fake)`); the reports carry the literal minimax value.
pub fn cyclegan_train(
    set_x: &[Posteriorgram],
    set_y: &[Posteriorgram],
    uppt_cfg: &UpptConfig,
    disc_cfg: &DiscriminatorConfig,
    cfg: &TrainingConfig,
) -> Result<(CycleGanBundle, Vec<LossReport>), CycleGanError> {
    if set_x.is_empty() {
        return Err(CycleGanError::EmptyDomain("x".into()));
    }
    if set_y.is_empty() {
        return Err(CycleGanError::EmptyDomain("y".into()));
    }
    // Fail before any compute: every real sequence must be scoreable.
    for (domain, set) in [("x", set_x), ("y", set_y)] {
        if let Some(p) = set.iter().find(|p| p.len() < disc_cfg.min_len) {
            return Err(CycleGanError::Model(
                crate::seqmodels::ModelError::SequenceTooShort {
                    len: p.len(),
                    min: disc_cfg.min_len,
                },
            ));
        }
        let _ = domain;
    }

    let mut bundle = CycleGanBundle::init(uppt_cfg, disc_cfg, cfg.clone())?;
    let mut opt_gx = Adam::new(cfg.learning_rate);
    let mut opt_gy = Adam::new(cfg.learning_rate);
    let mut opt_dx = Adam::new(cfg.learning_rate);
    let mut opt_dy = Adam::new(cfg.learning_rate);

    let mut rng = derive_rng(cfg.seed, "cyclegan-batch");
    let min_len = disc_cfg.min_len.max(cfg.min_decode_len);
    let mut reports = Vec::with_capacity(cfg.max_steps);

    for step in 1..=cfg.max_steps {
        let pairs: Vec<(usize, usize)> = (0..cfg.batch_size)
            .map(|_| (rng.gen_range(0..set_x.len()), rng.gen_range(0..set_y.len())))
            .collect();

        // ---- discriminator step (ascend the adversarial value) ----
        let mut fakes_y = Vec::with_capacity(pairs.len());
        let mut fakes_x = Vec::with_capacity(pairs.len());
        for &(ix, iy) in &pairs {
            let p_x = &set_x[ix];
            let p_y = &set_y[iy];
            fakes_y.push(free_run_values(&bundle.g_xy, p_x.rows(), cfg.max_decode_len(p_x.len()), min_len));
            fakes_x.push(free_run_values(&bundle.g_yx, p_y.rows(), cfg.max_decode_len(p_y.len()), min_len));
        }

        let mut tape = Tape::new();
        let binds =
            Bindings::bind_prefixed(&mut tape, &[("dx.", &bundle.d_x.params), ("dy.", &bundle.d_y.params)]);
        let mut d_loss: Option<Var> = None;
        let mut scores = ScoreLog::default();
        for (k, &(ix, iy)) in pairs.iter().enumerate() {
            let real_x = tape.constant(set_x[ix].rows().clone());
            let real_y = tape.constant(set_y[iy].rows().clone());
            let fake_x = tape.constant(fakes_x[k].clone());
            let fake_y = tape.constant(fakes_y[k].clone());

            let l_real_x = bundle.d_x.logit_graph(&mut tape, &binds, "dx.", real_x);
            let l_fake_x = bundle.d_x.logit_graph(&mut tape, &binds, "dx.", fake_x);
            let l_real_y = bundle.d_y.logit_graph(&mut tape, &binds, "dy.", real_y);
            let l_fake_y = bundle.d_y.logit_graph(&mut tape, &binds, "dy.", fake_y);
            scores.push(&tape, l_real_x, l_fake_x, l_real_y, l_fake_y);

            for (logit, target) in
                [(l_real_x, 1.0), (l_fake_x, 0.0), (l_real_y, 1.0), (l_fake_y, 0.0)]
            {
                let term = tape.bce_logit(logit, target);
                d_loss = Some(match d_loss {
                    None => term,
                    Some(acc) => tape.add(acc, term),
                });
            }
        }
        let d_loss = d_loss.expect("batch_size >= 1");
        let d_loss = tape.scale(d_loss, 1.0 / pairs.len() as f64);
        let d_value = tape.scalar(d_loss);
        if !d_value.is_finite() {
            return Err(CycleGanError::Diverged { step, component: "discriminator loss".into() });
        }
        let grads = tape.backward(d_loss);
        step_model(&mut opt_dx, &mut bundle.d_x.params, "dx.", &binds, &grads);
        step_model(&mut opt_dy, &mut bundle.d_y.params, "dy.", &binds, &grads);

        // ---- generator step (descend the full objective) ----
        let mut tape = Tape::new();
        let mut binds = Bindings::bind_prefixed(
            &mut tape,
            &[("gxy.", &bundle.g_xy.params), ("gyx.", &bundle.g_yx.params)],
        );
        binds.bind_frozen_prefixed(
            &mut tape,
            &[("dx.", &bundle.d_x.params), ("dy.", &bundle.d_y.params)],
        );

        let mut g_total: Option<Var> = None;
        let mut cycle_sum = 0.0;
        let mut identity_sum = 0.0;
        for &(ix, iy) in &pairs {
            let p_x = set_x[ix].rows();
            let p_y = set_y[iy].rows();
            let (term, cycle_v, ident_v) = generator_pair_loss(
                &mut tape, &binds, &bundle, p_x, p_y, cfg, min_len,
            );
            cycle_sum += cycle_v;
            identity_sum += ident_v;
            g_total = Some(match g_total {
                None => term,
                Some(acc) => tape.add(acc, term),
            });
        }
        let g_total = g_total.expect("batch_size >= 1");
        let g_total = tape.scale(g_total, 1.0 / pairs.len() as f64);
        let g_value = tape.scalar(g_total);
        if !g_value.is_finite() {
            return Err(CycleGanError::Diverged { step, component: "generator loss".into() });
        }
        let grads = tape.backward(g_total);
        step_model(&mut opt_gx, &mut bundle.g_xy.params, "gxy.", &binds, &grads);
        step_model(&mut opt_gy, &mut bundle.g_yx.params, "gyx.", &binds, &grads);

        // ---- report (literal minimax values from the pre-update D) ----
        let adv_xy = adversarial_loss(&scores.real_y, &scores.fake_y)?;
        let adv_yx = adversarial_loss(&scores.real_x, &scores.fake_x)?;
        let report = LossReport::assemble(
            step,
            adv_xy,
            adv_yx,
            cycle_sum / pairs.len() as f64,
            identity_sum / pairs.len() as f64,
            cfg.lambda_cycle,
            cfg.lambda_identity,
        );
        if !report.total.is_finite() {
            return Err(CycleGanError::Diverged { step, component: "reported total".into() });
        }
        reports.push(report);
    }

    Ok((bundle, reports))
}

/// Builds one pair's generator objective on the shared tape. Returns the
/// loss node plus the plain cycle and identity values (per Eq. 2/3, without
/// the auxiliary EOS term) for reporting.
#[allow(clippy::too_many_arguments)]
fn generator_pair_loss(
    tape: &mut Tape,
    binds: &Bindings,
    bundle: &CycleGanBundle,
    p_x: &Array2<f64>,
    p_y: &Array2<f64>,
    cfg: &TrainingConfig,
    min_len: usize,
) -> (Var, f64, f64) {
    let x_in = tape.constant(p_x.clone());
    let y_in = tape.constant(p_y.clone());

    // Forward transforms, free-running and differentiable.
    let fwd_y = decode_free_running(
        &bundle.g_xy, tape, binds, "gxy.", x_in, cfg.max_decode_len(p_x.nrows()), min_len,
    );
    let fake_y = fwd_y.stack_rows(tape);
    let fwd_x = decode_free_running(
        &bundle.g_yx, tape, binds, "gyx.", y_in, cfg.max_decode_len(p_y.nrows()), min_len,
    );
    let fake_x = fwd_x.stack_rows(tape);

    // Non-saturating adversarial terms through the frozen discriminators.
    let logit_y = bundle.d_y.logit_graph(tape, binds, "dy.", fake_y);
    let adv_y = tape.bce_logit(logit_y, 1.0);
    let logit_x = bundle.d_x.logit_graph(tape, binds, "dx.", fake_x);
    let adv_x = tape.bce_logit(logit_x, 1.0);

    // Cycle reconstructions, teacher-forced on the originals.
    let back_x = decode_teacher_forced(&bundle.g_yx, tape, binds, "gyx.", fake_y, p_x);
    let back_x_rows = back_x.stack_rows(tape);
    let cycle_x = tape.xent_rows(back_x_rows, p_x.clone(), PROB_FLOOR);
    let back_y = decode_teacher_forced(&bundle.g_xy, tape, binds, "gxy.", fake_x, p_y);
    let back_y_rows = back_y.stack_rows(tape);
    let cycle_y = tape.xent_rows(back_y_rows, p_y.clone(), PROB_FLOOR);

    // Identity mappings.
    let id_x = decode_teacher_forced(&bundle.g_yx, tape, binds, "gyx.", x_in, p_x);
    let id_x_rows = id_x.stack_rows(tape);
    let ident_x = tape.xent_rows(id_x_rows, p_x.clone(), PROB_FLOOR);
    let id_y = decode_teacher_forced(&bundle.g_xy, tape, binds, "gxy.", y_in, p_y);
    let id_y_rows = id_y.stack_rows(tape);
    let ident_y = tape.xent_rows(id_y_rows, p_y.clone(), PROB_FLOOR);

    // EOS supervision wherever teacher forcing fixes the end position.
    let mut eos_terms: Option<Var> = None;
    for graph in [&back_x, &back_y, &id_x, &id_y] {
        let last = graph.eos_logits.len() - 1;
        for (t, &logit) in graph.eos_logits.iter().enumerate() {
            let bce = tape.bce_logit(logit, if t == last { 1.0 } else { 0.0 });
            let scaled = tape.scale(bce, 1.0 / graph.eos_logits.len() as f64);
            eos_terms = Some(match eos_terms {
                None => scaled,
                Some(acc) => tape.add(acc, scaled),
            });
        }
    }

    let cycle_v = tape.scalar(cycle_x) + tape.scalar(cycle_y);
    let ident_v = tape.scalar(ident_x) + tape.scalar(ident_y);

    let mut total = tape.add(adv_y, adv_x);
    let cycle_term = tape.add(cycle_x, cycle_y);
    let cycle_term = tape.scale(cycle_term, cfg.lambda_cycle);
    total = tape.add(total, cycle_term);
    let ident_term = tape.add(ident_x, ident_y);
    let ident_term = tape.scale(ident_term, cfg.lambda_identity);
    total = tape.add(total, ident_term);
    if let Some(eos) = eos_terms {
        let eos_term = tape.scale(eos, cfg.eos_weight);
        total = tape.add(total, eos_term);
    }
    (total, cycle_v, ident_v)
}

fn free_run_values(
    model: &UpptModel,
    input: &Array2<f64>,
    max_len: usize,
    min_len: usize,
) -> Array2<f64> {
    let mut tape = Tape::new();
    let binds = Bindings::bind_frozen(&mut tape, &model.params);
    let x = tape.constant(input.clone());
    let graph = decode_free_running(model, &mut tape, &binds, "", x, max_len, min_len);
    let stacked = graph.stack_rows(&mut tape);
    tape.value(stacked).clone()
}

fn step_model(
    opt: &mut Adam,
    params: &mut ParamSet,
    prefix: &str,
    binds: &Bindings,
    grads: &crate::seqmodels::tape::Grads,
) {
    let mut acc = GradAccumulator::new();
    let names: Vec<String> = params.names().map(str::to_string).collect();
    for name in &names {
        if let Some(g) = grads.get(binds.var(&format!("{prefix}{name}"))) {
            acc.add(name, g);
        }
    }
    opt.step(params, acc.map());
}

/// Clamped literal scores logged during the discriminator step.
#[derive(Default)]
struct ScoreLog {
    real_x: Vec<f64>,
    fake_x: Vec<f64>,
    real_y: Vec<f64>,
    fake_y: Vec<f64>,
}

impl ScoreLog {
    fn push(&mut self, tape: &Tape, l_real_x: Var, l_fake_x: Var, l_real_y: Var, l_fake_y: Var) {
        let clamp = |v: Var| sigmoid(tape.scalar(v)).clamp(1e-7, 1.0 - 1e-7);
        self.real_x.push(clamp(l_real_x));
        self.fake_x.push(clamp(l_fake_x));
        self.real_y.push(clamp(l_real_y));
        self.fake_y.push(clamp(l_fake_y));
    }
}
