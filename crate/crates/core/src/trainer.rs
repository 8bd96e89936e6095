//! Two-phase training. Every step: one discriminator update (image realism,
//! transition realism, triplet matching), then one generator-side update —
//! phase A trains G and E jointly on the full objective, phase B trains G
//! alone on the transition prediction terms with E's parameters frozen.

use crate::checkpoint::Archive;
use crate::error::{Error, Result};
use crate::losses::{self, AdvSide, LossReport};
use crate::networks::{BoundParams, NetworkSpecs, Networks, ParamStore};
use crate::rng::{Rng, RngState};
use crate::scalar::{dbl, fl, Scalar};
use crate::tasks::{Dataset, TaskAdapter};
use crate::tensor::{Tape, Var};
use crate::types::{ImageBatch, Phase, TrainConfig, Transition, TransitionPosterior, Triplet};
use ndarray::{Array2, ArrayD, Axis, Ix2, Ix4, IxDyn};
use std::io::Write as _;
use std::path::{Path, PathBuf};

/// Everything the generator and encoder produce from one triplet.
#[derive(Debug, Clone)]
pub struct DerivedOutputs<F: Scalar> {
    pub y_hat: ImageBatch<F>,
    pub x_self: ImageBatch<F>,
    pub x_cycle: ImageBatch<F>,
    pub y_tilde: ImageBatch<F>,
    pub y_prime: ImageBatch<F>,
    pub y_hat_that: ImageBatch<F>,
    pub t_hat_y: Transition<F>,
    pub t_hat_yhat: Transition<F>,
    pub t_hat_ytilde: Transition<F>,
    pub t_hat_yprime: Transition<F>,
    pub t_hat_xx: Transition<F>,
    pub t_tilde: Transition<F>,
    pub t_prime: Transition<F>,
    pub posterior_xy: TransitionPosterior<F>,
}

/// Adam with per-tensor moments; tensors that received no gradient in a step
/// are skipped (their moments and bias-correction counters do not advance).
pub struct Adam<F: Scalar> {
    pub lr: F,
    pub beta1: F,
    pub beta2: F,
    pub eps: F,
    m: Vec<ArrayD<F>>,
    v: Vec<ArrayD<F>>,
    t: Vec<u64>,
}

impl<F: Scalar> Adam<F> {
    pub fn new(cfg: &TrainConfig, store: &ParamStore<F>) -> Self {
        Adam {
            lr: fl(cfg.lr),
            beta1: fl(cfg.beta1),
            beta2: fl(cfg.beta2),
            eps: fl(1e-8),
            m: store
                .entries()
                .iter()
                .map(|(_, t)| ArrayD::zeros(IxDyn(t.shape())))
                .collect(),
            v: store
                .entries()
                .iter()
                .map(|(_, t)| ArrayD::zeros(IxDyn(t.shape())))
                .collect(),
            t: vec![0; store.len()],
        }
    }

    pub fn step(
        &mut self,
        store: &mut ParamStore<F>,
        bound: &BoundParams,
        grads: &crate::tensor::Gradients<F>,
    ) {
        let one = F::one();
        let (lr, b1, b2, eps) = (self.lr, self.beta1, self.beta2, self.eps);
        for i in 0..store.len() {
            let Some(g) = grads.get(bound.vars()[i]) else {
                continue;
            };
            self.t[i] += 1;
            let t = self.t[i] as i32;
            let bc1 = one - b1.powi(t);
            let bc2 = one - b2.powi(t);
            let m = &mut self.m[i];
            let v = &mut self.v[i];
            let p = store.get_mut(i);
            ndarray::Zip::from(p).and(m).and(v).and(g).for_each(|p, m, v, &g| {
                *m = b1 * *m + (one - b1) * g;
                *v = b2 * *v + (one - b2) * g * g;
                let mhat = *m / bc1;
                let vhat = *v / bc2;
                *p = *p - lr * mhat / (vhat.sqrt() + eps);
            });
        }
    }
}

/// Full mutable training state; checkpoints restore it bit-identically.
pub struct TrainState<F: Scalar> {
    pub step: u64,
    /// Phase the next step will run.
    pub phase: Phase,
    pub nets: Networks<F>,
    pub opt_g: Adam<F>,
    pub opt_e: Adam<F>,
    pub opt_d: Adam<F>,
    pub opt_dt: Adam<F>,
    pub rng: Rng,
}

impl<F: Scalar> TrainState<F> {
    pub fn init(specs: &NetworkSpecs, cfg: &TrainConfig) -> Result<Self> {
        cfg.validate()?;
        let nets = Networks::init(specs, cfg.seed)?;
        Ok(TrainState {
            step: 0,
            phase: cfg.phase(0),
            opt_g: Adam::new(cfg, &nets.generator.params),
            opt_e: Adam::new(cfg, &nets.encoder.params),
            opt_d: Adam::new(cfg, &nets.disc.params),
            opt_dt: Adam::new(cfg, &nets.disc_t.params),
            nets,
            rng: Rng::seeded(cfg.seed, 0x7EA1),
        })
    }
}

struct Leaves {
    x: Var,
    y: Var,
    t: Var,
    neg_t: Var,
    zero_t: Var,
    eps: Var,
    t_prime: Var,
}

struct Fwd {
    y_hat: Var,
    x_self: Var,
    x_cycle: Var,
    y_hat_that: Var,
    y_tilde: Var,
    y_prime: Var,
    mean_xy: Var,
    logvar_xy: Var,
    t_tilde: Var,
    t_hat_yhat: Var,
    mean_xx: Var,
    t_hat_ytilde: Var,
    t_hat_yprime: Var,
}

fn make_leaves<F: Scalar>(
    tape: &Tape<F>,
    triplet: &Triplet<F>,
    adapter: &TaskAdapter,
    rng: &mut Rng,
    d_t: usize,
) -> Leaves {
    let n = triplet.x.batch();
    Leaves {
        x: tape.var(triplet.x.to_dyn()),
        y: tape.var(triplet.y.to_dyn()),
        t: tape.var(triplet.t.to_dyn()),
        neg_t: tape.var(adapter.negate(&triplet.t).to_dyn()),
        zero_t: tape.var(ArrayD::zeros(IxDyn(&[n, d_t]))),
        eps: tape.var(rng.normal_array::<F>(&[n, d_t])),
        t_prime: tape.var(rng.normal_array::<F>(&[n, d_t])),
    }
}

fn build_forward<F: Scalar>(
    tape: &Tape<F>,
    nets: &Networks<F>,
    gb: &BoundParams,
    eb: &BoundParams,
    leaves: &Leaves,
) -> Fwd {
    let g = &nets.generator;
    let e = &nets.encoder;
    let n = tape.shape(leaves.x)[0];
    let (mean_xy, logvar_xy) = e.fwd(tape, eb, leaves.x, leaves.y);
    // reparameterized draw from the posterior
    let half_lv = tape.scale(logvar_xy, fl(0.5));
    let std = tape.exp(half_lv);
    let noise = tape.mul(std, leaves.eps);
    let t_tilde = tape.add(mean_xy, noise);

    // the five x-conditioned generations share one batched pass
    let g_in_x = tape.concat_rows(&[leaves.x, leaves.x, leaves.x, leaves.x, leaves.x]);
    let g_in_t = tape.concat_rows(&[
        leaves.t,
        leaves.zero_t,
        mean_xy,
        t_tilde,
        leaves.t_prime,
    ]);
    let g_out = g.fwd(tape, gb, g_in_x, g_in_t);
    let y_hat = tape.slice_rows(g_out, 0, n);
    let x_self = tape.slice_rows(g_out, n, 2 * n);
    let y_hat_that = tape.slice_rows(g_out, 2 * n, 3 * n);
    let y_tilde = tape.slice_rows(g_out, 3 * n, 4 * n);
    let y_prime = tape.slice_rows(g_out, 4 * n, 5 * n);
    let x_cycle = g.fwd(tape, gb, y_hat, leaves.neg_t);

    // all encoder reads of generated images share one batched pass
    let e_in_x = tape.concat_rows(&[leaves.x, leaves.x, leaves.x, leaves.x]);
    let e_in_y = tape.concat_rows(&[y_hat, leaves.x, y_tilde, y_prime]);
    let (means2, _) = e.fwd(tape, eb, e_in_x, e_in_y);
    let t_hat_yhat = tape.slice_rows(means2, 0, n);
    let mean_xx = tape.slice_rows(means2, n, 2 * n);
    let t_hat_ytilde = tape.slice_rows(means2, 2 * n, 3 * n);
    let t_hat_yprime = tape.slice_rows(means2, 3 * n, 4 * n);

    Fwd {
        y_hat,
        x_self,
        x_cycle,
        y_hat_that,
        y_tilde,
        y_prime,
        mean_xy,
        logvar_xy,
        t_tilde,
        t_hat_yhat,
        mean_xx,
        t_hat_ytilde,
        t_hat_yprime,
    }
}

/// All generator/encoder products of one triplet, with the unseen-transition
/// draws taken from `rng`. Deterministic given the RNG state.
pub fn forward_pass<F: Scalar>(
    nets: &Networks<F>,
    triplet: &Triplet<F>,
    adapter: &TaskAdapter,
    rng: &mut Rng,
) -> Result<DerivedOutputs<F>> {
    let d_t = nets.specs.generator.d_t;
    if triplet.t.width() != d_t {
        return Err(Error::Dimension(format!(
            "triplet transition width {} vs networks d_t {}",
            triplet.t.width(),
            d_t
        )));
    }
    nets.generator.check_input(&triplet.x, d_t)?;
    let tape = Tape::new();
    let gb = nets.generator.params.bind(&tape);
    let eb = nets.encoder.params.bind(&tape);
    let leaves = make_leaves(&tape, triplet, adapter, rng, d_t);
    let fwd = build_forward(&tape, nets, &gb, &eb, &leaves);

    let img = |v| -> Result<ImageBatch<F>> {
        ImageBatch::new(
            tape.value(v)
                .to_owned()
                .into_dimensionality::<Ix4>()
                .expect("image rank"),
        )
    };
    let trans = |v| -> Result<Transition<F>> {
        Transition::new(
            tape.value(v)
                .to_owned()
                .into_dimensionality::<Ix2>()
                .expect("transition rank"),
        )
    };
    let posterior_xy = TransitionPosterior::new(
        tape.value(fwd.mean_xy)
            .to_owned()
            .into_dimensionality::<Ix2>()
            .unwrap(),
        tape.value(fwd.logvar_xy)
            .to_owned()
            .into_dimensionality::<Ix2>()
            .unwrap(),
    )?;
    Ok(DerivedOutputs {
        y_hat: img(fwd.y_hat)?,
        x_self: img(fwd.x_self)?,
        x_cycle: img(fwd.x_cycle)?,
        y_tilde: img(fwd.y_tilde)?,
        y_prime: img(fwd.y_prime)?,
        y_hat_that: img(fwd.y_hat_that)?,
        t_hat_y: trans(fwd.mean_xy)?,
        t_hat_yhat: trans(fwd.t_hat_yhat)?,
        t_hat_ytilde: trans(fwd.t_hat_ytilde)?,
        t_hat_yprime: trans(fwd.t_hat_yprime)?,
        t_hat_xx: trans(fwd.mean_xx)?,
        t_tilde: trans(fwd.t_tilde)?,
        t_prime: trans(leaves.t_prime)?,
        posterior_xy,
    })
}

fn permute_rows<F: Scalar>(a: &ArrayD<F>, perm: &[usize]) -> ArrayD<F> {
    let mut out = ArrayD::zeros(IxDyn(a.shape()));
    for (dst, &src) in perm.iter().enumerate() {
        out.index_axis_mut(Axis(0), dst)
            .assign(&a.index_axis(Axis(0), src));
    }
    out
}

/// One optimization step on one triplet. Returns the full loss report.
pub fn train_step<F: Scalar>(
    state: &mut TrainState<F>,
    triplet: &Triplet<F>,
    cfg: &TrainConfig,
    adapter: &TaskAdapter,
) -> Result<LossReport> {
    let d_t = state.nets.specs.generator.d_t;
    if cfg.d_t != d_t {
        return Err(Error::Config(format!(
            "config d_t {} vs networks d_t {}",
            cfg.d_t, d_t
        )));
    }
    let n = triplet.x.batch();
    if cfg.lambda3 > 0.0 && n < 2 {
        return Err(Error::Config(
            "triplet matching needs batch >= 2 for wrong triplets".into(),
        ));
    }
    let phase = cfg.phase(state.step);
    let form = cfg.adversarial_form;

    let tape = Tape::new();
    let gb = state.nets.generator.params.bind(&tape);
    let eb = state.nets.encoder.params.bind(&tape);
    let leaves = make_leaves(&tape, triplet, adapter, &mut state.rng, d_t);
    // wrong-triplet derangements are drawn every step to keep the noise
    // stream aligned across ablation variants
    let perm_t = state.rng.derangement(n.max(2));
    let perm_y = state.rng.derangement(n.max(2));
    let fwd = build_forward(&tape, &state.nets, &gb, &eb, &leaves);

    // ---- discriminator update ----
    let db = state.nets.disc.params.bind(&tape);
    let dtb = state.nets.disc_t.params.bind(&tape);

    let y_hat_d = tape.detach(fwd.y_hat);
    let y_tilde_d = tape.detach(fwd.y_tilde);
    let y_prime_d = tape.detach(fwd.y_prime);
    let y_hat_that_d = tape.detach(fwd.y_hat_that);
    let mean_xy_d = tape.detach(fwd.mean_xy);
    let t_tilde_d = tape.detach(fwd.t_tilde);

    let dreal_in = tape.concat_rows(&[leaves.y, y_hat_d, y_tilde_d, y_prime_d]);
    let dreal_s = state.nets.disc.fwd_real(&tape, &db, dreal_in);
    let s_real_y = tape.slice_rows(dreal_s, 0, n);
    let s_fake_yhat = tape.slice_rows(dreal_s, n, 2 * n);
    let s_fake_ytilde = tape.slice_rows(dreal_s, 2 * n, 3 * n);
    let s_fake_yprime = tape.slice_rows(dreal_s, 3 * n, 4 * n);
    let real_img_d = losses::l_adv_real(&tape, s_real_y, s_fake_yhat, AdvSide::Disc, form)?;
    let real_newimg_d = losses::l_adv_newimg(
        &tape,
        s_real_y,
        s_fake_ytilde,
        s_fake_yprime,
        AdvSide::Disc,
        form,
    )?;

    let dt_in = tape.concat_rows(&[leaves.t, leaves.t_prime, t_tilde_d]);
    let dt_s = state.nets.disc_t.fwd(&tape, &dtb, dt_in);
    let s_t = tape.slice_rows(dt_s, 0, n);
    let s_t_prime = tape.slice_rows(dt_s, n, 2 * n);
    let s_t_tilde_d = tape.slice_rows(dt_s, 2 * n, 3 * n);
    let real_newtrans_d =
        losses::l_adv_newtrans(&tape, s_t, s_t_prime, s_t_tilde_d, AdvSide::Disc, form)?;

    let match_d = if cfg.lambda3 > 0.0 {
        let t_wrong = tape.var(permute_rows(&tape.value(leaves.t).to_owned(), &perm_t));
        let y_wrong = tape.var(permute_rows(&tape.value(leaves.y).to_owned(), &perm_y));
        let d = &state.nets.disc;
        // real; fakes (x,t,ŷ), (x,t̂_y,ŷ_t̂), (x,t̃,ỹ); wrongs (x,t×,y), (x,t,y×)
        let dm_x = tape.concat_rows(&[leaves.x, leaves.x, leaves.x, leaves.x, leaves.x, leaves.x]);
        let dm_t = tape.concat_rows(&[leaves.t, leaves.t, mean_xy_d, t_tilde_d, t_wrong, leaves.t]);
        let dm_y = tape.concat_rows(&[leaves.y, y_hat_d, y_hat_that_d, y_tilde_d, leaves.y, y_wrong]);
        let dm_s = d.fwd_match(&tape, &db, dm_x, dm_t, dm_y);
        let s_r = tape.slice_rows(dm_s, 0, n);
        let s_f1 = tape.slice_rows(dm_s, n, 2 * n);
        let s_f2 = tape.slice_rows(dm_s, 2 * n, 3 * n);
        let s_f3 = tape.slice_rows(dm_s, 3 * n, 4 * n);
        let s_w1 = tape.slice_rows(dm_s, 4 * n, 5 * n);
        let s_w2 = tape.slice_rows(dm_s, 5 * n, 6 * n);
        let (l_d, _literal_g) =
            losses::triplet_matching_loss(&tape, s_r, s_f1, s_f2, s_f3, s_w1, s_w2)?;
        Some(l_d)
    } else {
        None
    };

    let mut total_d = tape.add(real_img_d, real_newtrans_d);
    total_d = tape.add(total_d, real_newimg_d);
    if let Some(md) = match_d {
        let weighted = tape.scale(md, fl(cfg.lambda3));
        total_d = tape.add(total_d, weighted);
    }
    let grads_d = tape.backward(total_d);
    state.opt_d.step(&mut state.nets.disc.params, &db, &grads_d);
    state
        .opt_dt
        .step(&mut state.nets.disc_t.params, &dtb, &grads_d);

    // ---- generator/encoder update, against the updated discriminators ----
    let db2 = state.nets.disc.params.bind(&tape);
    let dtb2 = state.nets.disc_t.params.bind(&tape);

    let dreal2_in = tape.concat_rows(&[fwd.y_hat, fwd.y_tilde, fwd.y_prime]);
    let dreal2_s = state.nets.disc.fwd_real(&tape, &db2, dreal2_in);
    let sg_yhat = tape.slice_rows(dreal2_s, 0, n);
    let sg_ytilde = tape.slice_rows(dreal2_s, n, 2 * n);
    let sg_yprime = tape.slice_rows(dreal2_s, 2 * n, 3 * n);
    let sg_t_tilde = state.nets.disc_t.fwd(&tape, &dtb2, fwd.t_tilde);

    let real_img_g = losses::l_adv_real(&tape, s_real_y, sg_yhat, AdvSide::Gen, form)?;
    let real_newimg_g = losses::l_adv_newimg(
        &tape,
        s_real_y,
        sg_ytilde,
        sg_yprime,
        AdvSide::Gen,
        form,
    )?;
    let real_newtrans_e =
        losses::l_adv_newtrans(&tape, s_t, s_t_prime, sg_t_tilde, AdvSide::Gen, form)?;

    let recons_img_self = losses::l_recons_self(&tape, leaves.x, fwd.x_self)?;
    let recons_img_cyc = losses::l_recons_cycle(&tape, leaves.x, fwd.x_cycle)?;
    let recons_img_out = if triplet.paired && cfg.gamma > 0.0 {
        Some(losses::l_recons_out(&tape, leaves.y, fwd.y_hat)?)
    } else {
        None
    };

    let recons_trans =
        losses::l_recons_trans(&tape, leaves.t, fwd.mean_xy, fwd.t_hat_yhat, fwd.mean_xx)?;
    // the observed-transition prediction term that also trains G (phase B)
    let trans_term_g = {
        let d = tape.sub(fwd.t_hat_yhat, leaves.t);
        let a = tape.abs(d);
        tape.mean_all(a)
    };
    let recons_newtrans = losses::l_recons_newtrans(
        &tape,
        leaves.t_prime,
        fwd.t_hat_yprime,
        fwd.t_tilde,
        fwd.t_hat_ytilde,
    )?;

    let match_g = if cfg.lambda3 > 0.0 {
        let d = &state.nets.disc;
        let dm2_x = tape.concat_rows(&[leaves.x, leaves.x, leaves.x]);
        let dm2_t = tape.concat_rows(&[leaves.t, fwd.mean_xy, fwd.t_tilde]);
        let dm2_y = tape.concat_rows(&[fwd.y_hat, fwd.y_hat_that, fwd.y_tilde]);
        let dm2_s = d.fwd_match(&tape, &db2, dm2_x, dm2_t, dm2_y);
        let sm_f1 = tape.slice_rows(dm2_s, 0, n);
        let sm_f2 = tape.slice_rows(dm2_s, n, 2 * n);
        let sm_f3 = tape.slice_rows(dm2_s, 2 * n, 3 * n);
        Some(losses::matching_generator_loss(&tape, sm_f1, sm_f2, sm_f3)?)
    } else {
        None
    };

    // phase A root: the full generator-side objective
    let root_a = {
        let mut root = real_img_g;
        let mut recon = tape.add(recons_img_self, recons_img_cyc);
        if let Some(out) = recons_img_out {
            let w = tape.scale(out, fl(cfg.gamma));
            recon = tape.add(recon, w);
        }
        let recon_w = tape.scale(recon, fl(cfg.lambda));
        root = tape.add(root, recon_w);
        if cfg.lambda1 > 0.0 {
            let w = tape.scale(recons_trans, fl(cfg.lambda1));
            root = tape.add(root, w);
        }
        if cfg.lambda2 > 0.0 {
            let w = tape.scale(recons_newtrans, fl(cfg.lambda2));
            root = tape.add(root, w);
        }
        root = tape.add(root, real_newtrans_e);
        root = tape.add(root, real_newimg_g);
        if let Some(mg) = match_g {
            let w = tape.scale(mg, fl(cfg.lambda3));
            root = tape.add(root, w);
        }
        root
    };

    match phase {
        Phase::A => {
            let grads = tape.backward(root_a);
            state
                .opt_g
                .step(&mut state.nets.generator.params, &gb, &grads);
            state
                .opt_e
                .step(&mut state.nets.encoder.params, &eb, &grads);
        }
        Phase::B => {
            if cfg.lambda1 > 0.0 || cfg.lambda2 > 0.0 {
                let mut root_b: Option<Var> = None;
                if cfg.lambda1 > 0.0 {
                    root_b = Some(tape.scale(trans_term_g, fl(cfg.lambda1)));
                }
                if cfg.lambda2 > 0.0 {
                    let w = tape.scale(recons_newtrans, fl(cfg.lambda2));
                    root_b = Some(match root_b {
                        Some(r) => tape.add(r, w),
                        None => w,
                    });
                }
                let grads = tape.backward(root_b.expect("phase B root"));
                state
                    .opt_g
                    .step(&mut state.nets.generator.params, &gb, &grads);
            }
        }
    }

    let sc = |v: Var| dbl(tape.scalar(v));
    let report = LossReport {
        recons_img_self: sc(recons_img_self),
        recons_img_cyc: sc(recons_img_cyc),
        recons_img_out: recons_img_out.map(&sc).unwrap_or(0.0),
        real_img_g: sc(real_img_g),
        real_img_d: sc(real_img_d),
        recons_trans: sc(recons_trans),
        real_newtrans_e: sc(real_newtrans_e),
        real_newtrans_d: sc(real_newtrans_d),
        recons_newtrans: sc(recons_newtrans),
        real_newimg_g: sc(real_newimg_g),
        real_newimg_d: sc(real_newimg_d),
        match_g: match_g.map(&sc).unwrap_or(0.0),
        match_d: match_d.map(&sc).unwrap_or(0.0),
        total_g: 0.0,
        total_e: 0.0,
        total_d: 0.0,
    }
    .with_totals(cfg);
    if let Some(term) = report.non_finite_term() {
        return Err(Error::NonFinite {
            term: term.into(),
            step: state.step,
        });
    }

    state.step += 1;
    state.phase = cfg.phase(state.step);
    Ok(report)
}

/// One metrics row.
#[derive(Debug, Clone, Copy)]
pub struct StepRecord {
    pub step: u64,
    pub phase: Phase,
    pub report: LossReport,
}

pub const METRICS_HEADER: &str = "step,phase,recons_img_self,recons_img_cyc,recons_img_out,real_img_g,real_img_d,recons_trans,real_newtrans_e,real_newtrans_d,recons_newtrans,real_newimg_g,real_newimg_d,match_g,match_d,total_g,total_e,total_d";

impl StepRecord {
    pub fn to_csv_row(&self) -> String {
        format!("{},{},{}", self.step, self.phase, self.report.to_csv_row())
    }
}

/// Output plumbing for [`fit`].
#[derive(Default)]
pub struct FitOptions {
    pub metrics_path: Option<PathBuf>,
    pub checkpoint_dir: Option<PathBuf>,
    /// Steps between checkpoints; 0 disables periodic checkpoints (a final
    /// one is still written when `checkpoint_dir` is set).
    pub checkpoint_every: usize,
    pub sample_dir: Option<PathBuf>,
    pub sample_every: usize,
    /// Print a progress line every this many steps (0 = quiet).
    pub log_every: usize,
}

/// Train from a fresh state for `cfg.total_steps` steps.
pub fn fit<F: Scalar>(
    dataset: &Dataset<F>,
    cfg: &TrainConfig,
    specs: &NetworkSpecs,
    opts: &FitOptions,
) -> Result<(TrainState<F>, Vec<StepRecord>)> {
    let state = TrainState::init(specs, cfg)?;
    fit_from(state, dataset, cfg, opts, cfg.total_steps)
}

/// Continue training an existing state for `steps` further steps.
pub fn fit_from<F: Scalar>(
    mut state: TrainState<F>,
    dataset: &Dataset<F>,
    cfg: &TrainConfig,
    opts: &FitOptions,
    steps: usize,
) -> Result<(TrainState<F>, Vec<StepRecord>)> {
    cfg.validate()?;
    if dataset.is_empty() {
        return Err(Error::Dataset("cannot train on an empty dataset".into()));
    }
    let mut metrics_file = match &opts.metrics_path {
        Some(p) => {
            if let Some(dir) = p.parent() {
                std::fs::create_dir_all(dir)?;
            }
            let f = std::fs::OpenOptions::new().create(true).append(true).open(p)?;
            let mut f = std::io::BufWriter::new(f);
            if f.get_ref().metadata()?.len() == 0 {
                writeln!(f, "{METRICS_HEADER}")?;
            }
            Some(f)
        }
        None => None,
    };
    let mut records = Vec::with_capacity(steps);
    let started = std::time::Instant::now();
    for _ in 0..steps {
        let idxs = sample_batch_indices(&mut state.rng, dataset.len(), cfg.batch_size);
        let triplet = dataset.make_batch(&idxs)?;
        let step = state.step;
        let phase = cfg.phase(step);
        let report = train_step(&mut state, &triplet, cfg, &dataset.adapter)?;
        let rec = StepRecord { step, phase, report };
        if let Some(f) = metrics_file.as_mut() {
            writeln!(f, "{}", rec.to_csv_row())?;
        }
        records.push(rec);
        if opts.log_every > 0 && state.step % opts.log_every as u64 == 0 {
            eprintln!(
                "step {:>7}  phase {}  total_g {:9.4}  total_d {:9.4}  ({:.2} steps/s)",
                state.step,
                phase,
                report.total_g,
                report.total_d,
                records.len() as f64 / started.elapsed().as_secs_f64()
            );
        }
        if let Some(dir) = &opts.checkpoint_dir {
            if opts.checkpoint_every > 0 && state.step % opts.checkpoint_every as u64 == 0 {
                save_state(&state, cfg, &dir.join(format!("step_{:07}.ckpt", state.step)))?;
            }
        }
        if let Some(dir) = &opts.sample_dir {
            if opts.sample_every > 0 && state.step % opts.sample_every as u64 == 0 {
                write_sample_grid(
                    &state.nets,
                    dataset,
                    &dir.join(format!("step_{:07}.png", state.step)),
                )?;
            }
        }
    }
    if let Some(f) = metrics_file.as_mut() {
        f.flush()?;
    }
    if let Some(dir) = &opts.checkpoint_dir {
        save_state(&state, cfg, &dir.join(format!("step_{:07}.ckpt", state.step)))?;
    }
    Ok((state, records))
}

fn sample_batch_indices(rng: &mut Rng, n: usize, batch: usize) -> Vec<usize> {
    if batch <= n {
        rng.distinct(n, batch)
    } else {
        (0..batch).map(|_| rng.below(n)).collect()
    }
}

/// 4-row diagnostic grid: x, G(x,0), G(x,t), y over the first few samples.
pub fn write_sample_grid<F: Scalar>(
    nets: &Networks<F>,
    dataset: &Dataset<F>,
    path: &Path,
) -> Result<()> {
    let k = dataset.len().min(8);
    let idxs: Vec<usize> = (0..k).collect();
    let triplet = dataset.make_batch(&idxs)?;
    let zero = Transition::new(Array2::zeros((k, dataset.adapter.d_t)))?;
    let x_self = crate::networks::generate(&nets.generator, &triplet.x, &zero)?;
    let y_hat = crate::networks::generate(&nets.generator, &triplet.x, &triplet.t)?;
    let side = dataset.side();
    let c = dataset.channels();
    let mut grid = ndarray::Array3::<F>::from_elem((c, 4 * side, k * side), F::one());
    for col in 0..k {
        for (row, img) in [
            triplet.x.data(),
            x_self.data(),
            y_hat.data(),
            triplet.y.data(),
        ]
        .iter()
        .enumerate()
        {
            let tile = img.index_axis(Axis(0), col);
            grid.slice_mut(ndarray::s![
                ..,
                row * side..(row + 1) * side,
                col * side..(col + 1) * side
            ])
            .assign(&tile);
        }
    }
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    crate::tasks::save_png(&grid, path)
}

// ---- checkpointing ----

fn put_store<F: Scalar>(ar: &mut Archive, prefix: &str, store: &ParamStore<F>) {
    for (name, tensor) in store.entries() {
        ar.put_tensor(&format!("param/{prefix}/{name}"), tensor);
    }
}

fn put_adam<F: Scalar>(ar: &mut Archive, prefix: &str, store: &ParamStore<F>, adam: &Adam<F>) {
    for (i, (name, _)) in store.entries().iter().enumerate() {
        ar.put_tensor(&format!("opt/{prefix}/m/{name}"), &adam.m[i]);
        ar.put_tensor(&format!("opt/{prefix}/v/{name}"), &adam.v[i]);
        ar.put_u64(&format!("opt/{prefix}/t/{name}"), adam.t[i]);
    }
}

fn load_store<F: Scalar>(ar: &Archive, prefix: &str, store: &mut ParamStore<F>) -> Result<()> {
    let names: Vec<String> = store.entries().iter().map(|(n, _)| n.clone()).collect();
    for name in names {
        let t = ar.get_tensor::<F>(&format!("param/{prefix}/{name}"))?;
        store.set_from(&name, t)?;
    }
    Ok(())
}

fn load_adam<F: Scalar>(
    ar: &Archive,
    prefix: &str,
    store: &ParamStore<F>,
    adam: &mut Adam<F>,
) -> Result<()> {
    for (i, (name, _)) in store.entries().iter().enumerate() {
        adam.m[i] = ar.get_tensor::<F>(&format!("opt/{prefix}/m/{name}"))?;
        adam.v[i] = ar.get_tensor::<F>(&format!("opt/{prefix}/v/{name}"))?;
        adam.t[i] = ar.get_u64(&format!("opt/{prefix}/t/{name}"))?;
    }
    Ok(())
}

pub fn save_state<F: Scalar>(state: &TrainState<F>, cfg: &TrainConfig, path: &Path) -> Result<()> {
    let mut ar = Archive::new();
    ar.put_json("meta/config", cfg)?;
    ar.put_json("meta/specs", &state.nets.specs)?;
    ar.put_json("meta/phase", &state.phase)?;
    ar.put_json("meta/rng", &state.rng.state())?;
    ar.put_u64("meta/step", state.step);
    ar.put_bytes("meta/dtype", F::DTYPE.as_bytes().to_vec());
    put_store(&mut ar, "G", &state.nets.generator.params);
    put_store(&mut ar, "E", &state.nets.encoder.params);
    put_store(&mut ar, "D", &state.nets.disc.params);
    put_store(&mut ar, "DT", &state.nets.disc_t.params);
    put_adam(&mut ar, "G", &state.nets.generator.params, &state.opt_g);
    put_adam(&mut ar, "E", &state.nets.encoder.params, &state.opt_e);
    put_adam(&mut ar, "D", &state.nets.disc.params, &state.opt_d);
    put_adam(&mut ar, "DT", &state.nets.disc_t.params, &state.opt_dt);
    ar.save(path)
}

/// Restore a full training state. When `expected_specs` is given, a stored
/// spec mismatch is an error.
pub fn load_state<F: Scalar>(
    path: &Path,
    expected_specs: Option<&NetworkSpecs>,
) -> Result<(TrainState<F>, TrainConfig)> {
    let ar = Archive::load(path)?;
    let dtype = String::from_utf8_lossy(ar.get_bytes("meta/dtype")?).to_string();
    if dtype != F::DTYPE {
        return Err(Error::Checkpoint(format!(
            "checkpoint dtype {dtype}, expected {}",
            F::DTYPE
        )));
    }
    let cfg: TrainConfig = ar.get_json("meta/config")?;
    let specs: NetworkSpecs = ar.get_json("meta/specs")?;
    if let Some(expected) = expected_specs {
        if *expected != specs {
            return Err(Error::Checkpoint(
                "checkpoint network specs do not match the requested specs".into(),
            ));
        }
    }
    let mut state = TrainState::<F>::init(&specs, &cfg)?;
    state.step = ar.get_u64("meta/step")?;
    state.phase = ar.get_json("meta/phase")?;
    let rng_state: RngState = ar.get_json("meta/rng")?;
    state.rng = Rng::restore(&rng_state);
    load_store(&ar, "G", &mut state.nets.generator.params)?;
    load_store(&ar, "E", &mut state.nets.encoder.params)?;
    load_store(&ar, "D", &mut state.nets.disc.params)?;
    load_store(&ar, "DT", &mut state.nets.disc_t.params)?;
    load_adam(&ar, "G", &state.nets.generator.params, &mut state.opt_g)?;
    load_adam(&ar, "E", &state.nets.encoder.params, &mut state.opt_e)?;
    load_adam(&ar, "D", &state.nets.disc.params, &mut state.opt_d)?;
    load_adam(&ar, "DT", &state.nets.disc_t.params, &mut state.opt_dt)?;
    Ok((state, cfg))
}
