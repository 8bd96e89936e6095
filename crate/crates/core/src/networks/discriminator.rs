//! Discriminators. `D_Real` and `D_Match` share a stack of stride-2 convs;
//! each has its own input adapter (their input channel counts differ) and a
//! linear scoring head. `D_T` is a standalone MLP on transition vectors.
//! No normalization layers here.

use super::{Conv, DiscriminatorBundleSpec, LinearLayer, ParamStore};
use crate::rng::Rng;
use crate::scalar::{fl, Scalar};
use crate::tensor::{Tape, Var};

const LEAK: f64 = 0.2;

pub struct DiscBundle<F: Scalar> {
    pub spec: DiscriminatorBundleSpec,
    pub params: ParamStore<F>,
    real_adapter: Conv,
    match_adapter: Conv,
    trunk: Vec<Conv>,
    real_head: LinearLayer,
    match_head: LinearLayer,
}

impl<F: Scalar> DiscBundle<F> {
    pub fn init(spec: &DiscriminatorBundleSpec, rng: &mut Rng) -> Self {
        let mut ps = ParamStore::new();
        let b = spec.base_channels;
        let real_adapter = Conv::init(&mut ps, rng, "real_adapter", spec.img_channels, b, 4, 2, 1);
        let match_adapter = Conv::init(
            &mut ps,
            rng,
            "match_adapter",
            2 * spec.img_channels + spec.d_t,
            b,
            4,
            2,
            1,
        );
        let mut trunk = Vec::new();
        let mut ch = b;
        for i in 0..spec.shared_conv_layers {
            let co = (ch * 2).min(spec.max_channels);
            trunk.push(Conv::init(&mut ps, rng, &format!("trunk{i}"), ch, co, 3, 2, 1));
            ch = co;
        }
        let real_head = LinearLayer::init(&mut ps, rng, "real_head", ch, 1);
        let match_head = LinearLayer::init(&mut ps, rng, "match_head", ch, 1);
        DiscBundle {
            spec: spec.clone(),
            params: ps,
            real_adapter,
            match_adapter,
            trunk,
            real_head,
            match_head,
        }
    }

    fn trunk_fwd(&self, tape: &Tape<F>, bp: &super::BoundParams, mut cur: Var) -> Var {
        let leak = fl::<F>(LEAK);
        for conv in &self.trunk {
            cur = conv.fwd(tape, bp, cur);
            cur = tape.leaky_relu(cur, leak);
        }
        tape.global_avg_pool(cur)
    }

    /// Realism score, one raw value per sample.
    pub fn fwd_real(&self, tape: &Tape<F>, bp: &super::BoundParams, y: Var) -> Var {
        let leak = fl::<F>(LEAK);
        let mut cur = self.real_adapter.fwd(tape, bp, y);
        cur = tape.leaky_relu(cur, leak);
        let feat = self.trunk_fwd(tape, bp, cur);
        let s = self.real_head.fwd(tape, bp, feat);
        let n = tape.shape(s)[0];
        tape.reshape(s, &[n])
    }

    /// Joint triplet score: `x`, `y` and the broadcast transition map enter
    /// the trunk together.
    pub fn fwd_match(
        &self,
        tape: &Tape<F>,
        bp: &super::BoundParams,
        x: Var,
        t: Var,
        y: Var,
    ) -> Var {
        let leak = fl::<F>(LEAK);
        let shape = tape.shape(x);
        let tmap = tape.broadcast_map(t, shape[2], shape[3]);
        let mut cur = tape.concat_ch(&[x, y, tmap]);
        cur = self.match_adapter.fwd(tape, bp, cur);
        cur = tape.leaky_relu(cur, leak);
        let feat = self.trunk_fwd(tape, bp, cur);
        let s = self.match_head.fwd(tape, bp, feat);
        let n = tape.shape(s)[0];
        tape.reshape(s, &[n])
    }
}

pub struct DiscTrans<F: Scalar> {
    pub params: ParamStore<F>,
    layers: Vec<LinearLayer>,
}

impl<F: Scalar> DiscTrans<F> {
    pub fn init(spec: &DiscriminatorBundleSpec, rng: &mut Rng) -> Self {
        let mut ps = ParamStore::new();
        let mut layers = Vec::new();
        let mut ci = spec.d_t;
        for i in 0..spec.dt_mlp_layers - 1 {
            layers.push(LinearLayer::init(&mut ps, rng, &format!("fc{i}"), ci, spec.dt_hidden));
            ci = spec.dt_hidden;
        }
        layers.push(LinearLayer::init(
            &mut ps,
            rng,
            &format!("fc{}", spec.dt_mlp_layers - 1),
            ci,
            1,
        ));
        DiscTrans { params: ps, layers }
    }

    pub fn fwd(&self, tape: &Tape<F>, bp: &super::BoundParams, t: Var) -> Var {
        let leak = fl::<F>(LEAK);
        let mut cur = t;
        let last = self.layers.len() - 1;
        for (i, l) in self.layers.iter().enumerate() {
            cur = l.fwd(tape, bp, cur);
            if i != last {
                cur = tape.leaky_relu(cur, leak);
            }
        }
        let n = tape.shape(cur)[0];
        tape.reshape(cur, &[n])
    }
}
