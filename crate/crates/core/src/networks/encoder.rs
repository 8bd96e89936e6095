//! Stochastic transition encoder: a small residual network over the
//! concatenated image pair, ending in diagonal-Gaussian posterior heads.

use super::{Conv, EncoderSpec, InstNorm, LinearLayer, ParamStore};
use crate::rng::Rng;
use crate::scalar::{fl, Scalar};
use crate::tensor::{Tape, Var};
use crate::types::LOG_VAR_CLAMP;

struct ResBlock {
    c1: Conv,
    n1: InstNorm,
    c2: Conv,
    n2: InstNorm,
}

pub struct Encoder<F: Scalar> {
    pub spec: EncoderSpec,
    pub params: ParamStore<F>,
    stem: Conv,
    stem_norm: InstNorm,
    down: Conv,
    down_norm: InstNorm,
    blocks: Vec<ResBlock>,
    head: LinearLayer,
}

impl<F: Scalar> Encoder<F> {
    pub fn init(spec: &EncoderSpec, rng: &mut Rng) -> Self {
        let mut ps = ParamStore::new();
        let b = spec.base_channels;
        let stem = Conv::init(&mut ps, rng, "stem", 2 * spec.img_channels, b, 3, 2, 1);
        let stem_norm = InstNorm::init(&mut ps, "stem.norm", b);
        let down = Conv::init(&mut ps, rng, "down", b, 2 * b, 3, 2, 1);
        let down_norm = InstNorm::init(&mut ps, "down.norm", 2 * b);
        let mut blocks = Vec::new();
        for i in 0..spec.residual_blocks {
            blocks.push(ResBlock {
                c1: Conv::init(&mut ps, rng, &format!("res{i}.c1"), 2 * b, 2 * b, 3, 1, 1),
                n1: InstNorm::init(&mut ps, &format!("res{i}.n1"), 2 * b),
                c2: Conv::init(&mut ps, rng, &format!("res{i}.c2"), 2 * b, 2 * b, 3, 1, 1),
                n2: InstNorm::init(&mut ps, &format!("res{i}.n2"), 2 * b),
            });
        }
        let head = LinearLayer::init(&mut ps, rng, "head", 2 * b, 2 * spec.d_t);
        Encoder {
            spec: spec.clone(),
            params: ps,
            stem,
            stem_norm,
            down,
            down_norm,
            blocks,
            head,
        }
    }

    /// Tape-level forward: returns `(mean, log_var)`, each `[n, d_t]`.
    pub fn fwd(
        &self,
        tape: &Tape<F>,
        bp: &super::BoundParams,
        x: Var,
        y: Var,
    ) -> (Var, Var) {
        let mut cur = tape.concat_ch(&[x, y]);
        cur = self.stem.fwd(tape, bp, cur);
        cur = self.stem_norm.fwd(tape, bp, cur);
        cur = tape.relu(cur);
        cur = self.down.fwd(tape, bp, cur);
        cur = self.down_norm.fwd(tape, bp, cur);
        cur = tape.relu(cur);
        for blk in &self.blocks {
            let mut h = blk.c1.fwd(tape, bp, cur);
            h = blk.n1.fwd(tape, bp, h);
            h = tape.relu(h);
            h = blk.c2.fwd(tape, bp, h);
            h = blk.n2.fwd(tape, bp, h);
            cur = tape.relu(tape.add(cur, h));
        }
        let pooled = tape.global_avg_pool(cur);
        let both = self.head.fwd(tape, bp, pooled);
        let mean = tape.slice_cols(both, 0, self.spec.d_t);
        let log_var_raw = tape.slice_cols(both, self.spec.d_t, 2 * self.spec.d_t);
        let lim = fl::<F>(LOG_VAR_CLAMP);
        let log_var = tape.clamp(log_var_raw, -lim, lim);
        (mean, log_var)
    }
}
