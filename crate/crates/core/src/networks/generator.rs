//! U-shaped translation generator. The stem downsamples immediately and a
//! raw-input skip feeds the output head, so compute concentrates at low
//! resolution. The transition map is concatenated at the input and again at
//! the bottleneck.

use super::{Conv, ConvT, GeneratorSpec, InstNorm, ParamStore};
use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::scalar::Scalar;
use crate::tensor::{Tape, Var};
use crate::types::ImageBatch;

struct DownBlock {
    conv: Conv,
    norm: InstNorm,
}

struct UpBlock {
    up: ConvT,
    up_norm: InstNorm,
    fuse: Conv,
    fuse_norm: InstNorm,
}

pub struct Generator<F: Scalar> {
    pub spec: GeneratorSpec,
    pub params: ParamStore<F>,
    stem: Conv,
    stem_norm: InstNorm,
    downs: Vec<DownBlock>,
    bottleneck: Conv,
    bottleneck_norm: InstNorm,
    ups: Vec<UpBlock>,
    top: ConvT,
    top_norm: InstNorm,
    out: Conv,
}

impl<F: Scalar> Generator<F> {
    pub fn init(spec: &GeneratorSpec, rng: &mut Rng) -> Self {
        let mut ps = ParamStore::new();
        let b = spec.base_channels;
        // level 1 features at half resolution
        let stem = Conv::init(&mut ps, rng, "stem", spec.img_channels + spec.d_t, b, 4, 2, 1);
        let stem_norm = InstNorm::init(&mut ps, "stem.norm", b);
        let mut downs = Vec::new();
        for i in 1..spec.depth {
            let ci = b << (i - 1);
            let co = b << i;
            downs.push(DownBlock {
                conv: Conv::init(&mut ps, rng, &format!("down{i}"), ci, co, 4, 2, 1),
                norm: InstNorm::init(&mut ps, &format!("down{i}.norm"), co),
            });
        }
        let mid = b << (spec.depth - 1);
        let bottleneck = Conv::init(&mut ps, rng, "bottleneck", mid + spec.d_t, mid, 3, 1, 1);
        let bottleneck_norm = InstNorm::init(&mut ps, "bottleneck.norm", mid);
        let mut ups = Vec::new();
        for i in (1..spec.depth).rev() {
            let ci = b << i;
            let co = b << (i - 1);
            ups.push(UpBlock {
                up: ConvT::init(&mut ps, rng, &format!("up{i}"), ci, co, 4, 2, 1),
                up_norm: InstNorm::init(&mut ps, &format!("up{i}.norm"), co),
                fuse: Conv::init(&mut ps, rng, &format!("up{i}.fuse"), 2 * co, co, 3, 1, 1),
                fuse_norm: InstNorm::init(&mut ps, &format!("up{i}.fuse.norm"), co),
            });
        }
        // back to full resolution, then fuse with the raw input
        let top = ConvT::init(&mut ps, rng, "top", b, b, 4, 2, 1);
        let top_norm = InstNorm::init(&mut ps, "top.norm", b);
        let out = Conv::init(&mut ps, rng, "out", b + spec.img_channels, spec.img_channels, 3, 1, 1);
        Generator {
            spec: spec.clone(),
            params: ps,
            stem,
            stem_norm,
            downs,
            bottleneck,
            bottleneck_norm,
            ups,
            top,
            top_norm,
            out,
        }
    }

    pub fn check_input(&self, x: &ImageBatch<F>, t_width: usize) -> Result<()> {
        if t_width != self.spec.d_t {
            return Err(Error::Dimension(format!(
                "transition width {} vs generator d_t {}",
                t_width, self.spec.d_t
            )));
        }
        if x.channels() != self.spec.img_channels {
            return Err(Error::Dimension(format!(
                "image channels {} vs generator {}",
                x.channels(),
                self.spec.img_channels
            )));
        }
        let div = 1usize << self.spec.depth;
        if x.side() % div != 0 || x.side() / div < 2 {
            return Err(Error::Dimension(format!(
                "image side {} incompatible with depth {}",
                x.side(),
                self.spec.depth
            )));
        }
        Ok(())
    }

    /// Tape-level forward: `x [n,c,h,w]`, `t [n,d_t]` → image in `(-1, 1)`.
    pub fn fwd(&self, tape: &Tape<F>, bp: &super::BoundParams, x: Var, t: Var) -> Var {
        let shape = tape.shape(x);
        let (h, w) = (shape[2], shape[3]);
        let tmap = tape.broadcast_map(t, h, w);
        let mut cur = tape.concat_ch(&[x, tmap]);
        cur = self.stem.fwd(tape, bp, cur);
        cur = self.stem_norm.fwd(tape, bp, cur);
        cur = tape.relu(cur);
        let mut skips = vec![cur];
        for d in &self.downs {
            cur = d.conv.fwd(tape, bp, cur);
            cur = d.norm.fwd(tape, bp, cur);
            cur = tape.relu(cur);
            skips.push(cur);
        }
        skips.pop();
        let mid_shape = tape.shape(cur);
        let tmap_mid = tape.broadcast_map(t, mid_shape[2], mid_shape[3]);
        cur = tape.concat_ch(&[cur, tmap_mid]);
        cur = self.bottleneck.fwd(tape, bp, cur);
        cur = self.bottleneck_norm.fwd(tape, bp, cur);
        cur = tape.relu(cur);
        for u in &self.ups {
            cur = u.up.fwd(tape, bp, cur);
            cur = u.up_norm.fwd(tape, bp, cur);
            cur = tape.relu(cur);
            let skip = skips.pop().expect("skip stack");
            cur = tape.concat_ch(&[cur, skip]);
            cur = u.fuse.fwd(tape, bp, cur);
            cur = u.fuse_norm.fwd(tape, bp, cur);
            cur = tape.relu(cur);
        }
        cur = self.top.fwd(tape, bp, cur);
        cur = self.top_norm.fwd(tape, bp, cur);
        cur = tape.relu(cur);
        cur = tape.concat_ch(&[cur, x]);
        cur = self.out.fwd(tape, bp, cur);
        tape.tanh(cur)
    }
}
