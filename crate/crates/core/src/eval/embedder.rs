//! Small frozen feature embedder: a three-conv network trained once on the
//! synthetic annotation-regression task with a pinned seed, then used as the
//! feature space for the Fréchet-distance proxy and diversity statistics.

use crate::error::Result;
use crate::networks::ParamStore;
use crate::rng::Rng;
use crate::scalar::{dbl, fl, Scalar};
use crate::tasks::Dataset;
use crate::tensor::{Tape, Var};
use crate::trainer::Adam;
use crate::types::TrainConfig;
use ndarray::{Array2, Array4, Axis, Ix2};

pub const EMBED_DIM: usize = 32;

/// Seed stream offsets so the embedder never shares draws with training.
const INIT_STREAM: u64 = 0xFE;
const BATCH_STREAM: u64 = 0xFF;

pub struct Embedder<F: Scalar> {
    params: ParamStore<F>,
    convs: Vec<(crate::networks::PIdxPair, usize, usize)>,
    head: crate::networks::PIdxPair,
}

impl<F: Scalar> Embedder<F> {
    fn init(img_channels: usize, label_dim: usize, rng: &mut Rng) -> Self {
        let mut ps = ParamStore::new();
        let plan = [(img_channels, 16), (16, 32), (32, EMBED_DIM)];
        let mut convs = Vec::new();
        for (i, &(ci, co)) in plan.iter().enumerate() {
            let pair = crate::networks::conv_pair(&mut ps, rng, &format!("c{i}"), ci, co, 3);
            convs.push((pair, 2usize, 1usize));
        }
        let head = crate::networks::linear_pair(&mut ps, rng, "head", EMBED_DIM, label_dim);
        Embedder { params: ps, convs, head }
    }

    fn fwd(&self, tape: &Tape<F>, bound: &crate::networks::BoundParams, x: Var) -> (Var, Var) {
        let mut cur = x;
        for ((w, b), stride, pad) in &self.convs {
            cur = tape.conv2d(cur, bound.get(*w), bound.get(*b), *stride, *pad);
            cur = tape.leaky_relu(cur, fl(0.2));
        }
        let feat = tape.global_avg_pool(cur);
        let (hw, hb) = self.head;
        let pred = tape.linear(feat, bound.get(hw), bound.get(hb));
        (feat, pred)
    }

    /// Feature vectors (f64) for a stack of images.
    pub fn embed(&self, images: &Array4<F>) -> Array2<f64> {
        let tape = Tape::new();
        let bound = self.params.bind(&tape);
        let x = tape.var(images.clone().into_dyn());
        let (feat, _) = self.fwd(&tape, &bound, x);
        let val = tape.value(feat);
        let v2 = val.view().into_dimensionality::<Ix2>().unwrap();
        Array2::from_shape_fn(v2.dim(), |(i, j)| dbl(v2[[i, j]]))
    }
}

/// Train the embedder on annotation regression and freeze it.
/// Deterministic in `(dataset contents, seed, steps)`.
pub fn train_embedder<F: Scalar>(
    ds: &Dataset<F>,
    seed: u64,
    steps: usize,
) -> Result<Embedder<F>> {
    let label_dim = ds.samples[0].z_y.z.len();
    let mut init_rng = Rng::seeded(seed, INIT_STREAM);
    let mut embedder = Embedder::init(ds.channels(), label_dim, &mut init_rng);
    let cfg = TrainConfig {
        lr: 1e-3,
        beta1: 0.9,
        beta2: 0.999,
        ..Default::default()
    };
    let mut opt = Adam::new(&cfg, &embedder.params);
    let mut rng = Rng::seeded(seed, BATCH_STREAM);
    let batch = 32.min(ds.len());
    for _ in 0..steps {
        let idxs = rng.distinct(ds.len(), batch);
        let (c, h, w) = ds.samples[0].y.dim();
        let mut images = Array4::<F>::zeros((batch, c, h, w));
        let mut labels = Array2::<F>::zeros((batch, label_dim));
        for (row, &i) in idxs.iter().enumerate() {
            images
                .index_axis_mut(Axis(0), row)
                .assign(&ds.samples[i].y);
            for (j, &z) in ds.samples[i].z_y.z.iter().enumerate() {
                labels[[row, j]] = fl(z);
            }
        }
        let tape = Tape::new();
        let bound = embedder.params.bind(&tape);
        let x = tape.var(images.into_dyn());
        let yv = tape.var(labels.into_dyn());
        let (_, pred) = embedder.fwd(&tape, &bound, x);
        let diff = tape.sub(pred, yv);
        let sq = tape.square(diff);
        let loss = tape.mean_all(sq);
        let grads = tape.backward(loss);
        opt.step(&mut embedder.params, &bound, &grads);
    }
    Ok(embedder)
}

/// Mean pairwise L2 distance between embedding rows (diversity proxy).
pub fn proxy_diversity(feats: &Array2<f64>) -> f64 {
    let n = feats.nrows();
    if n < 2 {
        return 0.0;
    }
    let mut acc = 0.0;
    let mut count = 0usize;
    for i in 0..n {
        for j in (i + 1)..n {
            let mut d2 = 0.0;
            for k in 0..feats.ncols() {
                let d = feats[[i, k]] - feats[[j, k]];
                d2 += d * d;
            }
            acc += d2.sqrt();
            count += 1;
        }
    }
    acc / count as f64
}

/// Stack per-sample image tensors into one batch array.
pub fn stack_images<F: Scalar>(imgs: &[ndarray::Array3<F>]) -> Array4<F> {
    let (c, h, w) = imgs[0].dim();
    let mut out = Array4::<F>::zeros((imgs.len(), c, h, w));
    for (i, img) in imgs.iter().enumerate() {
        out.index_axis_mut(Axis(0), i).assign(img);
    }
    out
}
