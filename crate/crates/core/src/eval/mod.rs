//! Metrics and model probes: reconstruction quality (SSIM / PSNR), a
//! Fréchet-distance proxy over a frozen task-trained embedder, oracle-scored
//! attribute accuracy for edit batteries, interpolation monotonicity and the
//! encoder Lipschitz diagnostic.

mod embedder;
mod linalg;

pub use embedder::{proxy_diversity, stack_images, train_embedder, Embedder, EMBED_DIM};
pub use linalg::{sqrtm_psd, symmetric_eigen};

use crate::error::{Error, Result};
use crate::networks::{generate, Generator, Networks};
use crate::rng::Rng;
use crate::scalar::{dbl, fl, Scalar};
use crate::tasks::{render_shapes, Dataset, Sample, ShapesAttrs, TaskAdapter, TaskKind};
use crate::types::{ImageBatch, Transition};
use ndarray::{Array1, Array2, Array3, Array4, Axis};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// PSNR reported for identical images (cap instead of infinity).
pub const PSNR_CAP: f64 = 99.0;

/// One evaluation summary.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalReport {
    pub ssim: f64,
    pub psnr: f64,
    pub proxy_fid: f64,
    pub attr_accuracy: BTreeMap<String, f64>,
    pub interp_monotonicity: f64,
    pub lipschitz_est: f64,
}

impl EvalReport {
    pub const CSV_HEADER: &'static str =
        "ssim,psnr,proxy_fid,attr_avg,interp_monotonicity,lipschitz_est";

    pub fn to_csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{}",
            self.ssim,
            self.psnr,
            self.proxy_fid,
            self.attr_accuracy.get("average").copied().unwrap_or(f64::NAN),
            self.interp_monotonicity,
            self.lipschitz_est
        )
    }
}

// ---- SSIM / PSNR ----

fn gaussian_kernel(size: usize, sigma: f64) -> Vec<f64> {
    let c = (size as f64 - 1.0) / 2.0;
    let mut k: Vec<f64> = (0..size)
        .map(|i| (-((i as f64 - c).powi(2)) / (2.0 * sigma * sigma)).exp())
        .collect();
    let s: f64 = k.iter().sum();
    for v in &mut k {
        *v /= s;
    }
    k
}

/// SSIM with an 11x11 Gaussian window (sigma 1.5), k1 = 0.01, k2 = 0.03 and
/// dynamic range 2 (images live in [-1, 1]); mean over channels and batch.
/// Images smaller than the window fall back to whole-image statistics.
pub fn ssim<F: Scalar>(a: &ImageBatch<F>, b: &ImageBatch<F>) -> Result<f64> {
    if a.data().dim() != b.data().dim() {
        return Err(Error::Dimension(format!(
            "ssim: {:?} vs {:?}",
            a.data().dim(),
            b.data().dim()
        )));
    }
    let (n, c, h, w) = a.data().dim();
    let range = 2.0f64;
    let c1 = (0.01 * range).powi(2);
    let c2 = (0.03 * range).powi(2);
    let win = 11usize;
    let mut acc = 0.0;
    let mut count = 0usize;
    for i in 0..n {
        for ch in 0..c {
            let pa = a.data().index_axis(Axis(0), i);
            let pa = pa.index_axis(Axis(0), ch);
            let pb = b.data().index_axis(Axis(0), i);
            let pb = pb.index_axis(Axis(0), ch);
            if h < win || w < win {
                acc += ssim_global(&pa, &pb, c1, c2);
            } else {
                acc += ssim_windowed(&pa, &pb, c1, c2, win);
            }
            count += 1;
        }
    }
    Ok(acc / count as f64)
}

fn ssim_global<F: Scalar>(
    a: &ndarray::ArrayView2<'_, F>,
    b: &ndarray::ArrayView2<'_, F>,
    c1: f64,
    c2: f64,
) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().map(|&v| dbl(v)).sum::<f64>() / n;
    let mb = b.iter().map(|&v| dbl(v)).sum::<f64>() / n;
    let mut va = 0.0;
    let mut vb = 0.0;
    let mut cov = 0.0;
    for (&x, &y) in a.iter().zip(b.iter()) {
        let dx = dbl(x) - ma;
        let dy = dbl(y) - mb;
        va += dx * dx;
        vb += dy * dy;
        cov += dx * dy;
    }
    va /= n;
    vb /= n;
    cov /= n;
    ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2))
}

fn ssim_windowed<F: Scalar>(
    a: &ndarray::ArrayView2<'_, F>,
    b: &ndarray::ArrayView2<'_, F>,
    c1: f64,
    c2: f64,
    win: usize,
) -> f64 {
    let (h, w) = a.dim();
    let k = gaussian_kernel(win, 1.5);
    let oh = h - win + 1;
    let ow = w - win + 1;
    let mut acc = 0.0;
    for oy in 0..oh {
        for ox in 0..ow {
            let mut ma = 0.0;
            let mut mb = 0.0;
            let mut saa = 0.0;
            let mut sbb = 0.0;
            let mut sab = 0.0;
            for dy in 0..win {
                for dx in 0..win {
                    let wgt = k[dy] * k[dx];
                    let x = dbl(a[[oy + dy, ox + dx]]);
                    let y = dbl(b[[oy + dy, ox + dx]]);
                    ma += wgt * x;
                    mb += wgt * y;
                    saa += wgt * x * x;
                    sbb += wgt * y * y;
                    sab += wgt * x * y;
                }
            }
            let va = saa - ma * ma;
            let vb = sbb - mb * mb;
            let cov = sab - ma * mb;
            acc += ((2.0 * ma * mb + c1) * (2.0 * cov + c2))
                / ((ma * ma + mb * mb + c1) * (va + vb + c2));
        }
    }
    acc / (oh * ow) as f64
}

/// `10 log10(range^2 / mse)` with range 2, capped at [`PSNR_CAP`] dB.
pub fn psnr<F: Scalar>(a: &ImageBatch<F>, b: &ImageBatch<F>) -> Result<f64> {
    if a.data().dim() != b.data().dim() {
        return Err(Error::Dimension(format!(
            "psnr: {:?} vs {:?}",
            a.data().dim(),
            b.data().dim()
        )));
    }
    let mut mse = 0.0;
    for (&x, &y) in a.data().iter().zip(b.data().iter()) {
        let d = dbl(x) - dbl(y);
        mse += d * d;
    }
    mse /= a.data().len() as f64;
    if mse <= 0.0 {
        return Ok(PSNR_CAP);
    }
    Ok((10.0 * (4.0 / mse).log10()).min(PSNR_CAP))
}

// ---- Fréchet proxy ----

fn gaussian_stats(feats: &Array2<f64>) -> (Array1<f64>, Array2<f64>) {
    let n = feats.nrows();
    let d = feats.ncols();
    let mean = feats.mean_axis(Axis(0)).expect("nonempty feature set");
    let mut cov = Array2::<f64>::zeros((d, d));
    if n > 1 {
        for row in feats.rows() {
            let centered: Vec<f64> = (0..d).map(|j| row[j] - mean[j]).collect();
            for i in 0..d {
                for j in 0..d {
                    cov[[i, j]] += centered[i] * centered[j];
                }
            }
        }
        cov.mapv_inplace(|v| v / (n as f64 - 1.0));
    }
    (mean, cov)
}

/// Fréchet distance between the Gaussian fits of two embedding sets:
/// `||mu1 - mu2||^2 + Tr(S1 + S2 - 2 (S1 S2)^{1/2})`, with the matrix square
/// root computed symmetrically and eigenvalues clamped at 0.
pub fn frechet_distance(feats_a: &Array2<f64>, feats_b: &Array2<f64>) -> f64 {
    let (mu1, cov1) = gaussian_stats(feats_a);
    let (mu2, cov2) = gaussian_stats(feats_b);
    let mut d2 = 0.0;
    for (a, b) in mu1.iter().zip(mu2.iter()) {
        d2 += (a - b).powi(2);
    }
    let s1 = sqrtm_psd(&cov1);
    let inner = s1.dot(&cov2).dot(&s1);
    let (vals, _) = symmetric_eigen(&inner);
    let tr_sqrt: f64 = vals.iter().map(|&v| v.max(0.0).sqrt()).sum();
    let tr1: f64 = (0..cov1.nrows()).map(|i| cov1[[i, i]]).sum();
    let tr2: f64 = (0..cov2.nrows()).map(|i| cov2[[i, i]]).sum();
    (d2 + tr1 + tr2 - 2.0 * tr_sqrt).max(0.0)
}

/// Fréchet proxy over a frozen embedder, between two image sets.
pub fn proxy_fid<F: Scalar>(real: &Array4<F>, fake: &Array4<F>, feature_net: &Embedder<F>) -> f64 {
    frechet_distance(&feature_net.embed(real), &feature_net.embed(fake))
}

// ---- edit batteries (attribute task) ----

/// Relative attribute edits; targets derive from each sample's annotation,
/// so flip targets stay balanced.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AttrEdit {
    /// Rotate the fill color to the next channel.
    CycleColor,
    FlipBrightness,
    FlipSize,
    FlipBorder,
}

impl AttrEdit {
    pub const ALL: [AttrEdit; 4] = [
        AttrEdit::CycleColor,
        AttrEdit::FlipBrightness,
        AttrEdit::FlipSize,
        AttrEdit::FlipBorder,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            AttrEdit::CycleColor => "color",
            AttrEdit::FlipBrightness => "brightness",
            AttrEdit::FlipSize => "size",
            AttrEdit::FlipBorder => "border",
        }
    }

    pub fn apply(&self, a: &ShapesAttrs) -> ShapesAttrs {
        let mut out = *a;
        match self {
            AttrEdit::CycleColor => out.color = (a.color + 1) % 3,
            AttrEdit::FlipBrightness => out.bright = !a.bright,
            AttrEdit::FlipSize => out.large = !a.large,
            AttrEdit::FlipBorder => out.border = !a.border,
        }
        out
    }

    /// Did the oracle read match the edited attribute of the target?
    pub fn satisfied(&self, target: &ShapesAttrs, read: &ShapesAttrs) -> bool {
        match self {
            AttrEdit::CycleColor => read.color == target.color,
            AttrEdit::FlipBrightness => read.bright == target.bright,
            AttrEdit::FlipSize => read.large == target.large,
            AttrEdit::FlipBorder => read.border == target.border,
        }
    }
}

/// All single-attribute edits.
pub fn single_edit_battery() -> Vec<Vec<AttrEdit>> {
    AttrEdit::ALL.iter().map(|e| vec![*e]).collect()
}

/// All unordered pairs of distinct attribute edits.
pub fn double_edit_battery() -> Vec<Vec<AttrEdit>> {
    let mut out = Vec::new();
    for i in 0..AttrEdit::ALL.len() {
        for j in (i + 1)..AttrEdit::ALL.len() {
            out.push(vec![AttrEdit::ALL[i], AttrEdit::ALL[j]]);
        }
    }
    out
}

/// Per-attribute and average oracle accuracy of an edit battery.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AccuracyReport {
    pub per_attr: BTreeMap<String, f64>,
    pub average: f64,
    pub edits_scored: usize,
}

fn shapes_transition<F: Scalar>(
    adapter: &TaskAdapter,
    z_x: &crate::tasks::AttributeVector,
    target: &ShapesAttrs,
) -> Vec<F> {
    let raw = adapter.make_transition(z_x, &target.to_vector());
    let scale = adapter.load_scale();
    raw.iter().map(|&v| fl::<F>(v * scale)).collect()
}

/// Generate `G(x, t_edit)` for every (sample, edit set) pair and score the
/// oracle against the edited attributes.
pub fn attr_accuracy<F: Scalar>(
    g: &Generator<F>,
    ds: &Dataset<F>,
    edits: &[Vec<AttrEdit>],
    limit: usize,
) -> Result<AccuracyReport> {
    if ds.adapter.kind != TaskKind::AttrEdit {
        return Err(Error::Config(
            "attr_accuracy edit batteries apply to the attr_edit task".into(),
        ));
    }
    let take = ds.len().min(limit.max(1));
    let d_t = ds.adapter.d_t;
    let mut hits: BTreeMap<&'static str, (usize, usize)> = BTreeMap::new();
    const CHUNK: usize = 32;
    for edit_set in edits {
        let mut at = 0;
        while at < take {
            let hi = (at + CHUNK).min(take);
            let count = hi - at;
            let (c, hh, ww) = ds.samples[0].x.dim();
            let mut xs = Array4::<F>::zeros((count, c, hh, ww));
            let mut ts = Array2::<F>::zeros((count, d_t));
            let mut targets = Vec::with_capacity(count);
            for (row, s) in ds.samples[at..hi].iter().enumerate() {
                xs.index_axis_mut(Axis(0), row).assign(&s.x);
                let mut target = ShapesAttrs::from_vector(&s.z_x);
                for e in edit_set {
                    target = e.apply(&target);
                }
                let t = shapes_transition::<F>(&ds.adapter, &s.z_x, &target);
                for (j, v) in t.iter().enumerate() {
                    ts[[row, j]] = *v;
                }
                targets.push(target);
            }
            let out = generate(g, &ImageBatch::new(xs)?, &Transition::new(ts)?)?;
            for (row, target) in targets.iter().enumerate() {
                let img = out.data().index_axis(Axis(0), row).to_owned();
                let read = ShapesAttrs::from_vector(&crate::tasks::oracle_shapes(&img));
                for e in edit_set {
                    let entry = hits.entry(e.name()).or_insert((0, 0));
                    entry.1 += 1;
                    if e.satisfied(target, &read) {
                        entry.0 += 1;
                    }
                }
            }
            at = hi;
        }
    }
    let mut per_attr = BTreeMap::new();
    let mut num = 0usize;
    let mut den = 0usize;
    for (name, (h, t)) in &hits {
        per_attr.insert(name.to_string(), *h as f64 / *t as f64);
        num += h;
        den += t;
    }
    let average = if den == 0 { 0.0 } else { num as f64 / den as f64 };
    per_attr.insert("average".into(), average);
    Ok(AccuracyReport {
        per_attr,
        average,
        edits_scored: den,
    })
}

// ---- interpolation probe ----

fn edit_stat_and_direction<F: Scalar>(
    img: &Array3<F>,
    edit: &AttrEdit,
    target: &ShapesAttrs,
) -> (f64, f64) {
    use crate::tasks::{shapes_color_stat, shapes_stat};
    match edit {
        AttrEdit::CycleColor => (shapes_color_stat(img, target.color), 1.0),
        AttrEdit::FlipBrightness => (
            shapes_stat(img, crate::tasks::ATTR_BRIGHTNESS),
            if target.bright { 1.0 } else { -1.0 },
        ),
        AttrEdit::FlipSize => (
            shapes_stat(img, crate::tasks::ATTR_SIZE),
            if target.large { 1.0 } else { -1.0 },
        ),
        AttrEdit::FlipBorder => (
            shapes_stat(img, crate::tasks::ATTR_BORDER),
            if target.border { 1.0 } else { -1.0 },
        ),
    }
}

/// Evaluate `G(x, alpha * t_edit)` on a uniform alpha grid in [0, 1] and
/// return the fraction of adjacent steps whose oracle statistic moves
/// strictly toward the target.
pub fn interp_probe<F: Scalar>(
    g: &Generator<F>,
    sample: &Sample<F>,
    adapter: &TaskAdapter,
    edit: &AttrEdit,
    steps: usize,
) -> Result<f64> {
    assert!(steps >= 2, "interp_probe needs at least 2 steps");
    let target = {
        let cur = ShapesAttrs::from_vector(&sample.z_x);
        edit.apply(&cur)
    };
    let t_full = shapes_transition::<F>(adapter, &sample.z_x, &target);
    let d_t = t_full.len();
    let (c, h, w) = sample.x.dim();
    let mut xs = Array4::<F>::zeros((steps, c, h, w));
    let mut ts = Array2::<F>::zeros((steps, d_t));
    for i in 0..steps {
        xs.index_axis_mut(Axis(0), i).assign(&sample.x);
        let alpha = i as f64 / (steps - 1) as f64;
        for j in 0..d_t {
            ts[[i, j]] = fl::<F>(dbl(t_full[j]) * alpha);
        }
    }
    let out = generate(g, &ImageBatch::new(xs)?, &Transition::new(ts)?)?;
    let mut stats = Vec::with_capacity(steps);
    for i in 0..steps {
        let img = out.data().index_axis(Axis(0), i).to_owned();
        let (s, dir) = edit_stat_and_direction(&img, edit, &target);
        stats.push(s * dir);
    }
    let toward = stats.windows(2).filter(|wnd| wnd[1] - wnd[0] > 0.0).count();
    Ok(toward as f64 / (steps - 1) as f64)
}

/// Average monotone fraction over the first `n_inputs` samples and all
/// single-attribute edits.
pub fn interp_probe_avg<F: Scalar>(
    g: &Generator<F>,
    ds: &Dataset<F>,
    steps: usize,
    n_inputs: usize,
) -> Result<f64> {
    let take = ds.len().min(n_inputs.max(1));
    let mut acc = 0.0;
    let mut count = 0usize;
    for s in &ds.samples[..take] {
        for e in &AttrEdit::ALL {
            acc += interp_probe(g, s, &ds.adapter, e, steps)?;
            count += 1;
        }
    }
    Ok(acc / count as f64)
}

// ---- Lipschitz diagnostic ----

/// Max over sampled pairs of `||E(x,y) - E(x,ŷ)||_1 / ||(x,y) - (x,ŷ)||_1`
/// with flattened L1 norms in both spaces (the x component cancels).
/// Degenerate pairs (`ŷ = y`) are excluded. Diagnostic only.
pub fn lipschitz_estimate<F: Scalar>(
    nets: &Networks<F>,
    ds: &Dataset<F>,
    n_pairs: usize,
    seed: u64,
) -> Result<f64> {
    let mut rng = Rng::seeded(seed, 0x11b);
    let mut worst: f64 = 0.0;
    for _ in 0..n_pairs {
        let i = rng.below(ds.len());
        let j = rng.below(ds.len());
        let s = &ds.samples[i];
        let x = ImageBatch::new(stack_images(&[s.x.clone()]))?;
        let y = ImageBatch::new(stack_images(&[s.y.clone()]))?;
        let t_other = &ds.samples[j].t;
        let t = Transition::new(Array2::from_shape_fn((1, t_other.len()), |(_, k)| {
            t_other[k]
        }))?;
        let y_hat = generate(&nets.generator, &x, &t)?;
        let denom: f64 = y
            .data()
            .iter()
            .zip(y_hat.data().iter())
            .map(|(&a, &b)| (dbl(a) - dbl(b)).abs())
            .sum();
        if denom < 1e-9 {
            continue;
        }
        let p1 = crate::networks::encode(&nets.encoder, &x, &y)?;
        let p2 = crate::networks::encode(&nets.encoder, &x, &y_hat)?;
        let num: f64 = p1
            .mean
            .iter()
            .zip(p2.mean.iter())
            .map(|(&a, &b)| (dbl(a) - dbl(b)).abs())
            .sum();
        worst = worst.max(num / denom);
    }
    Ok(worst)
}

// ---- whole-report evaluation ----

/// Sample counts used per metric by [`evaluate`].
pub struct EvalOptions {
    pub n_recon: usize,
    pub n_accuracy: usize,
    pub n_fid: usize,
    pub n_interp_inputs: usize,
    pub interp_steps: usize,
    pub n_lipschitz: usize,
    pub embedder_seed: u64,
    pub embedder_steps: usize,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            n_recon: 64,
            n_accuracy: 64,
            n_fid: 128,
            n_interp_inputs: 8,
            interp_steps: 9,
            n_lipschitz: 64,
            embedder_seed: 0xE0BED,
            embedder_steps: 300,
        }
    }
}

/// Battery of fixed multi-attribute target configurations for the Fréchet
/// probe; edited outputs are compared against fresh renders of the same
/// targets, so a generator that ignores its transition scores poorly.
pub fn fid_target_battery() -> Vec<ShapesAttrs> {
    vec![
        ShapesAttrs { color: 0, bright: true, large: true, border: false },
        ShapesAttrs { color: 1, bright: false, large: false, border: true },
        ShapesAttrs { color: 2, bright: true, large: false, border: true },
        ShapesAttrs { color: 0, bright: false, large: true, border: false },
    ]
}

/// Fréchet proxy between target-conditioned fresh renders and edited outputs.
pub fn edit_fid<F: Scalar>(
    g: &Generator<F>,
    ds: &Dataset<F>,
    feature_net: &Embedder<F>,
    n: usize,
) -> Result<f64> {
    let battery = fid_target_battery();
    let take = ds.len().min(n.max(2));
    let mut rng = Rng::seeded(0xF1D, 7);
    let mut real = Vec::with_capacity(take);
    let mut edited_inputs = Vec::with_capacity(take);
    let d_t = ds.adapter.d_t;
    let mut ts = Array2::<F>::zeros((take, d_t));
    for (i, s) in ds.samples[..take].iter().enumerate() {
        let target = battery[i % battery.len()];
        let layout = (rng.uniform() * 4.0 - 2.0, rng.uniform() * 4.0 - 2.0);
        real.push(render_shapes::<F>(&target, layout));
        edited_inputs.push(s.x.clone());
        let t = shapes_transition::<F>(&ds.adapter, &s.z_x, &target);
        for (j, v) in t.iter().enumerate() {
            ts[[i, j]] = *v;
        }
    }
    let edited = generate(
        g,
        &ImageBatch::new(stack_images(&edited_inputs))?,
        &Transition::new(ts)?,
    )?;
    Ok(proxy_fid(&stack_images(&real), edited.data(), feature_net))
}

/// Full evaluation of a trained model on its dataset.
pub fn evaluate<F: Scalar>(
    nets: &Networks<F>,
    ds: &Dataset<F>,
    opts: &EvalOptions,
) -> Result<EvalReport> {
    // self-reconstruction quality
    let take = ds.len().min(opts.n_recon.max(1));
    let idxs: Vec<usize> = (0..take).collect();
    let triplet = ds.make_batch(&idxs)?;
    let zero = Transition::new(Array2::zeros((take, ds.adapter.d_t)))?;
    let x_self = generate(&nets.generator, &triplet.x, &zero)?;
    let ssim_v = ssim(&triplet.x, &x_self)?;
    let psnr_v = psnr(&triplet.x, &x_self)?;

    let (fid, attr, interp) = match ds.adapter.kind {
        TaskKind::AttrEdit => {
            let emb = train_embedder(ds, opts.embedder_seed, opts.embedder_steps)?;
            let fid = edit_fid(&nets.generator, ds, &emb, opts.n_fid)?;
            let acc = attr_accuracy(&nets.generator, ds, &single_edit_battery(), opts.n_accuracy)?;
            let interp =
                interp_probe_avg(&nets.generator, ds, opts.interp_steps, opts.n_interp_inputs)?;
            (fid, acc.per_attr, interp)
        }
        _ => {
            // domain / inpainting runs: translation quality against y
            let emb = train_embedder(ds, opts.embedder_seed, opts.embedder_steps)?;
            let y_hat = generate(&nets.generator, &triplet.x, &triplet.t)?;
            let fid = proxy_fid(triplet.y.data(), y_hat.data(), &emb);
            let mut map = BTreeMap::new();
            map.insert("average".into(), f64::NAN);
            (fid, map, f64::NAN)
        }
    };

    let lipschitz = lipschitz_estimate(nets, ds, opts.n_lipschitz, 0x11b5)?;
    Ok(EvalReport {
        ssim: ssim_v,
        psnr: psnr_v,
        proxy_fid: fid,
        attr_accuracy: attr,
        interp_monotonicity: interp,
        lipschitz_est: lipschitz,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array4;

    fn img(v: f64) -> ImageBatch<f64> {
        ImageBatch::new(Array4::from_elem((1, 3, 2, 2), v)).unwrap()
    }

    /// closed-form SSIM for two constant images
    fn ssim_const_oracle(a: f64, b: f64) -> f64 {
        let c1 = (0.01f64 * 2.0).powi(2);
        let c2 = (0.03f64 * 2.0).powi(2);
        ((2.0 * a * b + c1) * c2) / ((a * a + b * b + c1) * c2)
    }

    #[test]
    fn ssim_identity_and_constant_oracle() {
        let a = img(0.42);
        assert!((ssim(&a, &a).unwrap() - 1.0).abs() < 1e-12);
        let b = img(-0.42);
        let got = ssim(&a, &b).unwrap();
        let want = ssim_const_oracle(0.42, -0.42);
        assert!((got - want).abs() < 1e-9, "{got} vs {want}");
        let hi = img(1.0);
        let lo = img(-1.0);
        let got = ssim(&hi, &lo).unwrap();
        let want = ssim_const_oracle(1.0, -1.0);
        assert!((got - want).abs() < 1e-9);
        assert_eq!(ssim(&hi, &lo).unwrap(), ssim(&lo, &hi).unwrap());
    }

    #[test]
    fn psnr_cap_and_hand_value() {
        let a = img(0.5);
        assert_eq!(psnr(&a, &a).unwrap(), PSNR_CAP);
        // MSE = 0.04 with range 2 → 10 log10(100) = 20 dB
        let b = img(0.3);
        let got = psnr(&a, &b).unwrap();
        assert!((got - 20.0).abs() < 1e-9, "{got}");
        let c = img(0.1);
        assert!(psnr(&a, &c).unwrap() < got);
    }

    #[test]
    fn frechet_identical_sets_is_zero() {
        let mut rng = crate::rng::Rng::seeded(3, 1);
        let feats = Array2::from_shape_fn((40, 8), |_| rng.normal_f64());
        let d = frechet_distance(&feats, &feats);
        assert!(d < 1e-6, "{d}");
    }

    #[test]
    fn frechet_mean_shift_equals_squared_distance() {
        // equal covariances: distance reduces to the squared mean gap
        let mut rng = crate::rng::Rng::seeded(4, 1);
        let a = Array2::from_shape_fn((2000, 4), |_| rng.normal_f64());
        let mut b = a.clone();
        for mut row in b.rows_mut() {
            row[0] += 3.0;
        }
        let d = frechet_distance(&a, &b);
        assert!((d - 9.0).abs() < 1e-6, "{d}");
    }

    #[test]
    fn frechet_matches_direct_formula_on_random_sets() {
        let mut rng = crate::rng::Rng::seeded(5, 1);
        let a = Array2::from_shape_fn((60, 5), |_| rng.normal_f64());
        let b = Array2::from_shape_fn((50, 5), |(i, j)| {
            rng.normal_f64() * (1.0 + 0.1 * j as f64) + 0.2 * i as f64 / 50.0
        });
        let (m1, c1) = gaussian_stats(&a);
        let (m2, c2) = gaussian_stats(&b);
        let s1 = sqrtm_psd(&c1);
        let inner = s1.dot(&c2).dot(&s1);
        let (vals, _) = symmetric_eigen(&inner);
        let want = m1
            .iter()
            .zip(m2.iter())
            .map(|(x, y)| (x - y).powi(2))
            .sum::<f64>()
            + (0..5).map(|i| c1[[i, i]] + c2[[i, i]]).sum::<f64>()
            - 2.0 * vals.iter().map(|&v| v.max(0.0).sqrt()).sum::<f64>();
        let got = frechet_distance(&a, &b);
        assert!((got - want).abs() < 1e-9);
    }

    #[test]
    fn edit_batteries_have_expected_shapes() {
        assert_eq!(single_edit_battery().len(), 4);
        let doubles = double_edit_battery();
        assert_eq!(doubles.len(), 6);
        for pair in doubles {
            assert_eq!(pair.len(), 2);
            assert_ne!(pair[0].name(), pair[1].name());
        }
    }
}
