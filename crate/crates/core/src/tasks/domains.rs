//! Multi-domain style task: procedural grayscale scenes recolored through
//! per-domain color ramps. The transition is a mean-centered one-hot domain
//! indicator; the oracle classifies by distance of the pixel cloud to each
//! domain's color segment.

use super::{AttributeVector, Dataset, Sample, TaskAdapter};
use crate::rng::Rng;
use crate::scalar::{dbl, fl, Scalar};
use ndarray::{Array1, Array3};

pub const DOMAIN_SIDE: usize = 32;
pub const MAX_DOMAINS: usize = 6;

/// Color ramps (c0 -> c1) in [0, 1] rgb, one per domain. The neutral input
/// style is a plain grayscale ramp.
const RAMPS: [([f64; 3], [f64; 3]); MAX_DOMAINS] = [
    ([0.05, 0.05, 0.30], [0.95, 0.90, 0.20]),
    ([0.30, 0.05, 0.05], [0.10, 0.85, 0.90]),
    ([0.05, 0.30, 0.10], [0.90, 0.15, 0.85]),
    ([0.35, 0.00, 0.35], [0.10, 0.95, 0.30]),
    ([0.30, 0.25, 0.05], [0.20, 0.30, 0.95]),
    ([0.00, 0.30, 0.30], [0.95, 0.40, 0.10]),
];

const NEUTRAL: ([f64; 3], [f64; 3]) = ([0.0, 0.0, 0.0], [1.0, 1.0, 1.0]);

/// Procedural scene: three soft blobs over a diagonal gradient, in [0, 1].
fn scene(rng: &mut Rng) -> Vec<f64> {
    let side = DOMAIN_SIDE;
    let mut blobs = Vec::new();
    for _ in 0..3 {
        let cx = rng.uniform() * side as f64;
        let cy = rng.uniform() * side as f64;
        let sigma = 3.0 + rng.uniform() * 6.0;
        let amp = 0.4 + rng.uniform() * 0.6;
        blobs.push((cx, cy, sigma, amp));
    }
    let gdir = rng.uniform() * std::f64::consts::TAU;
    let (gx, gy) = (gdir.cos(), gdir.sin());
    let mut p = vec![0.0; side * side];
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for y in 0..side {
        for x in 0..side {
            let mut v = 0.3 * ((x as f64 * gx + y as f64 * gy) / side as f64);
            for &(cx, cy, sigma, amp) in &blobs {
                let d2 = (x as f64 - cx).powi(2) + (y as f64 - cy).powi(2);
                v += amp * (-d2 / (2.0 * sigma * sigma)).exp();
            }
            lo = lo.min(v);
            hi = hi.max(v);
            p[y * side + x] = v;
        }
    }
    let span = (hi - lo).max(1e-9);
    for v in &mut p {
        *v = (*v - lo) / span;
    }
    p
}

fn apply_ramp<F: Scalar>(p: &[f64], ramp: &([f64; 3], [f64; 3])) -> Array3<F> {
    let side = DOMAIN_SIDE;
    let mut img = Array3::<F>::zeros((3, side, side));
    for y in 0..side {
        for x in 0..side {
            let v = p[y * side + x];
            for c in 0..3 {
                let col = ramp.0[c] + (ramp.1[c] - ramp.0[c]) * v;
                img[[c, y, x]] = fl(col * 2.0 - 1.0);
            }
        }
    }
    img
}

pub fn render_domain<F: Scalar>(scene_seed: u64, domain: Option<usize>) -> Array3<F> {
    let mut rng = Rng::seeded(scene_seed, 0xD0);
    let p = scene(&mut rng);
    match domain {
        Some(k) => apply_ramp(&p, &RAMPS[k]),
        None => apply_ramp(&p, &NEUTRAL),
    }
}

/// Mean squared distance of the pixel cloud to the segment `[c0, c1]` of a
/// ramp, in [-1, 1] color space.
fn ramp_distance<F: Scalar>(img: &Array3<F>, ramp: &([f64; 3], [f64; 3])) -> f64 {
    let (_, h, w) = img.dim();
    let c0: Vec<f64> = ramp.0.iter().map(|&v| v * 2.0 - 1.0).collect();
    let c1: Vec<f64> = ramp.1.iter().map(|&v| v * 2.0 - 1.0).collect();
    let diff: Vec<f64> = c1.iter().zip(&c0).map(|(a, b)| a - b).collect();
    let len2: f64 = diff.iter().map(|d| d * d).sum::<f64>().max(1e-12);
    let mut acc = 0.0;
    for y in 0..h {
        for x in 0..w {
            let px = [
                dbl(img[[0, y, x]]),
                dbl(img[[1, y, x]]),
                dbl(img[[2, y, x]]),
            ];
            let dot: f64 = (0..3).map(|c| (px[c] - c0[c]) * diff[c]).sum();
            let tpar = (dot / len2).clamp(0.0, 1.0);
            let mut d2 = 0.0;
            for c in 0..3 {
                let proj = c0[c] + tpar * diff[c];
                d2 += (px[c] - proj).powi(2);
            }
            acc += d2;
        }
    }
    acc / (h * w) as f64
}

/// Nearest-ramp classification as a one-hot vector over `k` domains.
pub fn oracle_domain<F: Scalar>(img: &Array3<F>, k: usize) -> AttributeVector {
    let best = (0..k)
        .min_by(|&a, &b| {
            ramp_distance(img, &RAMPS[a])
                .partial_cmp(&ramp_distance(img, &RAMPS[b]))
                .unwrap()
        })
        .unwrap();
    let mut z = vec![0.0; k];
    z[best] = 1.0;
    AttributeVector::new(z)
}

/// Continuous statistic: affinity (negative distance) to one domain's ramp.
pub fn domain_stat<F: Scalar>(img: &Array3<F>, domain: usize) -> f64 {
    -ramp_distance(img, &RAMPS[domain])
}

/// Unpaired multi-domain dataset: neutral-style scenes as inputs, styled
/// independent scenes as outputs, `t = one_hot(domain) - 1/k`.
pub fn gen_multi_domain<F: Scalar>(n: usize, k_domains: usize, seed: u64) -> Dataset<F> {
    assert!(n >= 1);
    assert!(
        (2..=MAX_DOMAINS).contains(&k_domains),
        "k_domains must be in 2..={MAX_DOMAINS}"
    );
    let adapter = TaskAdapter::multi_domain(k_domains);
    let mut rng = Rng::seeded(seed, 0xD1);
    let mut samples = Vec::with_capacity(n);
    for _ in 0..n {
        let sx = (rng.uniform() * u32::MAX as f64) as u64;
        let sy = (rng.uniform() * u32::MAX as f64) as u64;
        let domain = rng.below(k_domains);
        let z_x = AttributeVector::new(vec![0.0; k_domains]);
        let mut zy = vec![0.0; k_domains];
        zy[domain] = 1.0;
        let z_y = AttributeVector::new(zy);
        let raw = adapter.make_transition(&z_x, &z_y);
        let t: Array1<F> = Array1::from_iter(raw.iter().map(|&v| fl::<F>(v)));
        samples.push(Sample {
            x: render_domain(sx, None),
            y: render_domain(sy, Some(domain)),
            t,
            paired: false,
            z_x,
            z_y,
            mask_center: None,
        });
    }
    Dataset {
        adapter,
        seed,
        samples,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn oracle_recovers_domain_on_held_out_renders() {
        for k in [2usize, 4, 6] {
            for seed in 0..100u64 {
                let domain = (seed as usize) % k;
                let img = render_domain::<f64>(1000 + seed, Some(domain));
                let z = oracle_domain(&img, k);
                let got = z.z.iter().position(|&v| v == 1.0).unwrap();
                assert_eq!(got, domain, "k={k} seed={seed}");
            }
        }
    }

    #[test]
    fn k4_transitions_are_centered_one_hots() {
        let ds = gen_multi_domain::<f64>(32, 4, 5);
        assert_eq!(ds.adapter.d_t, 4);
        for s in &ds.samples {
            let sum: f64 = s.t.iter().sum();
            assert!(sum.abs() < 1e-9);
            let hot = s
                .t
                .iter()
                .filter(|&&v| (v - 0.75).abs() < 1e-9)
                .count();
            assert_eq!(hot, 1);
        }
    }

    #[test]
    fn fused_transition_is_a_legal_value() {
        use crate::types::Transition;
        // 0.5*(e1 + e2), centered: a legal probe vector for generalization
        let k = 4usize;
        let mut fused = vec![0.0f64; k];
        fused[0] = 0.5;
        fused[1] = 0.5;
        let centered: Vec<f64> = fused.iter().map(|v| v - 1.0 / k as f64).collect();
        let t = Transition::new(ndarray::Array2::from_shape_vec((1, k), centered).unwrap());
        assert!(t.is_ok());
    }
}
