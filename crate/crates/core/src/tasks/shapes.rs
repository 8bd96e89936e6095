//! Shapes-Attr: 32x32 renders of a filled disk with four controllable
//! attributes, every one recoverable by closed-form pixel statistics.
//!
//! Attribute vector layout (`{-1, +1}` entries, d = 6):
//!   0..3  fill color, one-vs-rest over {R, G, B} (exactly one +1)
//!   3     background brightness (+1 bright, -1 dark)
//!   4     size (+1 large disk, -1 small)
//!   5     border (+1 draws a gray ring inside the disk edge)

use super::{AttributeVector, Dataset, Sample, TaskAdapter};
use crate::rng::Rng;
use crate::scalar::{dbl, fl, Scalar};
use ndarray::{Array1, Array3};

pub const SHAPES_SIDE: usize = 32;
pub const SHAPES_D_T: usize = 6;

/// Logical attributes (accuracy is reported per logical attribute).
pub const N_LOGICAL_ATTRS: usize = 4;
pub const ATTR_COLOR: usize = 0;
pub const ATTR_BRIGHTNESS: usize = 1;
pub const ATTR_SIZE: usize = 2;
pub const ATTR_BORDER: usize = 3;

const BG_BRIGHT: f64 = 0.6;
const BG_DARK: f64 = -0.6;
const FILL_HI: f64 = 0.9;
const FILL_LO: f64 = -0.9;
const BORDER_VAL: f64 = 0.0;
const R_SMALL: f64 = 6.0;
const R_LARGE: f64 = 10.0;
const BORDER_WIDTH: f64 = 2.0;
const JITTER: f64 = 2.0;

/// Structured attribute description of one render.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShapesAttrs {
    /// Dominant channel: 0 = red, 1 = green, 2 = blue.
    pub color: usize,
    pub bright: bool,
    pub large: bool,
    pub border: bool,
}

impl ShapesAttrs {
    pub fn to_vector(&self) -> AttributeVector {
        let mut z = vec![-1.0; SHAPES_D_T];
        z[self.color] = 1.0;
        z[3] = if self.bright { 1.0 } else { -1.0 };
        z[4] = if self.large { 1.0 } else { -1.0 };
        z[5] = if self.border { 1.0 } else { -1.0 };
        AttributeVector::new(z)
    }

    pub fn from_vector(v: &AttributeVector) -> Self {
        let color = (0..3)
            .max_by(|&a, &b| v.z[a].partial_cmp(&v.z[b]).unwrap())
            .unwrap();
        ShapesAttrs {
            color,
            bright: v.z[3] > 0.0,
            large: v.z[4] > 0.0,
            border: v.z[5] > 0.0,
        }
    }

    pub fn random(rng: &mut Rng) -> Self {
        ShapesAttrs {
            color: rng.below(3),
            bright: rng.below(2) == 1,
            large: rng.below(2) == 1,
            border: rng.below(2) == 1,
        }
    }
}

/// Deterministic render of one sample. `layout` jitters the disk center.
pub fn render_shapes<F: Scalar>(attrs: &ShapesAttrs, layout: (f64, f64)) -> Array3<F> {
    let side = SHAPES_SIDE;
    let bg = if attrs.bright { BG_BRIGHT } else { BG_DARK };
    let r = if attrs.large { R_LARGE } else { R_SMALL };
    let cx = side as f64 / 2.0 + layout.0.clamp(-JITTER, JITTER);
    let cy = side as f64 / 2.0 + layout.1.clamp(-JITTER, JITTER);
    let mut fill = [FILL_LO; 3];
    fill[attrs.color] = FILL_HI;
    let mut img = Array3::<F>::from_elem((3, side, side), fl(bg));
    for py in 0..side {
        for px in 0..side {
            let dx = px as f64 + 0.5 - cx;
            let dy = py as f64 + 0.5 - cy;
            let d = (dx * dx + dy * dy).sqrt();
            if d < r {
                let vals = if attrs.border && d >= r - BORDER_WIDTH {
                    [BORDER_VAL; 3]
                } else {
                    fill
                };
                for c in 0..3 {
                    img[[c, py, px]] = fl(vals[c]);
                }
            }
        }
    }
    img
}

struct Region {
    area: usize,
    cx: f64,
    cy: f64,
    r_hat: f64,
}

fn corners_mean<F: Scalar>(img: &Array3<F>) -> f64 {
    let side = img.dim().1;
    let p = 4usize;
    let mut sum = 0.0;
    let mut count = 0usize;
    for (y0, x0) in [(0, 0), (0, side - p), (side - p, 0), (side - p, side - p)] {
        for y in y0..y0 + p {
            for x in x0..x0 + p {
                for c in 0..3 {
                    sum += dbl(img[[c, y, x]]);
                }
                count += 3;
            }
        }
    }
    sum / count as f64
}

fn detect_region<F: Scalar>(img: &Array3<F>, bg: f64) -> Region {
    let side = img.dim().1;
    let mut area = 0usize;
    let mut sx = 0.0;
    let mut sy = 0.0;
    for y in 0..side {
        for x in 0..side {
            let mut dev: f64 = 0.0;
            for c in 0..3 {
                dev = dev.max((dbl(img[[c, y, x]]) - bg).abs());
            }
            if dev > 0.5 {
                area += 1;
                sx += x as f64 + 0.5;
                sy += y as f64 + 0.5;
            }
        }
    }
    if area == 0 {
        return Region {
            area: 0,
            cx: side as f64 / 2.0,
            cy: side as f64 / 2.0,
            r_hat: R_SMALL,
        };
    }
    Region {
        area,
        cx: sx / area as f64,
        cy: sy / area as f64,
        r_hat: (area as f64 / std::f64::consts::PI).sqrt(),
    }
}

fn zone_mean<F: Scalar>(img: &Array3<F>, reg: &Region, d_lo: f64, d_hi: f64) -> [f64; 3] {
    let side = img.dim().1;
    let mut sums = [0.0f64; 3];
    let mut count = 0usize;
    for y in 0..side {
        for x in 0..side {
            let dx = x as f64 + 0.5 - reg.cx;
            let dy = y as f64 + 0.5 - reg.cy;
            let d = (dx * dx + dy * dy).sqrt();
            if d >= d_lo && d < d_hi {
                for c in 0..3 {
                    sums[c] += dbl(img[[c, y, x]]);
                }
                count += 1;
            }
        }
    }
    if count == 0 {
        return [0.0; 3];
    }
    [
        sums[0] / count as f64,
        sums[1] / count as f64,
        sums[2] / count as f64,
    ]
}

fn dominant(core: &[f64; 3]) -> usize {
    (0..3)
        .max_by(|&a, &b| core[a].partial_cmp(&core[b]).unwrap())
        .unwrap()
}

/// Closed-form attribute readout. Exact on renders; well-defined on any
/// image in `[-1, 1]`.
pub fn oracle_shapes<F: Scalar>(img: &Array3<F>) -> AttributeVector {
    let bg = corners_mean(img);
    let reg = detect_region(img, bg);
    let core = zone_mean(img, &reg, 0.0, 0.45 * reg.r_hat.max(2.0));
    let color = dominant(&core);
    let ring = zone_mean(img, &reg, reg.r_hat - 1.6, reg.r_hat - 0.4);
    let border = core[color] - ring[color] > 0.45;
    ShapesAttrs {
        color,
        bright: bg > 0.0,
        large: reg.area > 200,
        border,
    }
    .to_vector()
}

/// Continuous statistic for the interpolation probe, by logical attribute.
pub fn shapes_stat<F: Scalar>(img: &Array3<F>, attr: usize) -> f64 {
    let bg = corners_mean(img);
    let reg = detect_region(img, bg);
    match attr {
        // color: signed dominance of the strongest non-... callers pass the
        // channel via `shapes_color_stat`; this slot reports the core red mean
        ATTR_COLOR => {
            let core = zone_mean(img, &reg, 0.0, 0.45 * reg.r_hat.max(2.0));
            core[0]
        }
        ATTR_BRIGHTNESS => bg,
        ATTR_SIZE => reg.area as f64,
        ATTR_BORDER => {
            let core = zone_mean(img, &reg, 0.0, 0.45 * reg.r_hat.max(2.0));
            let ring = zone_mean(img, &reg, reg.r_hat - 1.6, reg.r_hat - 0.4);
            let c = dominant(&core);
            core[c] - ring[c]
        }
        other => panic!("shapes task has 4 logical attributes, got {other}"),
    }
}

/// Core mean of one specific color channel (continuous color statistic).
pub fn shapes_color_stat<F: Scalar>(img: &Array3<F>, channel: usize) -> f64 {
    let bg = corners_mean(img);
    let reg = detect_region(img, bg);
    let core = zone_mean(img, &reg, 0.0, 0.45 * reg.r_hat.max(2.0));
    core[channel]
}

/// Unpaired Shapes-Attr dataset: each `x` is matched with an independently
/// drawn `y`; the stored transition is `0.5 * (z_y - z_x)`.
pub fn gen_shapes_attr<F: Scalar>(n: usize, seed: u64) -> Dataset<F> {
    assert!(n >= 1);
    let adapter = TaskAdapter::attr_edit();
    let mut rng = Rng::seeded(seed, 0x5A);
    let mut samples = Vec::with_capacity(n);
    for _ in 0..n {
        let ax = ShapesAttrs::random(&mut rng);
        let lx = (rng.uniform() * 4.0 - 2.0, rng.uniform() * 4.0 - 2.0);
        let ay = ShapesAttrs::random(&mut rng);
        let ly = (rng.uniform() * 4.0 - 2.0, rng.uniform() * 4.0 - 2.0);
        let z_x = ax.to_vector();
        let z_y = ay.to_vector();
        let raw = adapter.make_transition(&z_x, &z_y);
        let scale = adapter.load_scale();
        let t: Array1<F> = Array1::from_iter(raw.iter().map(|&v| fl::<F>(v * scale)));
        samples.push(Sample {
            x: render_shapes(&ax, lx),
            y: render_shapes(&ay, ly),
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
    fn oracle_recovers_attributes_on_1000_renders() {
        let mut rng = Rng::seeded(99, 0);
        for i in 0..1000 {
            let attrs = ShapesAttrs::random(&mut rng);
            let layout = (rng.uniform() * 4.0 - 2.0, rng.uniform() * 4.0 - 2.0);
            let img = render_shapes::<f64>(&attrs, layout);
            let read = ShapesAttrs::from_vector(&oracle_shapes(&img));
            assert_eq!(read, attrs, "render {i} misread");
        }
    }

    #[test]
    fn oracle_survives_u8_quantization() {
        let mut rng = Rng::seeded(100, 0);
        for _ in 0..200 {
            let attrs = ShapesAttrs::random(&mut rng);
            let layout = (rng.uniform() * 4.0 - 2.0, rng.uniform() * 4.0 - 2.0);
            let img = render_shapes::<f64>(&attrs, layout);
            let q = super::super::from_u8::<f64>(
                &super::super::to_u8(&img),
                SHAPES_SIDE,
                SHAPES_SIDE,
            );
            let read = ShapesAttrs::from_vector(&oracle_shapes(&q));
            assert_eq!(read, attrs);
        }
    }

    #[test]
    fn dataset_is_deterministic_and_unpaired() {
        let a = gen_shapes_attr::<f32>(8, 7);
        let b = gen_shapes_attr::<f32>(8, 7);
        for (sa, sb) in a.samples.iter().zip(&b.samples) {
            assert_eq!(sa.x, sb.x);
            assert_eq!(sa.y, sb.y);
            assert_eq!(sa.t, sb.t);
            assert!(!sa.paired);
        }
        let c = gen_shapes_attr::<f32>(8, 8);
        assert!(a.samples.iter().zip(&c.samples).any(|(x, y)| x.x != y.x));
    }

    #[test]
    fn loaded_transitions_are_half_of_raw_difference() {
        let ds = gen_shapes_attr::<f64>(64, 3);
        for s in &ds.samples {
            for (i, &tv) in s.t.iter().enumerate() {
                let raw = s.z_y.z[i] - s.z_x.z[i];
                assert_eq!(tv, raw * 0.5);
                assert!(tv == -1.0 || tv == 0.0 || tv == 1.0);
            }
        }
    }
}
