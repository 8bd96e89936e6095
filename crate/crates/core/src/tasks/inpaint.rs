//! Inpainting task: complete synthetic renders with a square region erased.
//! The transition encodes the mask location plus a direction coordinate:
//! `t = (cx_frac, cy_frac, dir)` with `dir = +1` for mask -> complete and
//! `dir = -1` for complete -> mask. Negation flips only the direction.

use super::shapes::{render_shapes, ShapesAttrs, SHAPES_SIDE};
use super::{Dataset, Sample, TaskAdapter};
use crate::rng::Rng;
use crate::scalar::{dbl, fl, Scalar};
use ndarray::{Array1, Array3};

pub const INPAINT_D_T: usize = 3;

/// Apply the transition's mask semantics to a complete image: erase the
/// square at `(cx_frac, cy_frac)` to 0. The `mask_size` is task metadata.
pub fn apply_mask<F: Scalar>(img: &Array3<F>, t: &[f64], mask_size: usize) -> Array3<F> {
    let (_, h, w) = img.dim();
    let cx = (t[0] * w as f64).round() as isize;
    let cy = (t[1] * h as f64).round() as isize;
    let half = mask_size as isize / 2;
    let mut out = img.clone();
    for y in (cy - half).max(0)..(cy - half + mask_size as isize).min(h as isize) {
        for x in (cx - half).max(0)..(cx - half + mask_size as isize).min(w as isize) {
            for c in 0..3 {
                out[[c, y as usize, x as usize]] = F::zero();
            }
        }
    }
    out
}

/// Paired inpainting dataset over complete shape renders.
pub fn gen_inpaint<F: Scalar>(n: usize, mask_size: usize, seed: u64) -> Dataset<F> {
    assert!(n >= 1);
    assert!(
        mask_size >= 2 && mask_size < SHAPES_SIDE,
        "mask_size must be in 2..{SHAPES_SIDE}"
    );
    let adapter = TaskAdapter::inpaint(mask_size);
    let mut rng = Rng::seeded(seed, 0x1B);
    let side = SHAPES_SIDE;
    let half = mask_size / 2;
    let mut samples = Vec::with_capacity(n);
    for _ in 0..n {
        let attrs = ShapesAttrs::random(&mut rng);
        let layout = (rng.uniform() * 4.0 - 2.0, rng.uniform() * 4.0 - 2.0);
        let y: Array3<F> = render_shapes(&attrs, layout);
        // keep the mask fully inside the image
        let cx_pix = half + rng.below(side - mask_size + 1);
        let cy_pix = half + rng.below(side - mask_size + 1);
        let cx = cx_pix as f64 / side as f64;
        let cy = cy_pix as f64 / side as f64;
        let t_raw = [cx, cy, 1.0];
        let x = apply_mask(&y, &t_raw, mask_size);
        let t: Array1<F> = Array1::from_iter(t_raw.iter().map(|&v| fl::<F>(v)));
        samples.push(Sample {
            x,
            y,
            t,
            paired: true,
            z_x: attrs.to_vector(),
            z_y: attrs.to_vector(),
            mask_center: Some((cx, cy)),
        });
    }
    Dataset {
        adapter,
        seed,
        samples,
    }
}
