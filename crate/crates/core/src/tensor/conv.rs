//! Convolution ops: im2col-based `conv2d` and its transposed counterpart.
//! Work is split per sample and run in parallel; cross-sample reductions
//! (weight/bias gradients) are folded serially in index order so results do
//! not depend on thread scheduling.

use super::{matmul, Tape, Var};
use crate::scalar::Scalar;
use ndarray::{
    Array1, Array2, Array3, Array4, ArrayView2, ArrayView3, ArrayViewMut3, Axis, Ix4,
};
use rayon::prelude::*;

#[derive(Debug, Clone, Copy)]
pub(crate) struct ConvGeom {
    pub ci: usize,
    pub h: usize,
    pub w: usize,
    pub k: usize,
    pub s: usize,
    pub p: usize,
    pub oh: usize,
    pub ow: usize,
}

impl ConvGeom {
    pub fn new(ci: usize, h: usize, w: usize, k: usize, s: usize, p: usize) -> Self {
        assert!(h + 2 * p >= k && w + 2 * p >= k, "kernel larger than input");
        let oh = (h + 2 * p - k) / s + 1;
        let ow = (w + 2 * p - k) / s + 1;
        ConvGeom {
            ci,
            h,
            w,
            k,
            s,
            p,
            oh,
            ow,
        }
    }

    fn rows(&self) -> usize {
        self.ci * self.k * self.k
    }

    fn cols(&self) -> usize {
        self.oh * self.ow
    }
}

/// Unfold one sample `[ci, h, w]` into patch columns `[ci*k*k, oh*ow]`.
fn im2col_sample<F: Scalar>(x: &ArrayView3<'_, F>, g: &ConvGeom, cols: &mut Array2<F>) {
    let xs = x.to_slice_or_panic();
    let cs = cols.as_slice_mut().expect("im2col: contiguous cols");
    let l = g.cols();
    for c in 0..g.ci {
        for ky in 0..g.k {
            for kx in 0..g.k {
                let r = (c * g.k + ky) * g.k + kx;
                let dst_base = r * l;
                for oy in 0..g.oh {
                    let dst = &mut cs[dst_base + oy * g.ow..dst_base + (oy + 1) * g.ow];
                    let iy = (oy * g.s + ky) as isize - g.p as isize;
                    if iy < 0 || iy >= g.h as isize {
                        dst.fill(F::zero());
                        continue;
                    }
                    let src_row = c * g.h * g.w + iy as usize * g.w;
                    // valid ox satisfy 0 <= ox*s + kx - p < w
                    let off = kx as isize - g.p as isize;
                    let ox0 = if off >= 0 {
                        0usize
                    } else {
                        ((-off) as usize).div_ceil(g.s)
                    }
                    .min(g.ow);
                    let lim = g.w as isize - off; // need ox*s < lim
                    let ox1 = if lim <= 0 {
                        ox0
                    } else {
                        ((((lim - 1) as usize) / g.s) + 1).clamp(ox0, g.ow)
                    };
                    dst[..ox0].fill(F::zero());
                    if g.s == 1 {
                        let start = (src_row as isize + ox0 as isize + off) as usize;
                        dst[ox0..ox1].copy_from_slice(&xs[start..start + (ox1 - ox0)]);
                    } else {
                        for (ox, d) in dst.iter_mut().enumerate().take(ox1).skip(ox0) {
                            let ix = (ox * g.s) as isize + off;
                            *d = xs[src_row + ix as usize];
                        }
                    }
                    dst[ox1..].fill(F::zero());
                }
            }
        }
    }
}

/// Fold patch columns back onto an image, accumulating overlaps.
fn col2im_sample<F: Scalar>(cols: &ArrayView2<'_, F>, g: &ConvGeom, out: &mut Array3<F>) {
    let cs = cols.to_slice_or_panic();
    let os = out.as_slice_mut().expect("col2im: contiguous out");
    let l = g.cols();
    for c in 0..g.ci {
        for ky in 0..g.k {
            for kx in 0..g.k {
                let r = (c * g.k + ky) * g.k + kx;
                let src_base = r * l;
                for oy in 0..g.oh {
                    let iy = (oy * g.s + ky) as isize - g.p as isize;
                    if iy < 0 || iy >= g.h as isize {
                        continue;
                    }
                    let dst_row = c * g.h * g.w + iy as usize * g.w;
                    let src = &cs[src_base + oy * g.ow..src_base + (oy + 1) * g.ow];
                    let off = kx as isize - g.p as isize;
                    for (ox, &v) in src.iter().enumerate() {
                        let ix = (ox * g.s) as isize + off;
                        if ix >= 0 && ix < g.w as isize {
                            os[dst_row + ix as usize] += v;
                        }
                    }
                }
            }
        }
    }
}

trait SliceOrPanic<F> {
    fn to_slice_or_panic(&self) -> &[F];
}

impl<F: Scalar> SliceOrPanic<F> for ArrayView3<'_, F> {
    fn to_slice_or_panic(&self) -> &[F] {
        self.to_slice().expect("contiguous rank-3 view")
    }
}

impl<F: Scalar> SliceOrPanic<F> for ArrayView2<'_, F> {
    fn to_slice_or_panic(&self) -> &[F] {
        self.to_slice().expect("contiguous rank-2 view")
    }
}

impl<F: Scalar> Tape<F> {
    /// 2-D convolution. `x: [n, ci, h, w]`, `w: [o, ci, k, k]`, `b: [o]`.
    pub fn conv2d(&self, x: Var, w: Var, b: Var, stride: usize, pad: usize) -> Var {
        let xv = self.value(x);
        let wv = self.value(w);
        let bv = self.value(b);
        let x4 = xv.view().into_dimensionality::<Ix4>().expect("conv input rank 4");
        let w4 = wv.view().into_dimensionality::<Ix4>().expect("conv weight rank 4");
        let (o, ci, k, k2) = w4.dim();
        assert_eq!(k, k2, "square kernels only");
        assert_eq!(x4.dim().1, ci, "conv channel mismatch");
        let geom = ConvGeom::new(ci, x4.dim().2, x4.dim().3, k, stride, pad);
        let n = x4.dim().0;

        let w_mat = w4.into_shape_with_order((o, geom.rows())).expect("weight reshape");
        let b1 = bv.view().into_dimensionality::<ndarray::Ix1>().expect("bias rank 1");
        let mut y = Array4::<F>::zeros((n, o, geom.oh, geom.ow));
        {
            let jobs: Vec<(ArrayViewMut3<'_, F>, ArrayView3<'_, F>)> =
                y.outer_iter_mut().zip(x4.outer_iter()).collect();
            jobs.into_par_iter().for_each(|(mut yn, xn)| {
                let mut cols = Array2::<F>::zeros((geom.rows(), geom.cols()));
                im2col_sample(&xn, &geom, &mut cols);
                let mut ym = yn
                    .view_mut()
                    .into_shape_with_order((o, geom.cols()))
                    .expect("conv out reshape");
                super::matmul_into(&w_mat, &cols.view(), &mut ym);
                for (mut row, &bias) in ym.rows_mut().into_iter().zip(b1.iter()) {
                    row.mapv_inplace(|v| v + bias);
                }
            });
        }

        self.push(y.into_dyn(), Box::new(move |g, sink| {
            let x4 = xv.view().into_dimensionality::<Ix4>().unwrap();
            let w4 = wv.view().into_dimensionality::<Ix4>().unwrap();
            let w_mat = w4.into_shape_with_order((o, geom.rows())).unwrap();
            let g4 = g.view().into_dimensionality::<Ix4>().unwrap();

            let mut gx = Array4::<F>::zeros(x4.dim());
            let jobs: Vec<(ArrayViewMut3<'_, F>, ArrayView3<'_, F>, ArrayView3<'_, F>)> = {
                let mut v = Vec::with_capacity(n);
                for ((gxn, xn), gn) in gx
                    .outer_iter_mut()
                    .zip(x4.outer_iter())
                    .zip(g4.outer_iter())
                {
                    v.push((gxn, xn, gn));
                }
                v
            };
            let partials: Vec<(Array2<F>, Array1<F>)> = jobs
                .into_par_iter()
                .map(|(mut gxn, xn, gn)| {
                    let gm = gn
                        .into_shape_with_order((o, geom.cols()))
                        .expect("grad reshape");
                    let mut cols = Array2::<F>::zeros((geom.rows(), geom.cols()));
                    im2col_sample(&xn, &geom, &mut cols);
                    let gw_n = matmul(&gm, &cols.t());
                    let gb_n = gm.sum_axis(Axis(1));
                    let gcols = matmul(&w_mat.t(), &gm);
                    let mut gxa = Array3::<F>::zeros(xn.dim());
                    col2im_sample(&gcols.view(), &geom, &mut gxa);
                    gxn.assign(&gxa);
                    (gw_n, gb_n)
                })
                .collect();

            let mut gw = Array2::<F>::zeros((o, geom.rows()));
            let mut gb = Array1::<F>::zeros(o);
            for (gw_n, gb_n) in partials {
                gw += &gw_n;
                gb += &gb_n;
            }
            sink(x.0, gx.into_dyn());
            sink(
                w.0,
                gw.into_shape_with_order((o, ci, k, k)).unwrap().into_dyn(),
            );
            sink(b.0, gb.into_dyn());
        }))
    }

    /// Transposed 2-D convolution. `x: [n, ci, h, w]`, `w: [ci, o, k, k]`,
    /// output spatial size `(h-1)*stride - 2*pad + k`.
    pub fn conv_transpose2d(&self, x: Var, w: Var, b: Var, stride: usize, pad: usize) -> Var {
        let xv = self.value(x);
        let wv = self.value(w);
        let bv = self.value(b);
        let x4 = xv.view().into_dimensionality::<Ix4>().expect("convT input rank 4");
        let w4 = wv.view().into_dimensionality::<Ix4>().expect("convT weight rank 4");
        let (ci, o, k, k2) = w4.dim();
        assert_eq!(k, k2, "square kernels only");
        assert_eq!(x4.dim().1, ci, "convT channel mismatch");
        let (n, _, h, w_in) = x4.dim();
        let oh = (h - 1) * stride + k - 2 * pad;
        let ow = (w_in - 1) * stride + k - 2 * pad;
        // the transposed conv is the adjoint of a conv with this geometry
        let geom = ConvGeom::new(o, oh, ow, k, stride, pad);
        assert_eq!((geom.oh, geom.ow), (h, w_in), "convT geometry");
        let w_mat = w4.into_shape_with_order((ci, o * k * k)).expect("weight reshape");
        let b1 = bv.view().into_dimensionality::<ndarray::Ix1>().expect("bias rank 1");

        let mut y = Array4::<F>::zeros((n, o, oh, ow));
        {
            let jobs: Vec<(ArrayViewMut3<'_, F>, ArrayView3<'_, F>)> =
                y.outer_iter_mut().zip(x4.outer_iter()).collect();
            jobs.into_par_iter().for_each(|(mut yn, xn)| {
                let xm = xn.into_shape_with_order((ci, h * w_in)).expect("convT reshape");
                let cols = matmul(&w_mat.t(), &xm);
                let mut acc = Array3::<F>::zeros((o, oh, ow));
                col2im_sample(&cols.view(), &geom, &mut acc);
                for (mut plane, &bias) in acc.outer_iter_mut().zip(b1.iter()) {
                    plane.mapv_inplace(|v| v + bias);
                }
                yn.assign(&acc);
            });
        }

        self.push(y.into_dyn(), Box::new(move |g, sink| {
            let x4 = xv.view().into_dimensionality::<Ix4>().unwrap();
            let w4 = wv.view().into_dimensionality::<Ix4>().unwrap();
            let w_mat = w4.into_shape_with_order((ci, o * k * k)).unwrap();
            let g4 = g.view().into_dimensionality::<Ix4>().unwrap();

            let mut gx = Array4::<F>::zeros(x4.dim());
            let jobs: Vec<(ArrayViewMut3<'_, F>, ArrayView3<'_, F>, ArrayView3<'_, F>)> = {
                let mut v = Vec::with_capacity(n);
                for ((gxn, xn), gn) in gx
                    .outer_iter_mut()
                    .zip(x4.outer_iter())
                    .zip(g4.outer_iter())
                {
                    v.push((gxn, xn, gn));
                }
                v
            };
            let partials: Vec<(Array2<F>, Array1<F>)> = jobs
                .into_par_iter()
                .map(|(mut gxn, xn, gn)| {
                    let mut cols_g = Array2::<F>::zeros((geom.rows(), geom.cols()));
                    im2col_sample(&gn, &geom, &mut cols_g);
                    let xm = xn.into_shape_with_order((ci, h * w_in)).unwrap();
                    let gw_n = matmul(&xm, &cols_g.t());
                    let gxm = matmul(&w_mat, &cols_g.view());
                    gxn.assign(&gxm.into_shape_with_order((ci, h, w_in)).expect("gx reshape"));
                    let mut gb_n = Array1::<F>::zeros(o);
                    for (j, plane) in gn.outer_iter().enumerate() {
                        let mut s = F::zero();
                        for &v in plane.iter() {
                            s += v;
                        }
                        gb_n[j] = s;
                    }
                    (gw_n, gb_n)
                })
                .collect();

            let mut gw = Array2::<F>::zeros((ci, o * k * k));
            let mut gb = Array1::<F>::zeros(o);
            for (gw_n, gb_n) in partials {
                gw += &gw_n;
                gb += &gb_n;
            }
            sink(x.0, gx.into_dyn());
            sink(
                w.0,
                gw.into_shape_with_order((ci, o, k, k)).unwrap().into_dyn(),
            );
            sink(b.0, gb.into_dyn());
        }))
    }
}
