//! Instance normalization with learnable per-channel affine parameters.
//! Hot loops run on raw contiguous slices; tape values are always standard
//! layout.

use super::{Tape, Var};
use crate::scalar::{fl, Scalar};
use ndarray::{Array1, Array2, Array4, ArrayD, Ix1, Ix4, IxDyn};

/// Four-lane unrolled sum; fixed accumulation order keeps results
/// deterministic while breaking the serial dependency chain.
#[inline]
pub(crate) fn fast_sum<F: Scalar>(xs: &[F]) -> F {
    let mut acc = [F::zero(); 4];
    let chunks = xs.chunks_exact(4);
    let rem = chunks.remainder();
    for c in chunks {
        acc[0] += c[0];
        acc[1] += c[1];
        acc[2] += c[2];
        acc[3] += c[3];
    }
    let mut tail = F::zero();
    for &v in rem {
        tail += v;
    }
    ((acc[0] + acc[1]) + (acc[2] + acc[3])) + tail
}

/// Unrolled `(sum, sum of squares)` in one pass.
#[inline]
pub(crate) fn fast_sum_sumsq<F: Scalar>(xs: &[F]) -> (F, F) {
    let mut s = [F::zero(); 4];
    let mut q = [F::zero(); 4];
    let chunks = xs.chunks_exact(4);
    let rem = chunks.remainder();
    for c in chunks {
        s[0] += c[0];
        q[0] += c[0] * c[0];
        s[1] += c[1];
        q[1] += c[1] * c[1];
        s[2] += c[2];
        q[2] += c[2] * c[2];
        s[3] += c[3];
        q[3] += c[3] * c[3];
    }
    let mut ts = F::zero();
    let mut tq = F::zero();
    for &v in rem {
        ts += v;
        tq += v * v;
    }
    (
        ((s[0] + s[1]) + (s[2] + s[3])) + ts,
        ((q[0] + q[1]) + (q[2] + q[3])) + tq,
    )
}

/// Unrolled `(sum of a, sum of a*b)`.
#[inline]
pub(crate) fn fast_sum_dot<F: Scalar>(a: &[F], b: &[F]) -> (F, F) {
    let mut s = [F::zero(); 4];
    let mut d = [F::zero(); 4];
    let n4 = a.len() / 4 * 4;
    let mut i = 0;
    while i < n4 {
        s[0] += a[i];
        d[0] += a[i] * b[i];
        s[1] += a[i + 1];
        d[1] += a[i + 1] * b[i + 1];
        s[2] += a[i + 2];
        d[2] += a[i + 2] * b[i + 2];
        s[3] += a[i + 3];
        d[3] += a[i + 3] * b[i + 3];
        i += 4;
    }
    let mut ts = F::zero();
    let mut td = F::zero();
    while i < a.len() {
        ts += a[i];
        td += a[i] * b[i];
        i += 1;
    }
    (
        ((s[0] + s[1]) + (s[2] + s[3])) + ts,
        ((d[0] + d[1]) + (d[2] + d[3])) + td,
    )
}

impl<F: Scalar> Tape<F> {
    /// Normalize each `(sample, channel)` plane to zero mean / unit variance,
    /// then apply `gamma[c] * xhat + beta[c]`.
    pub fn instance_norm(&self, x: Var, gamma: Var, beta: Var, eps: F) -> Var {
        let xv = self.value(x);
        let gv = self.value(gamma);
        let bv = self.value(beta);
        let (n, c, h, w) = xv
            .view()
            .into_dimensionality::<Ix4>()
            .expect("instance_norm rank 4")
            .dim();
        assert!(h * w > 1, "instance_norm needs more than one spatial element");
        let g1 = gv.view().into_dimensionality::<Ix1>().expect("gamma rank 1");
        assert_eq!(g1.len(), c, "gamma length");
        let m = h * w;
        let inv_m = fl::<F>(1.0 / m as f64);

        let xs = xv.as_slice().expect("standard layout");
        let gs = gv.as_slice().expect("standard layout");
        let bs = bv.as_slice().expect("standard layout");
        let mut xhat = vec![F::zero(); n * c * m];
        let mut istd = Array2::<F>::zeros((n, c));
        let mut out = vec![F::zero(); n * c * m];
        for i in 0..n {
            for j in 0..c {
                let base = (i * c + j) * m;
                let plane = &xs[base..base + m];
                let (sum, sumsq) = fast_sum_sumsq(plane);
                let mean = sum * inv_m;
                let var = (sumsq * inv_m - mean * mean).max(F::zero());
                let is = F::one() / (var + eps).sqrt();
                istd[[i, j]] = is;
                let g = gs[j];
                let b = bs[j];
                let xh = &mut xhat[base..base + m];
                let o = &mut out[base..base + m];
                for ((xh, o), &p) in xh.iter_mut().zip(o.iter_mut()).zip(plane.iter()) {
                    let t = (p - mean) * is;
                    *xh = t;
                    *o = g * t + b;
                }
            }
        }
        let out = Array4::from_shape_vec((n, c, h, w), out).unwrap();
        let xhat = Array4::from_shape_vec((n, c, h, w), xhat)
            .unwrap()
            .into_shared();

        self.push(out.into_dyn(), Box::new(move |g, sink| {
            let gsl = g.as_slice().expect("grad standard layout");
            let xh = xhat.as_slice().expect("standard layout");
            let gaf = gv.as_slice().unwrap();
            let mut gx = vec![F::zero(); n * c * m];
            let mut ggamma = Array1::<F>::zeros(c);
            let mut gbeta = Array1::<F>::zeros(c);
            for i in 0..n {
                for j in 0..c {
                    let base = (i * c + j) * m;
                    let gp = &gsl[base..base + m];
                    let xp = &xh[base..base + m];
                    let gam = gaf[j];
                    let is = istd[[i, j]];
                    let (sum_g, sum_gx) = fast_sum_dot(gp, xp);
                    ggamma[j] += sum_gx;
                    gbeta[j] += sum_g;
                    let mean_g = sum_g * inv_m;
                    let mean_gx = sum_gx * inv_m;
                    let o = &mut gx[base..base + m];
                    for ((o, &gk), &xk) in o.iter_mut().zip(gp.iter()).zip(xp.iter()) {
                        *o = gam * is * (gk - mean_g - xk * mean_gx);
                    }
                }
            }
            sink(
                x.0,
                ArrayD::from_shape_vec(IxDyn(&[n, c, h, w]), gx).unwrap(),
            );
            sink(gamma.0, ggamma.into_dyn());
            sink(beta.0, gbeta.into_dyn());
        }))
    }
}
