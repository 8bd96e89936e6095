//! Elementwise, reduction and shape ops on tape variables.

use super::{Tape, Var};
use crate::scalar::{fl, Scalar};
use ndarray::{ArrayD, Axis, IxDyn, Zip};

fn same_shape<F: Scalar>(tape: &Tape<F>, a: Var, b: Var, op: &str) {
    debug_assert_eq!(tape.shape(a), tape.shape(b), "{op}: shape mismatch");
    let _ = (tape, a, b, op);
}

impl<F: Scalar> Tape<F> {
    pub fn add(&self, a: Var, b: Var) -> Var {
        same_shape(self, a, b, "add");
        let out = &self.value(a) + &self.value(b);
        self.push(out, Box::new(move |g, sink| {
            sink(a.0, g.clone());
            sink(b.0, g.clone());
        }))
    }

    pub fn sub(&self, a: Var, b: Var) -> Var {
        same_shape(self, a, b, "sub");
        let out = &self.value(a) - &self.value(b);
        self.push(out, Box::new(move |g, sink| {
            sink(a.0, g.clone());
            sink(b.0, g.mapv(|x| -x));
        }))
    }

    pub fn mul(&self, a: Var, b: Var) -> Var {
        same_shape(self, a, b, "mul");
        let av = self.value(a);
        let bv = self.value(b);
        let out = &av * &bv;
        self.push(out, Box::new(move |g, sink| {
            sink(a.0, g * &bv);
            sink(b.0, g * &av);
        }))
    }

    pub fn neg(&self, a: Var) -> Var {
        let out = self.value(a).mapv(|x| -x);
        self.push(out, Box::new(move |g, sink| sink(a.0, g.mapv(|x| -x))))
    }

    pub fn scale(&self, a: Var, c: F) -> Var {
        let out = self.value(a).mapv(|x| x * c);
        self.push(out, Box::new(move |g, sink| sink(a.0, g.mapv(|x| x * c))))
    }

    pub fn add_scalar(&self, a: Var, c: F) -> Var {
        let out = self.value(a).mapv(|x| x + c);
        self.push(out, Box::new(move |g, sink| sink(a.0, g.clone())))
    }

    pub fn square(&self, a: Var) -> Var {
        let av = self.value(a);
        let out = av.mapv(|x| x * x);
        let two = fl::<F>(2.0);
        self.push(out, Box::new(move |g, sink| {
            sink(a.0, Zip::from(g).and(&av).map_collect(|&g, &x| two * x * g));
        }))
    }

    /// Elementwise |x|; subgradient 0 at x = 0.
    pub fn abs(&self, a: Var) -> Var {
        let av = self.value(a);
        let out = av.mapv(|x| x.abs());
        self.push(out, Box::new(move |g, sink| {
            sink(a.0, Zip::from(g).and(&av).map_collect(|&g, &x| {
                if x > F::zero() {
                    g
                } else if x < F::zero() {
                    -g
                } else {
                    F::zero()
                }
            }));
        }))
    }

    pub fn exp(&self, a: Var) -> Var {
        let out = self.value(a).mapv(|x| x.exp());
        let shared = out.clone().into_shared();
        self.push(out, Box::new(move |g, sink| {
            sink(a.0, g * &shared);
        }))
    }

    pub fn tanh(&self, a: Var) -> Var {
        let out = self.value(a).mapv(|x| x.tanh());
        let shared = out.clone().into_shared();
        self.push(out, Box::new(move |g, sink| {
            sink(a.0, Zip::from(g).and(&shared).map_collect(|&g, &y| g * (F::one() - y * y)));
        }))
    }

    pub fn relu(&self, a: Var) -> Var {
        let av = self.value(a);
        let out = av.mapv(|x| x.max(F::zero()));
        self.push(out, Box::new(move |g, sink| {
            sink(a.0, Zip::from(g).and(&av).map_collect(|&g, &x| {
                if x > F::zero() { g } else { F::zero() }
            }));
        }))
    }

    pub fn leaky_relu(&self, a: Var, slope: F) -> Var {
        let av = self.value(a);
        let out = av.mapv(|x| if x > F::zero() { x } else { x * slope });
        self.push(out, Box::new(move |g, sink| {
            sink(a.0, Zip::from(g).and(&av).map_collect(|&g, &x| {
                if x > F::zero() { g } else { g * slope }
            }));
        }))
    }

    /// Numerically stable `ln(1 + exp(x))`; gradient is the logistic sigmoid.
    pub fn softplus(&self, a: Var) -> Var {
        let av = self.value(a);
        let out = av.mapv(stable_softplus);
        self.push(out, Box::new(move |g, sink| {
            sink(a.0, Zip::from(g).and(&av).map_collect(|&g, &x| g * sigmoid(x)));
        }))
    }

    pub fn clamp(&self, a: Var, lo: F, hi: F) -> Var {
        let av = self.value(a);
        let out = av.mapv(|x| x.min(hi).max(lo));
        self.push(out, Box::new(move |g, sink| {
            sink(a.0, Zip::from(g).and(&av).map_collect(|&g, &x| {
                if x >= lo && x <= hi { g } else { F::zero() }
            }));
        }))
    }

    /// Mean over every element, producing a 0-d scalar node.
    pub fn mean_all(&self, a: Var) -> Var {
        let av = self.value(a);
        let n = av.len();
        let inv = fl::<F>(1.0 / n as f64);
        let sum = crate::tensor::norm_sums::fast_sum(av.as_slice().expect("standard layout"));
        let out = ArrayD::from_elem(IxDyn(&[]), sum * inv);
        let shape = av.shape().to_vec();
        self.push(out, Box::new(move |g, sink| {
            let gs = g[[]] * inv;
            sink(a.0, ArrayD::from_elem(IxDyn(&shape), gs));
        }))
    }

    /// Matrix product of two rank-2 nodes.
    pub fn matmul2(&self, a: Var, b: Var) -> Var {
        let av = self.value(a);
        let bv = self.value(b);
        let a2 = av.view().into_dimensionality::<ndarray::Ix2>().expect("matmul lhs rank 2");
        let b2 = bv.view().into_dimensionality::<ndarray::Ix2>().expect("matmul rhs rank 2");
        let out = super::matmul(&a2, &b2).into_dyn();
        self.push(out, Box::new(move |g, sink| {
            let g2 = g.view().into_dimensionality::<ndarray::Ix2>().unwrap();
            let a2 = av.view().into_dimensionality::<ndarray::Ix2>().unwrap();
            let b2 = bv.view().into_dimensionality::<ndarray::Ix2>().unwrap();
            sink(a.0, super::matmul(&g2, &b2.t()).into_dyn());
            sink(b.0, super::matmul(&a2.t(), &g2).into_dyn());
        }))
    }

    /// Fully connected layer: `x [n, d] · wᵀ [d, o] + b [o]`.
    pub fn linear(&self, x: Var, w: Var, b: Var) -> Var {
        let xv = self.value(x);
        let wv = self.value(w);
        let bv = self.value(b);
        let x2 = xv.view().into_dimensionality::<ndarray::Ix2>().expect("linear input rank 2");
        let w2 = wv.view().into_dimensionality::<ndarray::Ix2>().expect("linear weight rank 2");
        assert_eq!(x2.ncols(), w2.ncols(), "linear: feature dims");
        let mut out = super::matmul(&x2, &w2.t());
        let b1 = bv.view().into_dimensionality::<ndarray::Ix1>().expect("linear bias rank 1");
        for mut row in out.rows_mut() {
            Zip::from(&mut row).and(&b1).for_each(|o, &b| *o += b);
        }
        self.push(out.into_dyn(), Box::new(move |g, sink| {
            let g2 = g.view().into_dimensionality::<ndarray::Ix2>().unwrap();
            let x2 = xv.view().into_dimensionality::<ndarray::Ix2>().unwrap();
            let w2 = wv.view().into_dimensionality::<ndarray::Ix2>().unwrap();
            sink(x.0, super::matmul(&g2, &w2).into_dyn());
            sink(w.0, super::matmul(&g2.t(), &x2).into_dyn());
            sink(b.0, g2.sum_axis(Axis(0)).into_dyn());
        }))
    }

    /// Concatenate rank-4 nodes along the channel axis.
    pub fn concat_ch(&self, parts: &[Var]) -> Var {
        assert!(!parts.is_empty());
        let vals: Vec<_> = parts.iter().map(|&p| self.value(p)).collect();
        let shape0 = vals[0].shape().to_vec();
        assert_eq!(shape0.len(), 4, "concat_ch wants rank 4");
        let (n, h, w) = (shape0[0], shape0[2], shape0[3]);
        let widths: Vec<usize> = vals.iter().map(|v| v.shape()[1]).collect();
        let c_total: usize = widths.iter().sum();
        let plane = h * w;
        let mut out = vec![F::zero(); n * c_total * plane];
        {
            let mut c_at = 0usize;
            for (v, &cw) in vals.iter().zip(&widths) {
                let vs = v.as_slice().expect("standard layout");
                for i in 0..n {
                    let src = &vs[i * cw * plane..(i + 1) * cw * plane];
                    let dst_base = (i * c_total + c_at) * plane;
                    out[dst_base..dst_base + cw * plane].copy_from_slice(src);
                }
                c_at += cw;
            }
        }
        let out = ArrayD::from_shape_vec(IxDyn(&[n, c_total, h, w]), out).unwrap();
        let ids: Vec<usize> = parts.iter().map(|p| p.0).collect();
        self.push(out, Box::new(move |g, sink| {
            let gs = g.as_slice().expect("grad standard layout");
            let mut c_at = 0usize;
            for (&id, &cw) in ids.iter().zip(&widths) {
                let mut piece = vec![F::zero(); n * cw * plane];
                for i in 0..n {
                    let src_base = (i * c_total + c_at) * plane;
                    piece[i * cw * plane..(i + 1) * cw * plane]
                        .copy_from_slice(&gs[src_base..src_base + cw * plane]);
                }
                sink(
                    id,
                    ArrayD::from_shape_vec(IxDyn(&[n, cw, h, w]), piece).unwrap(),
                );
                c_at += cw;
            }
        }))
    }

    /// Broadcast a `[n, d]` vector to a `[n, d, h, w]` spatial map.
    pub fn broadcast_map(&self, t: Var, h: usize, w: usize) -> Var {
        let tv = self.value(t);
        let (n, d) = {
            let s = tv.shape();
            assert_eq!(s.len(), 2, "broadcast_map input rank 2");
            (s[0], s[1])
        };
        let plane = h * w;
        let ts = tv.as_slice().expect("standard layout");
        let mut out = vec![F::zero(); n * d * plane];
        for (block, &v) in out.chunks_exact_mut(plane).zip(ts.iter()) {
            block.fill(v);
        }
        let out = ArrayD::from_shape_vec(IxDyn(&[n, d, h, w]), out).unwrap();
        self.push(out, Box::new(move |g, sink| {
            let gs = g.as_slice().expect("grad standard layout");
            let mut gt = vec![F::zero(); n * d];
            for (slot, block) in gt.iter_mut().zip(gs.chunks_exact(plane)) {
                *slot = crate::tensor::norm_sums::fast_sum(block);
            }
            sink(t.0, ArrayD::from_shape_vec(IxDyn(&[n, d]), gt).unwrap());
        }))
    }

    /// Spatial mean of a `[n, c, h, w]` node, producing `[n, c]`.
    pub fn global_avg_pool(&self, x: Var) -> Var {
        let xv = self.value(x);
        let s = xv.shape().to_vec();
        assert_eq!(s.len(), 4, "global_avg_pool input rank 4");
        let (n, c, h, w) = (s[0], s[1], s[2], s[3]);
        let plane = h * w;
        let inv = fl::<F>(1.0 / plane as f64);
        let xs = xv.as_slice().expect("standard layout");
        let mut out = vec![F::zero(); n * c];
        for (slot, block) in out.iter_mut().zip(xs.chunks_exact(plane)) {
            *slot = crate::tensor::norm_sums::fast_sum(block) * inv;
        }
        let out = ArrayD::from_shape_vec(IxDyn(&[n, c]), out).unwrap();
        self.push(out, Box::new(move |g, sink| {
            let gs = g.as_slice().expect("grad standard layout");
            let mut gx = vec![F::zero(); n * c * plane];
            for (block, &gv) in gx.chunks_exact_mut(plane).zip(gs.iter()) {
                block.fill(gv * inv);
            }
            sink(
                x.0,
                ArrayD::from_shape_vec(IxDyn(&[n, c, h, w]), gx).unwrap(),
            );
        }))
    }

    /// Reshape without changing the element count.
    pub fn reshape(&self, a: Var, shape: &[usize]) -> Var {
        let av = self.value(a);
        let old = av.shape().to_vec();
        assert_eq!(
            av.len(),
            shape.iter().product::<usize>(),
            "reshape element count"
        );
        let out = av
            .to_owned()
            .into_shape_with_order(IxDyn(shape))
            .expect("reshape");
        self.push(out, Box::new(move |g, sink| {
            sink(
                a.0,
                g.to_owned().into_shape_with_order(IxDyn(&old)).expect("reshape grad"),
            );
        }))
    }

    /// Concatenate nodes along the batch (first) axis.
    pub fn concat_rows(&self, parts: &[Var]) -> Var {
        assert!(!parts.is_empty());
        let vals: Vec<_> = parts.iter().map(|&p| self.value(p)).collect();
        let views: Vec<_> = vals.iter().map(|v| v.view()).collect();
        let out = ndarray::concatenate(Axis(0), &views).expect("concat_rows shapes");
        let ids: Vec<usize> = parts.iter().map(|p| p.0).collect();
        let lens: Vec<usize> = vals.iter().map(|v| v.shape()[0]).collect();
        self.push(out, Box::new(move |g, sink| {
            let mut at = 0;
            for (&id, &len) in ids.iter().zip(&lens) {
                let piece = g
                    .slice_axis(Axis(0), ndarray::Slice::from(at..at + len))
                    .to_owned();
                sink(id, piece);
                at += len;
            }
        }))
    }

    /// Batch-axis slice `[from..to, ...]` of a node.
    pub fn slice_rows(&self, a: Var, from: usize, to: usize) -> Var {
        let av = self.value(a);
        let s = av.shape().to_vec();
        assert!(from < to && to <= s[0], "slice_rows bounds");
        let out = av
            .slice_axis(Axis(0), ndarray::Slice::from(from..to))
            .to_owned();
        self.push(out, Box::new(move |g, sink| {
            let mut gx = ArrayD::zeros(IxDyn(&s));
            gx.slice_axis_mut(Axis(0), ndarray::Slice::from(from..to))
                .assign(g);
            sink(a.0, gx);
        }))
    }

    /// Column slice `[n, from..to]` of a rank-2 node.
    pub fn slice_cols(&self, a: Var, from: usize, to: usize) -> Var {
        let av = self.value(a);
        let s = av.shape().to_vec();
        assert_eq!(s.len(), 2, "slice_cols input rank 2");
        assert!(from < to && to <= s[1], "slice_cols bounds");
        let out = av
            .slice_axis(Axis(1), ndarray::Slice::from(from..to))
            .to_owned();
        self.push(out, Box::new(move |g, sink| {
            let mut gx = ArrayD::zeros(IxDyn(&s));
            gx.slice_axis_mut(Axis(1), ndarray::Slice::from(from..to))
                .assign(g);
            sink(a.0, gx);
        }))
    }
}

pub(crate) fn sigmoid<F: Scalar>(x: F) -> F {
    if x >= F::zero() {
        F::one() / (F::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (F::one() + e)
    }
}

fn stable_softplus<F: Scalar>(x: F) -> F {
    if x > F::zero() {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}
