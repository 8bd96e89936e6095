//! Matrix multiply helper. `ndarray::linalg::general_mat_mul` dispatches to
//! `matrixmultiply` for f32/f64; for wide right-hand sides we split the
//! output into fixed-size column chunks and compute them in parallel.
//! Chunk boundaries are constant, so results are bitwise identical no matter
//! how many worker threads run.

use crate::scalar::Scalar;
use ndarray::linalg::general_mat_mul;
use ndarray::{Array2, ArrayView2, ArrayViewMut2, Axis};
use rayon::prelude::*;

/// Column-chunk width for parallel GEMM.
const COL_CHUNK: usize = 2048;
/// Below this FLOP count the parallel split is not worth the overhead.
const PAR_FLOPS: usize = 1 << 21;

pub fn matmul_into<F: Scalar>(
    a: &ArrayView2<'_, F>,
    b: &ArrayView2<'_, F>,
    out: &mut ArrayViewMut2<'_, F>,
) {
    let (m, k) = a.dim();
    let (k2, n) = b.dim();
    assert_eq!(k, k2, "matmul inner dimensions");
    assert_eq!(out.dim(), (m, n), "matmul output shape");
    let flops = 2 * m * k * n;
    if flops < PAR_FLOPS || n <= COL_CHUNK {
        general_mat_mul(F::one(), a, b, F::zero(), out);
        return;
    }
    let jobs: Vec<(ArrayViewMut2<'_, F>, ArrayView2<'_, F>)> = out
        .axis_chunks_iter_mut(Axis(1), COL_CHUNK)
        .zip(b.axis_chunks_iter(Axis(1), COL_CHUNK))
        .collect();
    jobs.into_par_iter().for_each(|(mut o, bc)| {
        general_mat_mul(F::one(), a, &bc, F::zero(), &mut o);
    });
}

pub fn matmul<F: Scalar>(a: &ArrayView2<'_, F>, b: &ArrayView2<'_, F>) -> Array2<F> {
    let mut out = Array2::zeros((a.nrows(), b.ncols()));
    matmul_into(a, b, &mut out.view_mut());
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array;

    #[test]
    fn matches_reference_on_wide_output() {
        let a = Array::from_shape_fn((5, 7), |(i, j)| (i * 7 + j) as f64 * 0.01 - 0.1);
        let b = Array::from_shape_fn((7, 4100), |(i, j)| ((i + j) % 13) as f64 * 0.1);
        let got = matmul(&a.view(), &b.view());
        let want = a.dot(&b);
        let err = (&got - &want).iter().fold(0.0f64, |m, x| m.max(x.abs()));
        assert!(err < 1e-12, "max err {err}");
    }
}
