//! Central finite-difference checks for every tape op, in f64.
//! The scalar root is `mean(out ⊙ fixed random weights)` so errors cannot
//! cancel across elements.

use ndarray::{ArrayD, IxDyn};
use tcgan::rng::Rng;
use tcgan::tensor::{Tape, Var};

type Builder = dyn Fn(&Tape<f64>, &[Var]) -> Var;

fn weighted_root(tape: &Tape<f64>, out: Var, weights: &ArrayD<f64>) -> Var {
    let w = tape.var(weights.clone());
    let prod = tape.mul(out, w);
    tape.mean_all(prod)
}

/// Returns the worst relative error across all inputs' gradient elements.
fn grad_check(build: &Builder, inputs: &[ArrayD<f64>], rng: &mut Rng) -> f64 {
    // analytic
    let tape = Tape::<f64>::new();
    let vars: Vec<Var> = inputs.iter().map(|a| tape.var(a.clone())).collect();
    let out = build(&tape, &vars);
    let weights = rng.normal_array::<f64>(&tape.shape(out));
    let root = weighted_root(&tape, out, &weights);
    let grads = tape.backward(root);

    let eval = |xs: &[ArrayD<f64>]| -> f64 {
        let tape = Tape::<f64>::new();
        let vars: Vec<Var> = xs.iter().map(|a| tape.var(a.clone())).collect();
        let out = build(&tape, &vars);
        let root = weighted_root(&tape, out, &weights);
        tape.scalar(root)
    };

    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for (i, input) in inputs.iter().enumerate() {
        let analytic = grads
            .get(vars[i])
            .cloned()
            .unwrap_or_else(|| ArrayD::zeros(IxDyn(input.shape())));
        let mut work = inputs.to_vec();
        for idx in 0..input.len() {
            let flat_shape = IxDyn(&[input.len()]);
            let base = input.clone().into_shape_with_order(flat_shape.clone()).unwrap();
            let mut plus = base.clone();
            plus[idx] += h;
            let mut minus = base.clone();
            minus[idx] -= h;
            work[i] = plus.into_shape_with_order(IxDyn(input.shape())).unwrap();
            let fp = eval(&work);
            work[i] = minus.into_shape_with_order(IxDyn(input.shape())).unwrap();
            let fm = eval(&work);
            work[i] = input.clone();
            let numeric = (fp - fm) / (2.0 * h);
            let a = analytic
                .clone()
                .into_shape_with_order(IxDyn(&[input.len()]))
                .unwrap()[idx];
            let err = (a - numeric).abs() / f64::max(1.0, f64::max(a.abs(), numeric.abs()));
            worst = worst.max(err);
        }
    }
    worst
}

fn randn(rng: &mut Rng, shape: &[usize]) -> ArrayD<f64> {
    rng.normal_array::<f64>(shape)
}

/// Random values kept away from a kink at 0 (for abs / relu subgradients).
fn randn_margin(rng: &mut Rng, shape: &[usize], margin: f64) -> ArrayD<f64> {
    let mut a = rng.normal_array::<f64>(shape);
    a.mapv_inplace(|v| {
        if v.abs() < margin {
            v.signum() * (v.abs() + margin)
        } else {
            v
        }
    });
    a
}

const TOL: f64 = 1e-7;

macro_rules! check {
    ($name:ident, $inputs:expr, $build:expr) => {
        #[test]
        fn $name() {
            let mut rng = Rng::seeded(0xC0FFEE, line!() as u64);
            let inputs = $inputs(&mut rng);
            let err = grad_check(&$build, &inputs, &mut rng);
            assert!(err < TOL, "{}: worst rel err {err}", stringify!($name));
        }
    };
}

check!(
    grad_add,
    |r: &mut Rng| vec![randn(r, &[2, 3]), randn(r, &[2, 3])],
    |t: &Tape<f64>, v: &[Var]| t.add(v[0], v[1])
);

check!(
    grad_sub,
    |r: &mut Rng| vec![randn(r, &[2, 3]), randn(r, &[2, 3])],
    |t: &Tape<f64>, v: &[Var]| t.sub(v[0], v[1])
);

check!(
    grad_mul,
    |r: &mut Rng| vec![randn(r, &[2, 3]), randn(r, &[2, 3])],
    |t: &Tape<f64>, v: &[Var]| t.mul(v[0], v[1])
);

check!(
    grad_neg_scale_addscalar,
    |r: &mut Rng| vec![randn(r, &[5])],
    |t: &Tape<f64>, v: &[Var]| {
        let a = t.neg(v[0]);
        let b = t.scale(a, 1.7);
        t.add_scalar(b, -0.3)
    }
);

check!(
    grad_square,
    |r: &mut Rng| vec![randn(r, &[7])],
    |t: &Tape<f64>, v: &[Var]| t.square(v[0])
);

check!(
    grad_abs,
    |r: &mut Rng| vec![randn_margin(r, &[9], 0.2)],
    |t: &Tape<f64>, v: &[Var]| t.abs(v[0])
);

check!(
    grad_exp,
    |r: &mut Rng| vec![randn(r, &[6])],
    |t: &Tape<f64>, v: &[Var]| t.exp(v[0])
);

check!(
    grad_tanh,
    |r: &mut Rng| vec![randn(r, &[6])],
    |t: &Tape<f64>, v: &[Var]| t.tanh(v[0])
);

check!(
    grad_relu,
    |r: &mut Rng| vec![randn_margin(r, &[8], 0.2)],
    |t: &Tape<f64>, v: &[Var]| t.relu(v[0])
);

check!(
    grad_leaky_relu,
    |r: &mut Rng| vec![randn_margin(r, &[8], 0.2)],
    |t: &Tape<f64>, v: &[Var]| t.leaky_relu(v[0], 0.2)
);

check!(
    grad_softplus,
    |r: &mut Rng| vec![randn(r, &[8])],
    |t: &Tape<f64>, v: &[Var]| t.softplus(v[0])
);

check!(
    grad_clamp,
    |r: &mut Rng| {
        let mut a = randn(r, &[12]);
        // keep away from the clamp boundary so FD stays one-sided-free
        a.mapv_inplace(|v| if (v.abs() - 1.0).abs() < 0.2 { v * 1.5 } else { v });
        vec![a]
    },
    |t: &Tape<f64>, v: &[Var]| t.clamp(v[0], -1.0, 1.0)
);

check!(
    grad_mean_all,
    |r: &mut Rng| vec![randn(r, &[3, 4])],
    |t: &Tape<f64>, v: &[Var]| {
        let m = t.mean_all(v[0]);
        t.reshape(m, &[1])
    }
);

check!(
    grad_matmul,
    |r: &mut Rng| vec![randn(r, &[3, 4]), randn(r, &[4, 2])],
    |t: &Tape<f64>, v: &[Var]| t.matmul2(v[0], v[1])
);

check!(
    grad_linear,
    |r: &mut Rng| vec![randn(r, &[3, 5]), randn(r, &[4, 5]), randn(r, &[4])],
    |t: &Tape<f64>, v: &[Var]| t.linear(v[0], v[1], v[2])
);

check!(
    grad_conv2d_s1,
    |r: &mut Rng| vec![randn(r, &[2, 3, 5, 5]), randn(r, &[4, 3, 3, 3]), randn(r, &[4])],
    |t: &Tape<f64>, v: &[Var]| t.conv2d(v[0], v[1], v[2], 1, 1)
);

check!(
    grad_conv2d_s2,
    |r: &mut Rng| vec![randn(r, &[2, 2, 6, 6]), randn(r, &[3, 2, 3, 3]), randn(r, &[3])],
    |t: &Tape<f64>, v: &[Var]| t.conv2d(v[0], v[1], v[2], 2, 1)
);

check!(
    grad_conv2d_k4_s2,
    |r: &mut Rng| vec![randn(r, &[1, 2, 8, 8]), randn(r, &[2, 2, 4, 4]), randn(r, &[2])],
    |t: &Tape<f64>, v: &[Var]| t.conv2d(v[0], v[1], v[2], 2, 1)
);

check!(
    grad_conv_transpose_k4_s2,
    |r: &mut Rng| vec![randn(r, &[2, 3, 4, 4]), randn(r, &[3, 2, 4, 4]), randn(r, &[2])],
    |t: &Tape<f64>, v: &[Var]| t.conv_transpose2d(v[0], v[1], v[2], 2, 1)
);

check!(
    grad_conv_transpose_k3_s1,
    |r: &mut Rng| vec![randn(r, &[1, 2, 5, 5]), randn(r, &[2, 3, 3, 3]), randn(r, &[3])],
    |t: &Tape<f64>, v: &[Var]| t.conv_transpose2d(v[0], v[1], v[2], 1, 1)
);

check!(
    grad_instance_norm,
    |r: &mut Rng| vec![randn(r, &[2, 3, 4, 4]), randn(r, &[3]), randn(r, &[3])],
    |t: &Tape<f64>, v: &[Var]| t.instance_norm(v[0], v[1], v[2], 1e-5)
);

check!(
    grad_concat_ch,
    |r: &mut Rng| vec![randn(r, &[2, 2, 3, 3]), randn(r, &[2, 4, 3, 3])],
    |t: &Tape<f64>, v: &[Var]| t.concat_ch(&[v[0], v[1]])
);

check!(
    grad_broadcast_map,
    |r: &mut Rng| vec![randn(r, &[2, 5])],
    |t: &Tape<f64>, v: &[Var]| t.broadcast_map(v[0], 3, 4)
);

check!(
    grad_global_avg_pool,
    |r: &mut Rng| vec![randn(r, &[2, 3, 4, 4])],
    |t: &Tape<f64>, v: &[Var]| t.global_avg_pool(v[0])
);

check!(
    grad_reshape_slice,
    |r: &mut Rng| vec![randn(r, &[3, 6])],
    |t: &Tape<f64>, v: &[Var]| {
        let s = t.slice_cols(v[0], 1, 4);
        t.reshape(s, &[9])
    }
);

/// Gradient accumulates when the same var feeds an op twice.
check!(
    grad_fanout,
    |r: &mut Rng| vec![randn(r, &[4])],
    |t: &Tape<f64>, v: &[Var]| {
        let a = t.tanh(v[0]);
        let b = t.exp(v[0]);
        t.add(a, b)
    }
);

#[test]
fn detach_blocks_gradient() {
    let mut rng = Rng::seeded(1, 2);
    let tape = Tape::<f64>::new();
    let x = tape.var(rng.normal_array::<f64>(&[3]));
    let d = tape.detach(x);
    let y = tape.square(d);
    let root = tape.mean_all(y);
    let grads = tape.backward(root);
    assert!(grads.get(x).is_none(), "gradient leaked through detach");
    assert!(grads.get(d).is_some());
}

check!(
    grad_concat_slice_rows,
    |r: &mut Rng| vec![randn(r, &[2, 3]), randn(r, &[4, 3])],
    |t: &Tape<f64>, v: &[Var]| {
        let cat = t.concat_rows(&[v[0], v[1], v[0]]);
        t.slice_rows(cat, 1, 7)
    }
);
