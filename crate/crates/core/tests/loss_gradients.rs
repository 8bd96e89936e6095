//! Central finite-difference verification of every loss operation with
//! respect to its raw inputs: f64, inputs of at most 32 elements, relative
//! error below 1e-4.

use ndarray::{ArrayD, IxDyn};
use tcgan::losses::{self, AdvSide};
use tcgan::rng::Rng;
use tcgan::tensor::{Tape, Var};
use tcgan::types::AdversarialForm;

const TOL: f64 = 1e-4;
const H: f64 = 1e-5;

type LossBuilder = dyn Fn(&Tape<f64>, &[Var]) -> Var;

fn check_loss(name: &str, build: &LossBuilder, inputs: &[ArrayD<f64>]) {
    assert!(
        inputs.iter().all(|a| a.len() <= 32),
        "{name}: inputs must stay tiny"
    );
    let tape = Tape::<f64>::new();
    let vars: Vec<Var> = inputs.iter().map(|a| tape.var(a.clone())).collect();
    let root = build(&tape, &vars);
    let grads = tape.backward(root);

    let eval = |xs: &[ArrayD<f64>]| -> f64 {
        let tape = Tape::<f64>::new();
        let vars: Vec<Var> = xs.iter().map(|a| tape.var(a.clone())).collect();
        tape.scalar(build(&tape, &vars))
    };

    for (i, input) in inputs.iter().enumerate() {
        let analytic = grads
            .get(vars[i])
            .cloned()
            .unwrap_or_else(|| ArrayD::zeros(IxDyn(input.shape())));
        let flat = analytic
            .into_shape_with_order(IxDyn(&[input.len()]))
            .unwrap();
        let mut work = inputs.to_vec();
        for idx in 0..input.len() {
            let base = input
                .clone()
                .into_shape_with_order(IxDyn(&[input.len()]))
                .unwrap();
            let mut plus = base.clone();
            plus[idx] += H;
            let mut minus = base;
            minus[idx] -= H;
            work[i] = plus.into_shape_with_order(IxDyn(input.shape())).unwrap();
            let fp = eval(&work);
            work[i] = minus.into_shape_with_order(IxDyn(input.shape())).unwrap();
            let fm = eval(&work);
            work[i] = input.clone();
            let numeric = (fp - fm) / (2.0 * H);
            let a = flat[idx];
            let err = (a - numeric).abs() / f64::max(1.0, f64::max(a.abs(), numeric.abs()));
            assert!(
                err < TOL,
                "{name}: input {i} element {idx}: analytic {a} vs numeric {numeric} (rel {err})"
            );
        }
    }
}

/// Values away from the L1 kink so finite differences stay two-sided.
fn randn_margin(rng: &mut Rng, shape: &[usize]) -> ArrayD<f64> {
    let mut a = rng.normal_array::<f64>(shape);
    a.mapv_inplace(|v| {
        if v.abs() < 0.15 {
            v.signum() * (v.abs() + 0.15)
        } else {
            v
        }
    });
    a
}

fn offset(rng: &mut Rng, shape: &[usize], by: f64) -> ArrayD<f64> {
    let mut a = randn_margin(rng, shape);
    a.mapv_inplace(|v| v + by);
    a
}

#[test]
fn grad_l_recons_self_cycle_out() {
    let mut rng = Rng::seeded(1, 0);
    let x = randn_margin(&mut rng, &[2, 3, 2, 2]);
    // keep |a-b| away from 0
    let xh = offset(&mut rng, &[2, 3, 2, 2], 1.5);
    check_loss(
        "l_recons_self",
        &|t, v| losses::l_recons_self(t, v[0], v[1]).unwrap(),
        &[x.clone(), xh.clone()],
    );
    check_loss(
        "l_recons_cycle",
        &|t, v| losses::l_recons_cycle(t, v[0], v[1]).unwrap(),
        &[x.clone(), xh.clone()],
    );
    check_loss(
        "l_recons_out",
        &|t, v| losses::l_recons_out(t, v[0], v[1]).unwrap(),
        &[x, xh],
    );
}

#[test]
fn grad_l_adv_real_all_sides_and_forms() {
    let mut rng = Rng::seeded(2, 0);
    for form in [AdversarialForm::Logistic, AdversarialForm::LeastSquares] {
        for side in [AdvSide::Gen, AdvSide::Disc] {
            let r = rng.normal_array::<f64>(&[5]);
            let f = rng.normal_array::<f64>(&[4]);
            check_loss(
                "l_adv_real",
                &move |t, v| losses::l_adv_real(t, v[0], v[1], side, form).unwrap(),
                &[r, f],
            );
        }
    }
}

#[test]
fn grad_l_recons_trans() {
    let mut rng = Rng::seeded(3, 0);
    let t = randn_margin(&mut rng, &[3, 4]);
    let a = offset(&mut rng, &[3, 4], 2.0);
    let b = offset(&mut rng, &[3, 4], -2.0);
    let c = offset(&mut rng, &[3, 4], 1.0);
    check_loss(
        "l_recons_trans",
        &|tp, v| losses::l_recons_trans(tp, v[0], v[1], v[2], v[3]).unwrap(),
        &[t, a, b, c],
    );
}

#[test]
fn grad_l_adv_newtrans_all_sides_and_forms() {
    let mut rng = Rng::seeded(4, 0);
    for form in [AdversarialForm::Logistic, AdversarialForm::LeastSquares] {
        for side in [AdvSide::Gen, AdvSide::Disc] {
            let a = rng.normal_array::<f64>(&[4]);
            let b = rng.normal_array::<f64>(&[4]);
            let c = rng.normal_array::<f64>(&[4]);
            check_loss(
                "l_adv_newtrans",
                &move |t, v| losses::l_adv_newtrans(t, v[0], v[1], v[2], side, form).unwrap(),
                &[a, b, c],
            );
        }
    }
}

#[test]
fn grad_l_recons_newtrans() {
    let mut rng = Rng::seeded(5, 0);
    let tp = randn_margin(&mut rng, &[2, 5]);
    let tp_hat = offset(&mut rng, &[2, 5], 2.0);
    let tt = randn_margin(&mut rng, &[2, 5]);
    let tt_hat = offset(&mut rng, &[2, 5], -2.0);
    check_loss(
        "l_recons_newtrans",
        &|t, v| losses::l_recons_newtrans(t, v[0], v[1], v[2], v[3]).unwrap(),
        &[tp, tp_hat, tt, tt_hat],
    );
}

#[test]
fn grad_l_adv_newimg_all_sides_and_forms() {
    let mut rng = Rng::seeded(6, 0);
    for form in [AdversarialForm::Logistic, AdversarialForm::LeastSquares] {
        for side in [AdvSide::Gen, AdvSide::Disc] {
            let a = rng.normal_array::<f64>(&[4]);
            let b = rng.normal_array::<f64>(&[4]);
            let c = rng.normal_array::<f64>(&[4]);
            check_loss(
                "l_adv_newimg",
                &move |t, v| losses::l_adv_newimg(t, v[0], v[1], v[2], side, form).unwrap(),
                &[a, b, c],
            );
        }
    }
}

#[test]
fn grad_triplet_matching_both_outputs() {
    let mut rng = Rng::seeded(7, 0);
    let inputs: Vec<ArrayD<f64>> = (0..6).map(|_| rng.normal_array::<f64>(&[5])).collect();
    check_loss(
        "triplet_matching_loss.d",
        &|t, v| {
            losses::triplet_matching_loss(t, v[0], v[1], v[2], v[3], v[4], v[5])
                .unwrap()
                .0
        },
        &inputs,
    );
    check_loss(
        "triplet_matching_loss.g",
        &|t, v| {
            losses::triplet_matching_loss(t, v[0], v[1], v[2], v[3], v[4], v[5])
                .unwrap()
                .1
        },
        &inputs,
    );
}

#[test]
fn grad_matching_generator_loss() {
    let mut rng = Rng::seeded(8, 0);
    let inputs: Vec<ArrayD<f64>> = (0..3).map(|_| rng.normal_array::<f64>(&[6])).collect();
    check_loss(
        "matching_generator_loss",
        &|t, v| losses::matching_generator_loss(t, v[0], v[1], v[2]).unwrap(),
        &inputs,
    );
}

#[test]
fn losses_are_nonnegative_on_random_inputs() {
    let mut rng = Rng::seeded(9, 0);
    for _ in 0..50 {
        let tape = Tape::<f64>::new();
        let a = tape.var(rng.normal_array::<f64>(&[6]));
        let b = tape.var(rng.normal_array::<f64>(&[6]));
        let c = tape.var(rng.normal_array::<f64>(&[6]));
        for form in [AdversarialForm::Logistic, AdversarialForm::LeastSquares] {
            for side in [AdvSide::Gen, AdvSide::Disc] {
                assert!(
                    tape.scalar(losses::l_adv_real(&tape, a, b, side, form).unwrap()) >= 0.0
                );
                assert!(
                    tape.scalar(
                        losses::l_adv_newtrans(&tape, a, b, c, side, form).unwrap()
                    ) >= 0.0
                );
                assert!(
                    tape.scalar(losses::l_adv_newimg(&tape, a, b, c, side, form).unwrap())
                        >= 0.0
                );
            }
        }
        let img_a = tape.var(rng.normal_array::<f64>(&[1, 3, 2, 2]));
        let img_b = tape.var(rng.normal_array::<f64>(&[1, 3, 2, 2]));
        assert!(tape.scalar(losses::l_recons_self(&tape, img_a, img_b).unwrap()) >= 0.0);
        let (l_d, l_g) = losses::triplet_matching_loss(&tape, a, b, c, a, b, c).unwrap();
        assert!(tape.scalar(l_d) >= 0.0);
        assert!(tape.scalar(l_g) >= 0.0);
    }
}

#[test]
fn triplet_matching_matches_hand_oracle_on_100_draws() {
    // direct reimplementation of the matching formula as the oracle
    let mut rng = Rng::seeded(10, 0);
    for _ in 0..100 {
        let n = 1 + rng.below(8);
        let draws: Vec<Vec<f64>> = (0..6)
            .map(|_| (0..n).map(|_| rng.normal_f64()).collect())
            .collect();
        let oracle_d: f64 = (0..n)
            .map(|i| {
                (draws[0][i] - 1.0).powi(2)
                    + draws[1][i].powi(2)
                    + draws[2][i].powi(2)
                    + draws[3][i].powi(2)
                    + draws[4][i].powi(2)
                    + draws[5][i].powi(2)
            })
            .sum::<f64>()
            / n as f64;
        let oracle_g: f64 =
            (0..n).map(|i| (draws[0][i] - 1.0).powi(2)).sum::<f64>() / n as f64;
        let tape = Tape::<f64>::new();
        let vars: Vec<Var> = draws
            .iter()
            .map(|d| tape.var(ArrayD::from_shape_vec(IxDyn(&[n]), d.clone()).unwrap()))
            .collect();
        let (l_d, l_g) = losses::triplet_matching_loss(
            &tape, vars[0], vars[1], vars[2], vars[3], vars[4], vars[5],
        )
        .unwrap();
        assert!((tape.scalar(l_d) - oracle_d).abs() < 1e-9);
        assert!((tape.scalar(l_g) - oracle_g).abs() < 1e-9);
    }
}
