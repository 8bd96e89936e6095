//! Spec invariants of the five networks: shape contracts, determinism,
//! per-sample independence and conditioning sensitivity.

use ndarray::{Array2, Array4, Axis};
use tcgan::networks::{
    disc_match, disc_real, disc_trans, encode, generate, DiscriminatorBundleSpec, EncoderSpec,
    GeneratorSpec, Networks, NetworkSpecs,
};
use tcgan::rng::Rng;
use tcgan::types::{ImageBatch, Transition};

fn specs(d_t: usize) -> NetworkSpecs {
    NetworkSpecs {
        generator: GeneratorSpec {
            base_channels: 6,
            depth: 2,
            d_t,
            ..Default::default()
        },
        encoder: EncoderSpec {
            base_channels: 6,
            residual_blocks: 2,
            d_t,
            ..Default::default()
        },
        discriminator: DiscriminatorBundleSpec {
            base_channels: 6,
            max_channels: 24,
            dt_hidden: 24,
            d_t,
            ..Default::default()
        },
    }
}

fn rand_images(rng: &mut Rng, n: usize, side: usize) -> ImageBatch<f32> {
    let mut a = rng.normal_array::<f32>(&[n, 3, side, side]);
    a.mapv_inplace(|v| (v * 0.4).tanh());
    ImageBatch::new(a.into_dimensionality().unwrap()).unwrap()
}

fn rand_trans(rng: &mut Rng, n: usize, d: usize) -> Transition<f32> {
    Transition::new(
        rng.normal_array::<f32>(&[n, d])
            .into_dimensionality()
            .unwrap(),
    )
    .unwrap()
}

#[test]
fn shape_contracts_and_determinism() {
    let nets = Networks::<f32>::init(&specs(6), 3).unwrap();
    let mut rng = Rng::seeded(0, 0);
    let x = rand_images(&mut rng, 4, 32);
    let t = rand_trans(&mut rng, 4, 6);
    let y = generate(&nets.generator, &x, &t).unwrap();
    assert_eq!(y.data().dim(), x.data().dim());
    assert!(y.data().iter().all(|v| v.abs() <= 1.0));
    // bitwise determinism
    let y2 = generate(&nets.generator, &x, &t).unwrap();
    assert_eq!(y.data(), y2.data());

    let p = encode(&nets.encoder, &x, &y).unwrap();
    assert_eq!(p.mean.dim(), (4, 6));
    assert_eq!(p.log_var.dim(), (4, 6));
    let p2 = encode(&nets.encoder, &x, &y).unwrap();
    assert_eq!(p.mean, p2.mean);

    let s = disc_real(&nets.disc, &y).unwrap();
    assert_eq!(s.len(), 4);
    assert!(s.iter().all(|v| v.is_finite()));
    assert_eq!(s, disc_real(&nets.disc, &y).unwrap());

    let st = disc_trans(&nets.disc_t, &t).unwrap();
    assert_eq!(st.len(), 4);
    assert!(st.iter().all(|v| v.is_finite()));

    let sm = disc_match(&nets.disc, &x, &t, &y).unwrap();
    assert_eq!(sm.len(), 4);
}

#[test]
fn batch_mismatch_is_dimension_error() {
    let nets = Networks::<f32>::init(&specs(6), 3).unwrap();
    let mut rng = Rng::seeded(0, 0);
    let x = rand_images(&mut rng, 4, 32);
    let t = rand_trans(&mut rng, 2, 6);
    assert!(generate(&nets.generator, &x, &t).is_err());
    let y = rand_images(&mut rng, 4, 32);
    assert!(disc_match(&nets.disc, &x, &t, &y).is_err());
}

#[test]
fn per_sample_independence_batch_permutation() {
    let nets = Networks::<f32>::init(&specs(6), 7).unwrap();
    let mut rng = Rng::seeded(1, 0);
    let x = rand_images(&mut rng, 5, 32);
    let t = rand_trans(&mut rng, 5, 6);
    let perm = [3usize, 0, 4, 1, 2];

    let permuted_x = {
        let mut a = Array4::<f32>::zeros(x.data().dim());
        for (dst, &src) in perm.iter().enumerate() {
            a.index_axis_mut(Axis(0), dst)
                .assign(&x.data().index_axis(Axis(0), src));
        }
        ImageBatch::new(a).unwrap()
    };
    let permuted_t = {
        let mut a = Array2::<f32>::zeros(t.data().dim());
        for (dst, &src) in perm.iter().enumerate() {
            a.index_axis_mut(Axis(0), dst)
                .assign(&t.data().index_axis(Axis(0), src));
        }
        Transition::new(a).unwrap()
    };

    let out = generate(&nets.generator, &x, &t).unwrap();
    let out_p = generate(&nets.generator, &permuted_x, &permuted_t).unwrap();
    for (dst, &src) in perm.iter().enumerate() {
        let a = out_p.data().index_axis(Axis(0), dst);
        let b = out.data().index_axis(Axis(0), src);
        assert_eq!(a, b, "generator couples batch rows");
    }

    let s = disc_real(&nets.disc, &out).unwrap();
    let s_p = disc_real(&nets.disc, &out_p).unwrap();
    for (dst, &src) in perm.iter().enumerate() {
        assert_eq!(s_p[dst], s[src], "discriminator couples batch rows");
    }
}

#[test]
fn generator_is_sensitive_to_its_transition() {
    let nets = Networks::<f32>::init(&specs(6), 11).unwrap();
    let mut rng = Rng::seeded(2, 0);
    let x = rand_images(&mut rng, 2, 32);
    let t = rand_trans(&mut rng, 2, 6);
    let y = generate(&nets.generator, &x, &t).unwrap();
    // finite-difference probe on one coordinate of t
    let mut t2 = t.data().clone();
    t2[[0, 0]] += 0.05;
    let y2 = generate(&nets.generator, &x, &Transition::new(t2).unwrap()).unwrap();
    let max_delta = y
        .data()
        .iter()
        .zip(y2.data().iter())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0f32, f32::max);
    assert!(
        max_delta > 0.0,
        "output does not respond to the transition at init"
    );
}

#[test]
fn match_discriminator_distinguishes_far_transitions() {
    let nets = Networks::<f32>::init(&specs(6), 13).unwrap();
    let mut rng = Rng::seeded(3, 0);
    let x = rand_images(&mut rng, 3, 32);
    let y = rand_images(&mut rng, 3, 32);
    let t = rand_trans(&mut rng, 3, 6);
    let far = Transition::new(t.data().mapv(|v| v + 25.0)).unwrap();
    let s = disc_match(&nets.disc, &x, &t, &y).unwrap();
    let s_far = disc_match(&nets.disc, &x, &far, &y).unwrap();
    assert!(
        s.iter().zip(s_far.iter()).any(|(a, b)| a != b),
        "match score ignores the transition"
    );
}

#[test]
fn param_counts_are_stable_across_constructions() {
    let a = Networks::<f32>::init(&specs(6), 123).unwrap();
    let b = Networks::<f32>::init(&specs(6), 456).unwrap();
    let ca = a.param_counts();
    let cb = b.param_counts();
    assert_eq!(ca, cb);
    assert!(ca.iter().all(|(_, n)| *n > 0));
    // same seed gives identical parameters
    let c = Networks::<f32>::init(&specs(6), 123).unwrap();
    for (ea, ec) in a
        .generator
        .params
        .entries()
        .iter()
        .zip(c.generator.params.entries())
    {
        assert_eq!(ea.1, ec.1);
    }
}

#[test]
fn encode_identity_pair_has_expected_shape() {
    let nets = Networks::<f32>::init(&specs(6), 5).unwrap();
    let mut rng = Rng::seeded(9, 0);
    let x = rand_images(&mut rng, 3, 32);
    let p = encode(&nets.encoder, &x, &x).unwrap();
    assert_eq!(p.mean.dim(), (3, 6));
    // log_var respects the clamp
    assert!(p.log_var.iter().all(|v| v.abs() <= 10.0));
}
