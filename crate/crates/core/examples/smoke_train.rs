//! Short end-to-end training probe: reports the quantities the acceptance
//! properties track, at a few milestones.

use tcgan::eval::{attr_accuracy, interp_probe_avg, single_edit_battery, ssim};
use tcgan::networks::{
    encode, generate, DiscriminatorBundleSpec, EncoderSpec, GeneratorSpec, NetworkSpecs,
};
use tcgan::scalar::dbl;
use tcgan::tasks::{gen_shapes_attr, Dataset};
use tcgan::trainer::{fit_from, FitOptions, TrainState};
use tcgan::types::{ImageBatch, TrainConfig, Transition};

fn probe(state: &TrainState<f32>, ds: &Dataset<f32>, label: &str) {
    let idxs: Vec<usize> = (0..64).collect();
    let triplet = ds.make_batch(&idxs).unwrap();
    // E(x,x) mean norm
    let p = encode(&state.nets.encoder, &triplet.x, &triplet.x).unwrap();
    let exx: f64 = p.mean.iter().map(|&v| dbl(v).abs()).sum::<f64>() / p.mean.len() as f64;
    // self recon
    let zero = Transition::new(ndarray::Array2::zeros((64, 6))).unwrap();
    let xs = generate(&state.nets.generator, &triplet.x, &zero).unwrap();
    let s = ssim(&triplet.x, &xs).unwrap();
    // cycle L1
    let yh = generate(&state.nets.generator, &triplet.x, &triplet.t).unwrap();
    let neg = ds.adapter.negate(&triplet.t);
    let xc = generate(&state.nets.generator, &yh, &neg).unwrap();
    let cyc: f64 = triplet
        .x
        .data()
        .iter()
        .zip(xc.data().iter())
        .map(|(&a, &b)| (dbl(a) - dbl(b)).abs())
        .sum::<f64>()
        / triplet.x.data().len() as f64;
    let acc = attr_accuracy(&state.nets.generator, ds, &single_edit_battery(), 48).unwrap();
    let interp = interp_probe_avg(&state.nets.generator, ds, 9, 4).unwrap();
    let _ = ImageBatch::new(xc.data().clone());
    println!(
        "[{label}] E(x,x)={exx:.4} ssim_self={s:.3} cycleL1={cyc:.3} acc={:?} avg={:.3} interp={interp:.3}",
        acc.per_attr, acc.average
    );
}

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let steps: usize = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(2000);
    let lr: f64 = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(2e-4);
    let form = args.get(3).map(|s| s.as_str()).unwrap_or("logistic");
    let d_t = 6;
    let specs = NetworkSpecs {
        generator: GeneratorSpec { base_channels: 16, depth: 2, d_t, ..Default::default() },
        encoder: EncoderSpec { base_channels: 12, residual_blocks: 4, d_t, ..Default::default() },
        discriminator: DiscriminatorBundleSpec {
            base_channels: 12,
            max_channels: 64,
            d_t,
            ..Default::default()
        },
    };
    let cfg = TrainConfig {
        batch_size: 16,
        total_steps: steps,
        lr,
        seed: 7,
        adversarial_form: if form == "ls" {
            tcgan::types::AdversarialForm::LeastSquares
        } else {
            tcgan::types::AdversarialForm::Logistic
        },
        ..Default::default()
    };
    let ds = gen_shapes_attr::<f32>(1024, 11);
    eprintln!("training {steps} steps, lr {lr}, form {form}");
    let mut state = TrainState::<f32>::init(&specs, &cfg).unwrap();
    probe(&state, &ds, "init");
    let opts = FitOptions { log_every: 200, ..Default::default() };
    let milestones = [500usize, 1000, 2000, 4000, 8000, 12000, 16000, 20000];
    let mut done = 0usize;
    for &m in milestones.iter().filter(|&&m| m <= steps) {
        let chunk = m - done;
        let (s2, _) = fit_from(state, &ds, &cfg, &opts, chunk).unwrap();
        state = s2;
        done = m;
        probe(&state, &ds, &format!("step{done}"));
    }
    if done < steps {
        let (s2, _) = fit_from(state, &ds, &cfg, &opts, steps - done).unwrap();
        state = s2;
        probe(&state, &ds, &format!("step{steps}"));
    }
}
