//! Manual throughput probe (run with --ignored); informs run budgets.

use tcgan::networks::{DiscriminatorBundleSpec, EncoderSpec, GeneratorSpec, NetworkSpecs};
use tcgan::tasks::gen_shapes_attr;
use tcgan::trainer::{fit, FitOptions};
use tcgan::types::TrainConfig;

#[test]
#[ignore]
fn steps_per_second() {
    let specs = NetworkSpecs {
        generator: GeneratorSpec {
            base_channels: 12,
            depth: 2,
            d_t: 6,
            ..Default::default()
        },
        encoder: EncoderSpec {
            base_channels: 12,
            residual_blocks: 4,
            d_t: 6,
            ..Default::default()
        },
        discriminator: DiscriminatorBundleSpec {
            base_channels: 8,
            max_channels: 48,
            d_t: 6,
            ..Default::default()
        },
    };
    let cfg = TrainConfig {
        batch_size: 16,
        total_steps: 30,
        lr: 2e-4,
        seed: 1,
        ..Default::default()
    };
    let ds = gen_shapes_attr::<f32>(256, 1);
    let t0 = std::time::Instant::now();
    let (_, recs) = fit(&ds, &cfg, &specs, &FitOptions::default()).unwrap();
    let dt = t0.elapsed().as_secs_f64();
    eprintln!(
        "30 steps in {dt:.2}s => {:.2} steps/s (last total_g {:.3})",
        30.0 / dt,
        recs.last().unwrap().report.total_g
    );
}
