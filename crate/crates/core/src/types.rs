//! Shared data model: image batches, transitions, posteriors, triplets and
//! the training configuration. All types are immutable value records after
//! construction and safe to share across threads.

use crate::error::{Error, Result};
use crate::scalar::{fl, Scalar};
use ndarray::{Array2, Array4, ArrayD, Zip};
use serde::{Deserialize, Serialize};

/// Range used by log-variance clamping; keeps `exp` well behaved.
pub const LOG_VAR_CLAMP: f64 = 10.0;

/// Batch of square images in `[-1, 1]`, layout `[batch, channels, h, w]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageBatch<F: Scalar> {
    data: Array4<F>,
}

impl<F: Scalar> ImageBatch<F> {
    pub fn new(data: Array4<F>) -> Result<Self> {
        let (n, c, h, w) = data.dim();
        if n < 1 {
            return Err(Error::Dimension("image batch must be non-empty".into()));
        }
        if c != 1 && c != 3 {
            return Err(Error::Dimension(format!(
                "image channels must be 1 or 3, got {c}"
            )));
        }
        if h != w {
            return Err(Error::Dimension(format!(
                "images must be square, got {h}x{w}"
            )));
        }
        let one = F::one();
        for &v in data.iter() {
            if !v.is_finite() {
                return Err(Error::Value("image contains a non-finite value".into()));
            }
            if v < -one || v > one {
                return Err(Error::Value(format!(
                    "image value {v} outside [-1, 1]"
                )));
            }
        }
        Ok(ImageBatch { data })
    }

    pub fn data(&self) -> &Array4<F> {
        &self.data
    }

    pub fn into_data(self) -> Array4<F> {
        self.data
    }

    pub fn to_dyn(&self) -> ArrayD<F> {
        self.data.clone().into_dyn()
    }

    pub fn batch(&self) -> usize {
        self.data.dim().0
    }

    pub fn channels(&self) -> usize {
        self.data.dim().1
    }

    pub fn side(&self) -> usize {
        self.data.dim().2
    }
}

/// Transition vectors, layout `[batch, d_t]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition<F: Scalar> {
    data: Array2<F>,
}

impl<F: Scalar> Transition<F> {
    pub fn new(data: Array2<F>) -> Result<Self> {
        if data.dim().0 < 1 {
            return Err(Error::Dimension("transition batch must be non-empty".into()));
        }
        if data.dim().1 < 1 {
            return Err(Error::Dimension("transition width must be positive".into()));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Value("transition contains a non-finite value".into()));
        }
        Ok(Transition { data })
    }

    pub fn data(&self) -> &Array2<F> {
        &self.data
    }

    pub fn into_data(self) -> Array2<F> {
        self.data
    }

    pub fn to_dyn(&self) -> ArrayD<F> {
        self.data.clone().into_dyn()
    }

    pub fn batch(&self) -> usize {
        self.data.dim().0
    }

    pub fn width(&self) -> usize {
        self.data.dim().1
    }
}

/// Diagonal-Gaussian posterior over transitions: `(mean, log_var)`, with the
/// log-variance clamped to `[-10, 10]` at construction.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionPosterior<F: Scalar> {
    pub mean: Array2<F>,
    pub log_var: Array2<F>,
}

impl<F: Scalar> TransitionPosterior<F> {
    pub fn new(mean: Array2<F>, log_var: Array2<F>) -> Result<Self> {
        if mean.dim() != log_var.dim() {
            return Err(Error::Dimension(format!(
                "posterior mean {:?} vs log_var {:?}",
                mean.dim(),
                log_var.dim()
            )));
        }
        if mean.iter().chain(log_var.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Value("posterior contains a non-finite value".into()));
        }
        let lim = fl::<F>(LOG_VAR_CLAMP);
        let log_var = log_var.mapv(|v| v.min(lim).max(-lim));
        Ok(TransitionPosterior { mean, log_var })
    }
}

/// One translation sample: input image, transition, output image.
#[derive(Debug, Clone)]
pub struct Triplet<F: Scalar> {
    pub x: ImageBatch<F>,
    pub t: Transition<F>,
    pub y: ImageBatch<F>,
    /// Supervised sample (`true`) vs independently drawn output (`false`).
    pub paired: bool,
}

/// Validate shapes and pack a [`Triplet`].
pub fn make_triplet<F: Scalar>(
    x: ImageBatch<F>,
    t: Transition<F>,
    y: ImageBatch<F>,
    paired: bool,
) -> Result<Triplet<F>> {
    if x.batch() != t.batch() || x.batch() != y.batch() {
        return Err(Error::Dimension(format!(
            "triplet batch sizes differ: x={}, t={}, y={}",
            x.batch(),
            t.batch(),
            y.batch()
        )));
    }
    if x.data().dim() != y.data().dim() {
        return Err(Error::Dimension(format!(
            "triplet image shapes differ: x={:?}, y={:?}",
            x.data().dim(),
            y.data().dim()
        )));
    }
    Ok(Triplet { x, t, y, paired })
}

/// Reparameterized draw: `mean + exp(log_var / 2) ⊙ noise`.
pub fn sample_posterior<F: Scalar>(
    p: &TransitionPosterior<F>,
    noise: &Array2<F>,
) -> Result<Transition<F>> {
    if noise.dim() != p.mean.dim() {
        return Err(Error::Dimension(format!(
            "noise shape {:?} vs posterior {:?}",
            noise.dim(),
            p.mean.dim()
        )));
    }
    let half = fl::<F>(0.5);
    let mut out = Array2::zeros(p.mean.dim());
    Zip::from(&mut out)
        .and(&p.mean)
        .and(&p.log_var)
        .and(noise)
        .for_each(|o, &m, &lv, &e| {
            *o = m + (lv * half).exp() * e;
        });
    Transition::new(out)
}

/// Elementwise negation. Task adapters may override this for transitions
/// whose semantics are not additive (see the inpainting adapter).
pub fn negate_transition<F: Scalar>(t: &Transition<F>) -> Transition<F> {
    Transition {
        data: t.data().mapv(|v| -v),
    }
}

/// Adversarial objective family for `D_Real` / `D_T`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum AdversarialForm {
    /// Non-saturating logistic losses (the `log D` form).
    #[default]
    Logistic,
    /// Least-squares targets 1 (real) / 0 (fake).
    LeastSquares,
}

/// Loss coefficients, optimizer settings and schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    /// Weight of the image reconstruction block.
    pub lambda: f64,
    /// Weight of the transition prediction loss on observed transitions.
    pub lambda1: f64,
    /// Weight of the transition prediction loss on unseen transitions.
    pub lambda2: f64,
    /// Weight of the triplet matching losses.
    pub lambda3: f64,
    /// Weight of the output reconstruction loss; 0 for unpaired training.
    pub gamma: f64,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub batch_size: usize,
    /// Steps of generator+encoder training per phase cycle.
    pub phase_a_steps: usize,
    /// Steps of generator-only transition-prediction training per cycle.
    pub phase_b_steps: usize,
    pub total_steps: usize,
    pub seed: u64,
    pub adversarial_form: AdversarialForm,
    pub d_t: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lambda: 10.0,
            lambda1: 1.0,
            lambda2: 0.5,
            lambda3: 1.0,
            gamma: 0.0,
            lr: 6e-5,
            beta1: 0.5,
            beta2: 0.999,
            batch_size: 32,
            phase_a_steps: 1,
            phase_b_steps: 1,
            total_steps: 20_000,
            seed: 0,
            adversarial_form: AdversarialForm::Logistic,
            d_t: 6,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("lambda", self.lambda),
            ("lambda1", self.lambda1),
            ("lambda2", self.lambda2),
            ("lambda3", self.lambda3),
            ("gamma", self.gamma),
            ("lr", self.lr),
            ("beta1", self.beta1),
            ("beta2", self.beta2),
        ] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::Config(format!(
                    "{name} must be finite and >= 0, got {v}"
                )));
            }
        }
        if self.batch_size < 1 {
            return Err(Error::Config("batch_size must be >= 1".into()));
        }
        if self.lambda3 > 0.0 && self.batch_size < 2 {
            return Err(Error::Config(
                "batch_size must be >= 2 when lambda3 > 0 (wrong triplets permute the batch)"
                    .into(),
            ));
        }
        if self.phase_a_steps == 0 && self.phase_b_steps == 0 {
            return Err(Error::Config(
                "phase_a_steps and phase_b_steps cannot both be 0".into(),
            ));
        }
        if self.d_t == 0 {
            return Err(Error::Config("d_t must be positive".into()));
        }
        Ok(())
    }

    /// Training phase for a given step under the configured cadence.
    pub fn phase(&self, step: u64) -> Phase {
        let cycle = (self.phase_a_steps + self.phase_b_steps) as u64;
        if cycle == 0 || (step % cycle) < self.phase_a_steps as u64 {
            Phase::A
        } else {
            Phase::B
        }
    }
}

/// Two-phase schedule marker.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Phase {
    /// Generator and encoder update jointly on the full objective.
    A,
    /// Generator-only update on the transition prediction terms.
    B,
}

impl std::fmt::Display for Phase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Phase::A => write!(f, "A"),
            Phase::B => write!(f, "B"),
        }
    }
}
