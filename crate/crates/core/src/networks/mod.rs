//! The five parameterized function approximators: generator `G`, stochastic
//! transition encoder `E`, image discriminator `D_Real`, transition
//! discriminator `D_T` and triplet matching discriminator `D_Match`.
//! `D_Real` and `D_Match` share a convolutional trunk with separate input
//! adapters and output heads; `D_T` is a standalone MLP on vectors.

mod discriminator;
mod encoder;
mod generator;

pub use discriminator::{DiscBundle, DiscTrans};
pub use encoder::Encoder;
pub use generator::Generator;

use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::scalar::{fl, Scalar};
use crate::tensor::{Tape, Var};
use crate::types::{ImageBatch, Transition, TransitionPosterior};
use ndarray::{Array1, ArrayD, IxDyn};
use serde::{Deserialize, Serialize};

/// Weight init: zero-mean Gaussian with this standard deviation.
pub const INIT_STD: f64 = 0.02;

/// How the transition vector enters image networks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Conditioning {
    /// Broadcast `t` to a `[batch, d_t, h, w]` map and concatenate channelwise.
    #[default]
    SpatialBroadcast,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorSpec {
    pub img_channels: usize,
    pub base_channels: usize,
    /// Number of down/up sampling levels.
    pub depth: usize,
    pub d_t: usize,
    pub conditioning: Conditioning,
}

impl Default for GeneratorSpec {
    fn default() -> Self {
        GeneratorSpec {
            img_channels: 3,
            base_channels: 16,
            depth: 2,
            d_t: 6,
            conditioning: Conditioning::SpatialBroadcast,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EncoderSpec {
    pub img_channels: usize,
    pub base_channels: usize,
    pub residual_blocks: usize,
    pub d_t: usize,
}

impl Default for EncoderSpec {
    fn default() -> Self {
        EncoderSpec {
            img_channels: 3,
            base_channels: 16,
            residual_blocks: 4,
            d_t: 6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiscriminatorBundleSpec {
    pub img_channels: usize,
    pub base_channels: usize,
    /// Stride-2 conv layers in the shared trunk.
    pub shared_conv_layers: usize,
    /// Channel doubling in the trunk is capped here.
    pub max_channels: usize,
    pub d_t: usize,
    pub dt_mlp_layers: usize,
    pub dt_hidden: usize,
}

impl Default for DiscriminatorBundleSpec {
    fn default() -> Self {
        DiscriminatorBundleSpec {
            img_channels: 3,
            base_channels: 12,
            shared_conv_layers: 6,
            max_channels: 64,
            d_t: 6,
            dt_mlp_layers: 4,
            dt_hidden: 64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkSpecs {
    pub generator: GeneratorSpec,
    pub encoder: EncoderSpec,
    pub discriminator: DiscriminatorBundleSpec,
}

impl NetworkSpecs {
    /// Apply one `d_t` across all networks.
    pub fn with_dt(mut self, d_t: usize) -> Self {
        self.generator.d_t = d_t;
        self.encoder.d_t = d_t;
        self.discriminator.d_t = d_t;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.generator.depth < 2 {
            return Err(Error::Config("generator depth must be >= 2".into()));
        }
        if self.encoder.residual_blocks < 1 {
            return Err(Error::Config("encoder needs at least one residual block".into()));
        }
        if self.generator.d_t != self.encoder.d_t || self.generator.d_t != self.discriminator.d_t
        {
            return Err(Error::Config("d_t differs across network specs".into()));
        }
        if self.discriminator.dt_mlp_layers < 2 {
            return Err(Error::Config("transition MLP needs at least 2 layers".into()));
        }
        Ok(())
    }
}

/// Index of one tensor inside a [`ParamStore`].
#[derive(Debug, Clone, Copy)]
pub struct PIdx(usize);

/// Named parameter tensors of one network, in construction order.
pub struct ParamStore<F: Scalar> {
    entries: Vec<(String, ArrayD<F>)>,
}

impl<F: Scalar> ParamStore<F> {
    pub fn new() -> Self {
        ParamStore { entries: Vec::new() }
    }

    fn add(&mut self, name: &str, value: ArrayD<F>) -> PIdx {
        self.entries.push((name.to_string(), value));
        PIdx(self.entries.len() - 1)
    }

    pub fn entries(&self) -> &[(String, ArrayD<F>)] {
        &self.entries
    }

    pub fn tensors_mut(&mut self) -> impl Iterator<Item = &mut ArrayD<F>> {
        self.entries.iter_mut().map(|(_, t)| t)
    }

    pub fn get_mut(&mut self, i: usize) -> &mut ArrayD<F> {
        &mut self.entries[i].1
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Total number of scalar parameters.
    pub fn param_count(&self) -> usize {
        self.entries.iter().map(|(_, t)| t.len()).sum()
    }

    /// Bind every tensor to `tape` as a leaf.
    pub fn bind(&self, tape: &Tape<F>) -> BoundParams {
        BoundParams {
            vars: self
                .entries
                .iter()
                .map(|(_, t)| tape.var(t.clone()))
                .collect(),
        }
    }

    pub fn set_from(&mut self, name: &str, value: ArrayD<F>) -> Result<()> {
        let entry = self
            .entries
            .iter_mut()
            .find(|(n, _)| n == name)
            .ok_or_else(|| Error::Checkpoint(format!("unknown parameter `{name}`")))?;
        if entry.1.shape() != value.shape() {
            return Err(Error::Checkpoint(format!(
                "parameter `{name}` shape {:?} does not match stored {:?}",
                entry.1.shape(),
                value.shape()
            )));
        }
        entry.1 = value;
        Ok(())
    }
}

/// Tape handles for one bound [`ParamStore`], aligned by index.
pub struct BoundParams {
    vars: Vec<Var>,
}

impl BoundParams {
    pub fn get(&self, i: PIdx) -> Var {
        self.vars[i.0]
    }

    pub fn vars(&self) -> &[Var] {
        &self.vars
    }
}

impl<F: Scalar> Default for ParamStore<F> {
    fn default() -> Self {
        Self::new()
    }
}

/// `(weight, bias)` parameter handles for simple external layers.
pub type PIdxPair = (PIdx, PIdx);

/// Register a conv layer's parameters (weight `[o, ci, k, k]`, zero bias).
pub fn conv_pair<F: Scalar>(
    ps: &mut ParamStore<F>,
    rng: &mut Rng,
    name: &str,
    ci: usize,
    co: usize,
    k: usize,
) -> PIdxPair {
    let w = ps.add(
        &format!("{name}.w"),
        gaussian_init(rng, &[co, ci, k, k], INIT_STD),
    );
    let b = ps.add(&format!("{name}.b"), ArrayD::zeros(IxDyn(&[co])));
    (w, b)
}

/// Register a linear layer's parameters (weight `[o, ci]`, zero bias).
pub fn linear_pair<F: Scalar>(
    ps: &mut ParamStore<F>,
    rng: &mut Rng,
    name: &str,
    ci: usize,
    co: usize,
) -> PIdxPair {
    let w = ps.add(&format!("{name}.w"), gaussian_init(rng, &[co, ci], INIT_STD));
    let b = ps.add(&format!("{name}.b"), ArrayD::zeros(IxDyn(&[co])));
    (w, b)
}

fn gaussian_init<F: Scalar>(rng: &mut Rng, shape: &[usize], std: f64) -> ArrayD<F> {
    let mut a = rng.normal_array::<F>(shape);
    let s = fl::<F>(std);
    a.mapv_inplace(|v| v * s);
    a
}

/// Conv layer handle: weight `[o, ci, k, k]`, bias `[o]`.
pub(crate) struct Conv {
    pub w: PIdx,
    pub b: PIdx,
    pub stride: usize,
    pub pad: usize,
}

impl Conv {
    pub fn init<F: Scalar>(
        ps: &mut ParamStore<F>,
        rng: &mut Rng,
        name: &str,
        ci: usize,
        co: usize,
        k: usize,
        stride: usize,
        pad: usize,
    ) -> Self {
        let w = ps.add(
            &format!("{name}.w"),
            gaussian_init(rng, &[co, ci, k, k], INIT_STD),
        );
        let b = ps.add(&format!("{name}.b"), ArrayD::zeros(IxDyn(&[co])));
        Conv { w, b, stride, pad }
    }

    pub fn fwd<F: Scalar>(&self, tape: &Tape<F>, bp: &BoundParams, x: Var) -> Var {
        tape.conv2d(x, bp.get(self.w), bp.get(self.b), self.stride, self.pad)
    }
}

/// Transposed conv layer handle: weight `[ci, o, k, k]`, bias `[o]`.
pub(crate) struct ConvT {
    pub w: PIdx,
    pub b: PIdx,
    pub stride: usize,
    pub pad: usize,
}

impl ConvT {
    pub fn init<F: Scalar>(
        ps: &mut ParamStore<F>,
        rng: &mut Rng,
        name: &str,
        ci: usize,
        co: usize,
        k: usize,
        stride: usize,
        pad: usize,
    ) -> Self {
        let w = ps.add(
            &format!("{name}.w"),
            gaussian_init(rng, &[ci, co, k, k], INIT_STD),
        );
        let b = ps.add(&format!("{name}.b"), ArrayD::zeros(IxDyn(&[co])));
        ConvT { w, b, stride, pad }
    }

    pub fn fwd<F: Scalar>(&self, tape: &Tape<F>, bp: &BoundParams, x: Var) -> Var {
        tape.conv_transpose2d(x, bp.get(self.w), bp.get(self.b), self.stride, self.pad)
    }
}

pub(crate) struct InstNorm {
    pub g: PIdx,
    pub b: PIdx,
}

impl InstNorm {
    pub fn init<F: Scalar>(ps: &mut ParamStore<F>, name: &str, c: usize) -> Self {
        let g = ps.add(
            &format!("{name}.gamma"),
            ArrayD::from_elem(IxDyn(&[c]), F::one()),
        );
        let b = ps.add(&format!("{name}.beta"), ArrayD::zeros(IxDyn(&[c])));
        InstNorm { g, b }
    }

    pub fn fwd<F: Scalar>(&self, tape: &Tape<F>, bp: &BoundParams, x: Var) -> Var {
        tape.instance_norm(x, bp.get(self.g), bp.get(self.b), fl::<F>(1e-5))
    }
}

pub(crate) struct LinearLayer {
    pub w: PIdx,
    pub b: PIdx,
}

impl LinearLayer {
    pub fn init<F: Scalar>(
        ps: &mut ParamStore<F>,
        rng: &mut Rng,
        name: &str,
        ci: usize,
        co: usize,
    ) -> Self {
        let w = ps.add(
            &format!("{name}.w"),
            gaussian_init(rng, &[co, ci], INIT_STD),
        );
        let b = ps.add(&format!("{name}.b"), ArrayD::zeros(IxDyn(&[co])));
        LinearLayer { w, b }
    }

    pub fn fwd<F: Scalar>(&self, tape: &Tape<F>, bp: &BoundParams, x: Var) -> Var {
        tape.linear(x, bp.get(self.w), bp.get(self.b))
    }
}

/// All five networks (the discriminator bundle hosts two of them).
pub struct Networks<F: Scalar> {
    pub generator: Generator<F>,
    pub encoder: Encoder<F>,
    pub disc: DiscBundle<F>,
    pub disc_t: DiscTrans<F>,
    pub specs: NetworkSpecs,
}

impl<F: Scalar> Networks<F> {
    pub fn init(specs: &NetworkSpecs, seed: u64) -> Result<Self> {
        specs.validate()?;
        // distinct init streams so one network's size does not shift another's draws
        let mut rg = Rng::seeded(seed, 0x47);
        let mut re = Rng::seeded(seed, 0x45);
        let mut rd = Rng::seeded(seed, 0x44);
        let mut rt = Rng::seeded(seed, 0x54);
        Ok(Networks {
            generator: Generator::init(&specs.generator, &mut rg),
            encoder: Encoder::init(&specs.encoder, &mut re),
            disc: DiscBundle::init(&specs.discriminator, &mut rd),
            disc_t: DiscTrans::init(&specs.discriminator, &mut rt),
            specs: specs.clone(),
        })
    }

    pub fn param_counts(&self) -> Vec<(&'static str, usize)> {
        vec![
            ("G", self.generator.params.param_count()),
            ("E", self.encoder.params.param_count()),
            ("D_Real+D_Match", self.disc.params.param_count()),
            ("D_T", self.disc_t.params.param_count()),
        ]
    }
}

fn scores_to_array<F: Scalar>(tape: &Tape<F>, v: Var) -> Array1<F> {
    let val = tape.value(v);
    Array1::from_iter(val.iter().copied())
}

/// `ŷ = G(x, t)`: translate a batch under explicit transitions.
pub fn generate<F: Scalar>(
    g: &Generator<F>,
    x: &ImageBatch<F>,
    t: &Transition<F>,
) -> Result<ImageBatch<F>> {
    if x.batch() != t.batch() {
        return Err(Error::Dimension(format!(
            "generate: image batch {} vs transition batch {}",
            x.batch(),
            t.batch()
        )));
    }
    g.check_input(x, t.width())?;
    let tape = Tape::new();
    let bp = g.params.bind(&tape);
    let xv = tape.var(x.to_dyn());
    let tv = tape.var(t.to_dyn());
    let out = g.fwd(&tape, &bp, xv, tv);
    let arr = tape
        .value(out)
        .to_owned()
        .into_dimensionality::<ndarray::Ix4>()
        .expect("generator output rank");
    ImageBatch::new(arr)
}

/// `E(x, y)`: posterior over the transition explaining `x → y`.
pub fn encode<F: Scalar>(
    e: &Encoder<F>,
    x: &ImageBatch<F>,
    y: &ImageBatch<F>,
) -> Result<TransitionPosterior<F>> {
    if x.data().dim() != y.data().dim() {
        return Err(Error::Dimension(format!(
            "encode: x {:?} vs y {:?}",
            x.data().dim(),
            y.data().dim()
        )));
    }
    let tape = Tape::new();
    let bp = e.params.bind(&tape);
    let xv = tape.var(x.to_dyn());
    let yv = tape.var(y.to_dyn());
    let (mean, log_var) = e.fwd(&tape, &bp, xv, yv);
    let to2 = |v: Var| {
        tape.value(v)
            .to_owned()
            .into_dimensionality::<ndarray::Ix2>()
            .expect("posterior rank")
    };
    TransitionPosterior::new(to2(mean), to2(log_var))
}

/// Raw realism score per sample.
pub fn disc_real<F: Scalar>(d: &DiscBundle<F>, y: &ImageBatch<F>) -> Result<Array1<F>> {
    let tape = Tape::new();
    let bp = d.params.bind(&tape);
    let yv = tape.var(y.to_dyn());
    let s = d.fwd_real(&tape, &bp, yv);
    Ok(scores_to_array(&tape, s))
}

/// Raw transition-realism score per sample.
pub fn disc_trans<F: Scalar>(dt: &DiscTrans<F>, t: &Transition<F>) -> Result<Array1<F>> {
    let tape = Tape::new();
    let bp = dt.params.bind(&tape);
    let tv = tape.var(t.to_dyn());
    let s = dt.fwd(&tape, &bp, tv);
    Ok(scores_to_array(&tape, s))
}

/// Joint plausibility score of `(x, t, y)` triplets.
pub fn disc_match<F: Scalar>(
    d: &DiscBundle<F>,
    x: &ImageBatch<F>,
    t: &Transition<F>,
    y: &ImageBatch<F>,
) -> Result<Array1<F>> {
    if x.batch() != t.batch() || x.batch() != y.batch() {
        return Err(Error::Dimension(format!(
            "disc_match: batches x={} t={} y={}",
            x.batch(),
            t.batch(),
            y.batch()
        )));
    }
    let tape = Tape::new();
    let bp = d.params.bind(&tape);
    let xv = tape.var(x.to_dyn());
    let tv = tape.var(t.to_dyn());
    let yv = tape.var(y.to_dyn());
    let s = d.fwd_match(&tape, &bp, xv, tv, yv);
    Ok(scores_to_array(&tape, s))
}
