use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use super::config::{Head, LayerSpec, ModelConfig};
use crate::conv::{s2_conv_filter_grad, s2_conv_spectral, so3_conv_grads, so3_conv_spectral, FilterBank};
use crate::error::{Error, Result};
use crate::gft::{Domain, S2Signal, S2Spectrum, S2Transform, SO3Signal, SO3Spectrum, So3Transform};
use crate::harmonics::so3_coeff_count;

/// Gain applied to SO(3) filter variance when the layer follows a ReLU,
/// compensating the halved mean square of rectified features.
const RELU_GAIN: f64 = 2.0;

#[derive(Clone, Debug, PartialEq)]
pub enum Layer {
    S2Conv(FilterBank),
    So3Conv(FilterBank),
    Relu,
    Linear {
        dim_in: usize,
        dim_out: usize,
        /// Row-major `dim_out × dim_in`.
        weights: Vec<f64>,
        bias: Vec<f64>,
    },
    Softmax,
}

struct Plans {
    s2: S2Transform,
    so3: BTreeMap<usize, So3Transform>,
}

impl Plans {
    fn so3(&self, b: usize) -> &So3Transform {
        &self.so3[&b]
    }
}

/// A network built from a validated [`ModelConfig`], with its transform
/// tables.
#[derive(Clone)]
pub struct Model {
    config: ModelConfig,
    layers: Vec<Layer>,
    plans: Arc<Plans>,
}

impl fmt::Debug for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Model")
            .field("config", &self.config)
            .field("parameters", &self.param_count())
            .finish()
    }
}

/// Per-layer parameter gradients.
#[derive(Clone, Debug, PartialEq)]
pub enum LayerGrad {
    None,
    Filter(FilterBank),
    Linear { weights: Vec<f64>, bias: Vec<f64> },
}

/// Loss and gradients of one example.
#[derive(Clone, Debug)]
pub struct Backward {
    pub loss: f64,
    pub probabilities: Vec<f64>,
    pub grads: Vec<LayerGrad>,
}

enum Value {
    S2Spec(S2Spectrum),
    Spec(SO3Spectrum),
    Sig(SO3Signal),
    Vector(Vec<f64>),
}

enum Step {
    S2Conv { layer: usize, input: S2Spectrum },
    So3Conv { layer: usize, input: SO3Spectrum },
    Fft { b: usize },
    Ifft { b: usize },
    Relu { input: SO3Signal },
    HeadSpatial { b: usize, k: usize },
    HeadMeanSig { b: usize, k: usize },
    HeadMeanSpec { b: usize, k: usize },
    Linear { layer: usize, input: Vec<f64> },
}

fn sign(k: isize) -> f64 {
    if k.rem_euclid(2) == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Independent real coordinates of one real-signal S² filter: per degree,
/// `Re ψ_0`, then `Re ψ_m, Im ψ_m` for `m = 1..=l`.
fn pack_s2(pair: &[Complex64], b: usize, out: &mut Vec<f64>) {
    for l in 0..b {
        let base = l * l + l;
        out.push(pair[base].re);
        for m in 1..=l {
            out.push(pair[base + m].re);
            out.push(pair[base + m].im);
        }
    }
}

fn unpack_s2(params: &[f64], b: usize, pair: &mut [Complex64]) -> usize {
    let mut i = 0;
    for l in 0..b {
        let base = l * l + l;
        pair[base] = Complex64::new(params[i], 0.0);
        i += 1;
        for m in 1..=l {
            let z = Complex64::new(params[i], params[i + 1]);
            i += 2;
            pair[base + m] = z;
            pair[base - m] = z.conj() * sign(m as isize);
        }
    }
    i
}

fn pack_s2_grad(g: &[Complex64], b: usize, out: &mut Vec<f64>) {
    for l in 0..b {
        let base = l * l + l;
        out.push(g[base].re);
        for m in 1..=l {
            let s = sign(m as isize);
            let (p, n) = (g[base + m], g[base - m]);
            out.push(p.re + s * n.re);
            out.push(p.im - s * n.im);
        }
    }
}

/// Independent entries `(m, n)` of an SO(3) block: `(0, 0)` real, and the
/// half with `m > 0` or `m = 0, n > 0` complex.
fn so3_independent(l: usize) -> impl Iterator<Item = (isize, isize)> {
    let li = l as isize;
    (0..=li).flat_map(move |m| {
        let start = if m == 0 { 0 } else { -li };
        (start..=li).map(move |n| (m, n))
    })
}

#[inline]
fn so3_pos(l: usize, m: isize, n: isize) -> usize {
    let w = 2 * l + 1;
    let li = l as isize;
    so3_coeff_count(l) + ((m + li) as usize) * w + (n + li) as usize
}

fn pack_so3(pair: &[Complex64], b: usize, out: &mut Vec<f64>) {
    for l in 0..b {
        for (m, n) in so3_independent(l) {
            let z = pair[so3_pos(l, m, n)];
            out.push(z.re);
            if (m, n) != (0, 0) {
                out.push(z.im);
            }
        }
    }
}

fn unpack_so3(params: &[f64], b: usize, pair: &mut [Complex64]) -> usize {
    let mut i = 0;
    for l in 0..b {
        for (m, n) in so3_independent(l) {
            if (m, n) == (0, 0) {
                pair[so3_pos(l, 0, 0)] = Complex64::new(params[i], 0.0);
                i += 1;
            } else {
                let z = Complex64::new(params[i], params[i + 1]);
                i += 2;
                pair[so3_pos(l, m, n)] = z;
                pair[so3_pos(l, -m, -n)] = z.conj() * sign(m + n);
            }
        }
    }
    i
}

fn pack_so3_grad(g: &[Complex64], b: usize, out: &mut Vec<f64>) {
    for l in 0..b {
        for (m, n) in so3_independent(l) {
            let p = g[so3_pos(l, m, n)];
            if (m, n) == (0, 0) {
                out.push(p.re);
            } else {
                let s = sign(m + n);
                let q = g[so3_pos(l, -m, -n)];
                out.push(p.re + s * q.re);
                out.push(p.im - s * q.im);
            }
        }
    }
}

fn pack_bank(bank: &FilterBank, out: &mut Vec<f64>, grad: bool) {
    let b = bank.bandwidth();
    for j in 0..bank.out_channels() {
        for k in 0..bank.in_channels() {
            let pair = bank.pair(j, k);
            match (bank.domain(), grad) {
                (Domain::S2, false) => pack_s2(pair, b, out),
                (Domain::S2, true) => pack_s2_grad(pair, b, out),
                (Domain::SO3, false) => pack_so3(pair, b, out),
                (Domain::SO3, true) => pack_so3_grad(pair, b, out),
            }
        }
    }
}

fn unpack_bank(params: &[f64], bank: &mut FilterBank) -> usize {
    let (b, domain) = (bank.bandwidth(), bank.domain());
    let mut used = 0;
    for j in 0..bank.out_channels() {
        for k in 0..bank.in_channels() {
            let pair = bank.pair_mut(j, k);
            used += match domain {
                Domain::S2 => unpack_s2(&params[used..], b, pair),
                Domain::SO3 => unpack_so3(&params[used..], b, pair),
            };
        }
    }
    used
}

fn bank_param_count(bank: &FilterBank) -> usize {
    bank.in_channels() * bank.out_channels() * bank.pair_len()
}

/// Gaussian filter coefficients of a real signal whose per-degree
/// coefficient variance is `variance(l)`.
fn init_bank<R: Rng + ?Sized>(
    domain: Domain,
    b: usize,
    k_in: usize,
    k_out: usize,
    variance: impl Fn(usize) -> f64,
    rng: &mut R,
) -> Result<FilterBank> {
    let mut bank = FilterBank::zeros(domain, b, k_in, k_out)?;
    let mut params = Vec::with_capacity(bank_param_count(&bank));
    let std = Normal::new(0.0, 1.0).expect("unit normal");
    for _ in 0..k_in * k_out {
        for l in 0..b {
            let s = variance(l).sqrt();
            let count = match domain {
                Domain::S2 => 2 * l + 1,
                Domain::SO3 => (2 * l + 1) * (2 * l + 1),
            };
            // First coordinate of each degree is the real diagonal entry;
            // complex entries split their variance over two coordinates.
            params.push(s * std.sample(rng));
            for _ in 1..count {
                params.push(s / 2f64.sqrt() * std.sample(rng));
            }
        }
    }
    unpack_bank(&params, &mut bank);
    Ok(bank)
}

impl Model {
    /// Builds a model with freshly initialized parameters from `config.seed`.
    pub fn new(config: ModelConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut layers = Vec::with_capacity(config.layers.len());
        let mut after_relu = false;
        for spec in &config.layers {
            let layer = match *spec {
                LayerSpec::S2Conv { b_out, k_in, k_out, .. } => {
                    let v = 1.0 / (4.0 * PI * k_in as f64);
                    Layer::S2Conv(init_bank(Domain::S2, b_out, k_in, k_out, |_| v, &mut rng)?)
                }
                LayerSpec::So3Conv { b_out, k_in, k_out, .. } => {
                    let gain = if after_relu { RELU_GAIN } else { 1.0 };
                    let v = |l: usize| gain / (k_in * (2 * l + 1)) as f64;
                    Layer::So3Conv(init_bank(Domain::SO3, b_out, k_in, k_out, v, &mut rng)?)
                }
                LayerSpec::Relu => Layer::Relu,
                LayerSpec::Linear { dim_in, dim_out } => {
                    let normal = Normal::new(0.0, (1.0 / dim_in as f64).sqrt()).expect("finite");
                    Layer::Linear {
                        dim_in,
                        dim_out,
                        weights: (0..dim_in * dim_out).map(|_| normal.sample(&mut rng)).collect(),
                        bias: vec![0.0; dim_out],
                    }
                }
                LayerSpec::Softmax => Layer::Softmax,
            };
            after_relu = matches!(spec, LayerSpec::Relu);
            layers.push(layer);
        }
        Model::from_layers(config, layers)
    }

    /// Assembles a model from explicit layers, which must match `config`.
    pub fn from_layers(config: ModelConfig, layers: Vec<Layer>) -> Result<Self> {
        config.validate()?;
        if layers.len() != config.layers.len() {
            return Err(Error::Config(format!(
                "{} layers for a config with {}",
                layers.len(),
                config.layers.len()
            )));
        }
        let mut so3 = BTreeMap::new();
        for (i, (spec, layer)) in config.layers.iter().zip(&layers).enumerate() {
            let ok = match (spec, layer) {
                (LayerSpec::S2Conv { b_out, k_in, k_out, .. }, Layer::S2Conv(f)) => {
                    f.domain() == Domain::S2
                        && (f.bandwidth(), f.in_channels(), f.out_channels()) == (*b_out, *k_in, *k_out)
                }
                (LayerSpec::So3Conv { b_out, k_in, k_out, .. }, Layer::So3Conv(f)) => {
                    f.domain() == Domain::SO3
                        && (f.bandwidth(), f.in_channels(), f.out_channels()) == (*b_out, *k_in, *k_out)
                }
                (LayerSpec::Relu, Layer::Relu) | (LayerSpec::Softmax, Layer::Softmax) => true,
                (
                    LayerSpec::Linear { dim_in, dim_out },
                    Layer::Linear {
                        dim_in: a,
                        dim_out: c,
                        weights,
                        bias,
                    },
                ) => (dim_in, dim_out) == (a, c) && weights.len() == a * c && bias.len() == *c,
                _ => false,
            };
            if !ok {
                return Err(Error::Config(format!(
                    "layer {i} does not match its {} spec",
                    spec.name()
                )));
            }
            if let LayerSpec::S2Conv { b_out, .. } | LayerSpec::So3Conv { b_out, .. } = spec {
                if !so3.contains_key(b_out) {
                    so3.insert(*b_out, So3Transform::new(*b_out)?);
                }
            }
        }
        let plans = Plans {
            s2: S2Transform::new(config.input_bandwidth()?)?,
            so3,
        };
        Ok(Model {
            config,
            layers,
            plans: Arc::new(plans),
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    /// Number of independent real parameters.
    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| match l {
                Layer::S2Conv(f) | Layer::So3Conv(f) => bank_param_count(f),
                Layer::Linear { weights, bias, .. } => weights.len() + bias.len(),
                Layer::Relu | Layer::Softmax => 0,
            })
            .sum()
    }

    /// Flat parameter vector in layer order; filters contribute their
    /// independent real coordinates.
    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for layer in &self.layers {
            match layer {
                Layer::S2Conv(f) | Layer::So3Conv(f) => pack_bank(f, &mut out, false),
                Layer::Linear { weights, bias, .. } => {
                    out.extend_from_slice(weights);
                    out.extend_from_slice(bias);
                }
                Layer::Relu | Layer::Softmax => {}
            }
        }
        out
    }

    pub fn set_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.param_count() {
            return Err(Error::Shape(format!(
                "expected {} parameters, found {}",
                self.param_count(),
                params.len()
            )));
        }
        let mut used = 0;
        for layer in &mut self.layers {
            match layer {
                Layer::S2Conv(f) | Layer::So3Conv(f) => used += unpack_bank(&params[used..], f),
                Layer::Linear { weights, bias, .. } => {
                    let (nw, nb) = (weights.len(), bias.len());
                    weights.copy_from_slice(&params[used..used + nw]);
                    bias.copy_from_slice(&params[used + nw..used + nw + nb]);
                    used += nw + nb;
                }
                Layer::Relu | Layer::Softmax => {}
            }
        }
        Ok(())
    }

    /// Flattens per-layer gradients into the layout of [`Self::params`].
    pub fn flatten_grads(&self, grads: &[LayerGrad]) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for g in grads {
            match g {
                LayerGrad::Filter(f) => pack_bank(f, &mut out, true),
                LayerGrad::Linear { weights, bias } => {
                    out.extend_from_slice(weights);
                    out.extend_from_slice(bias);
                }
                LayerGrad::None => {}
            }
        }
        out
    }

    fn check_input(&self, f: &S2Signal) -> Result<()> {
        let b = self.config.input_bandwidth()?;
        if f.bandwidth() != b {
            return Err(Error::BandwidthMismatch {
                expected: b,
                found: f.bandwidth(),
            });
        }
        let k = self.config.input_channels()?;
        if f.channels() != k {
            return Err(Error::ChannelMismatch {
                expected: k,
                found: f.channels(),
            });
        }
        Ok(())
    }

    fn to_spec(&self, v: Value, tape: &mut Vec<Step>) -> Result<SO3Spectrum> {
        match v {
            Value::Spec(s) => Ok(s),
            Value::Sig(s) => {
                let b = s.bandwidth();
                tape.push(Step::Fft { b });
                self.plans.so3(b).forward(&s)
            }
            _ => Err(Error::Shape("expected an SO(3) feature map".into())),
        }
    }

    fn to_sig(&self, v: Value, tape: &mut Vec<Step>) -> Result<SO3Signal> {
        match v {
            Value::Sig(s) => Ok(s),
            Value::Spec(s) => {
                let b = s.bandwidth();
                tape.push(Step::Ifft { b });
                self.plans.so3(b).inverse(&s)
            }
            _ => Err(Error::Shape("expected an SO(3) feature map".into())),
        }
    }

    fn head(&self, v: Value, tape: &mut Vec<Step>) -> Result<Vec<f64>> {
        match (self.config.head, v) {
            (_, Value::Vector(x)) => Ok(x),
            (Head::Spatial, v) => {
                let s = self.to_sig(v, tape)?;
                tape.push(Step::HeadSpatial {
                    b: s.bandwidth(),
                    k: s.channels(),
                });
                Ok(s.into_values())
            }
            (Head::Invariant, Value::Spec(s)) => {
                let (b, k) = (s.bandwidth(), s.channels());
                tape.push(Step::HeadMeanSpec { b, k });
                Ok((0..k).map(|c| s.channel(c)[0].re).collect())
            }
            (Head::Invariant, Value::Sig(s)) => {
                let (b, k) = (s.bandwidth(), s.channels());
                tape.push(Step::HeadMeanSig { b, k });
                let grid = self.plans.so3(b).grid();
                Ok((0..k).map(|c| grid.integrate(s.channel(c))).collect())
            }
            (_, Value::S2Spec(_)) => Err(Error::Shape("head needs an SO(3) feature map".into())),
        }
    }

    /// Logits and the tape needed for the backward pass.
    fn forward_tape(&self, f: &S2Signal) -> Result<(Vec<f64>, Vec<Step>)> {
        self.check_input(f)?;
        let mut tape = Vec::new();
        let mut v = Value::S2Spec(self.plans.s2.forward(f)?);
        for (i, layer) in self.layers.iter().enumerate() {
            v = match layer {
                Layer::S2Conv(bank) => match v {
                    Value::S2Spec(s) => {
                        let out = s2_conv_spectral(&s, bank)?;
                        tape.push(Step::S2Conv { layer: i, input: s });
                        Value::Spec(out)
                    }
                    _ => return Err(Error::Shape("s2_conv needs an S² input".into())),
                },
                Layer::So3Conv(bank) => {
                    let s = self.to_spec(v, &mut tape)?;
                    let out = so3_conv_spectral(&s, bank)?;
                    tape.push(Step::So3Conv { layer: i, input: s });
                    Value::Spec(out)
                }
                Layer::Relu => {
                    let s = self.to_sig(v, &mut tape)?;
                    let values = s.values().iter().map(|x| x.max(0.0)).collect();
                    let out = SO3Signal::from_vec(s.bandwidth(), s.channels(), values)?;
                    tape.push(Step::Relu { input: s });
                    Value::Sig(out)
                }
                Layer::Linear {
                    dim_in,
                    dim_out,
                    weights,
                    bias,
                } => {
                    let x = self.head(v, &mut tape)?;
                    if x.len() != *dim_in {
                        return Err(Error::Shape(format!("linear expects {dim_in} inputs, got {}", x.len())));
                    }
                    let y: Vec<f64> = (0..*dim_out)
                        .map(|o| {
                            bias[o]
                                + weights[o * dim_in..(o + 1) * dim_in]
                                    .iter()
                                    .zip(&x)
                                    .map(|(w, a)| w * a)
                                    .sum::<f64>()
                        })
                        .collect();
                    tape.push(Step::Linear { layer: i, input: x });
                    Value::Vector(y)
                }
                Layer::Softmax => break,
            };
        }
        match v {
            Value::Vector(z) => Ok((z, tape)),
            _ => Err(Error::Shape("network did not produce logits".into())),
        }
    }

    /// Pre-softmax scores.
    pub fn logits(&self, f: &S2Signal) -> Result<Vec<f64>> {
        Ok(self.forward_tape(f)?.0)
    }

    /// Class probabilities.
    pub fn forward(&self, f: &S2Signal) -> Result<Vec<f64>> {
        Ok(softmax(&self.logits(f)?))
    }

    /// Cross-entropy loss of `label` and gradients of every parameter.
    pub fn backward(&self, f: &S2Signal, label: usize) -> Result<Backward> {
        let (z, tape) = self.forward_tape(f)?;
        if label >= z.len() {
            return Err(Error::Shape(format!(
                "label {label} out of range for {} classes",
                z.len()
            )));
        }
        let probabilities = softmax(&z);
        let loss = log_sum_exp(&z) - z[label];
        let mut grads: Vec<LayerGrad> = self.layers.iter().map(|_| LayerGrad::None).collect();
        let mut g = Value::Vector(
            probabilities
                .iter()
                .enumerate()
                .map(|(i, p)| p - (i == label) as u8 as f64)
                .collect(),
        );
        for step in tape.into_iter().rev() {
            g = self.backward_step(step, g, &mut grads)?;
        }
        Ok(Backward {
            loss,
            probabilities,
            grads,
        })
    }

    fn backward_step(&self, step: Step, g: Value, grads: &mut [LayerGrad]) -> Result<Value> {
        Ok(match (step, g) {
            (Step::Linear { layer, input }, Value::Vector(gy)) => {
                let Layer::Linear { dim_in, weights, .. } = &self.layers[layer] else {
                    unreachable!("tape matches layers")
                };
                let mut gw = vec![0.0; weights.len()];
                let mut gx = vec![0.0; *dim_in];
                for (o, &go) in gy.iter().enumerate() {
                    let row = &weights[o * dim_in..(o + 1) * dim_in];
                    for i in 0..*dim_in {
                        gw[o * dim_in + i] = go * input[i];
                        gx[i] += go * row[i];
                    }
                }
                grads[layer] = LayerGrad::Linear { weights: gw, bias: gy };
                Value::Vector(gx)
            }
            (Step::HeadSpatial { b, k }, Value::Vector(gx)) => Value::Sig(SO3Signal::from_vec(b, k, gx)?),
            (Step::HeadMeanSpec { b, k }, Value::Vector(gx)) => {
                let mut s = SO3Spectrum::zeros(b, k)?;
                for (c, v) in gx.iter().enumerate() {
                    s.channel_mut(c)[0] = Complex64::new(*v, 0.0);
                }
                Value::Spec(s)
            }
            (Step::HeadMeanSig { b, k }, Value::Vector(gx)) => {
                let grid = self.plans.so3(b).grid();
                let n = 2 * b;
                let mut values = Vec::with_capacity(k * n * n * n);
                for v in &gx {
                    for _ in 0..n {
                        for w in &grid.weights {
                            values.extend(std::iter::repeat_n(v * w, n));
                        }
                    }
                }
                Value::Sig(SO3Signal::from_vec(b, k, values)?)
            }
            (Step::Relu { input }, Value::Sig(gy)) => {
                let values = gy
                    .values()
                    .iter()
                    .zip(input.values())
                    .map(|(g, x)| if *x > 0.0 { *g } else { 0.0 })
                    .collect();
                Value::Sig(SO3Signal::from_vec(gy.bandwidth(), gy.channels(), values)?)
            }
            (Step::Ifft { b }, Value::Sig(gy)) => Value::Spec(self.plans.so3(b).inverse_adjoint(&gy)?),
            (Step::Fft { b }, Value::Spec(gy)) => Value::Sig(self.plans.so3(b).forward_adjoint(&gy)?),
            (Step::So3Conv { layer, input }, Value::Spec(gy)) => {
                let Layer::So3Conv(bank) = &self.layers[layer] else {
                    unreachable!("tape matches layers")
                };
                let (gx, gp) = so3_conv_grads(&input, bank, &gy)?;
                grads[layer] = LayerGrad::Filter(gp);
                Value::Spec(gx)
            }
            (Step::S2Conv { layer, input }, Value::Spec(gy)) => {
                let Layer::S2Conv(bank) = &self.layers[layer] else {
                    unreachable!("tape matches layers")
                };
                grads[layer] = LayerGrad::Filter(s2_conv_filter_grad(&input, bank, &gy)?);
                Value::Vector(Vec::new())
            }
            _ => unreachable!("gradient kinds follow the forward tape"),
        })
    }

    /// Summed flat gradient, summed loss and correct-prediction count over
    /// `batch`. Examples run in parallel; sums are taken in batch order.
    pub fn batch_gradient(&self, batch: &[(&S2Signal, usize)]) -> Result<(Vec<f64>, f64, usize)> {
        let results: Vec<Backward> = batch
            .par_iter()
            .map(|(f, label)| self.backward(f, *label))
            .collect::<Result<_>>()?;
        let mut total = vec![0.0; self.param_count()];
        let mut loss = 0.0;
        let mut correct = 0;
        for (r, (_, label)) in results.iter().zip(batch) {
            for (t, g) in total.iter_mut().zip(self.flatten_grads(&r.grads)) {
                *t += g;
            }
            loss += r.loss;
            correct += (argmax(&r.probabilities) == *label) as usize;
        }
        Ok((total, loss, correct))
    }

    /// Flat parameter index ranges, one per parameterized layer.
    pub fn param_ranges(&self) -> Vec<std::ops::Range<usize>> {
        let mut start = 0;
        let mut out = Vec::new();
        for layer in &self.layers {
            let n = match layer {
                Layer::S2Conv(f) | Layer::So3Conv(f) => bank_param_count(f),
                Layer::Linear { weights, bias, .. } => weights.len() + bias.len(),
                Layer::Relu | Layer::Softmax => continue,
            };
            out.push(start..start + n);
            start += n;
        }
        out
    }

    /// Cross-entropy of one example.
    pub fn loss(&self, f: &S2Signal, label: usize) -> Result<f64> {
        let z = self.logits(f)?;
        if label >= z.len() {
            return Err(Error::Shape(format!(
                "label {label} out of range for {} classes",
                z.len()
            )));
        }
        Ok(log_sum_exp(&z) - z[label])
    }

    /// Compares the analytic gradient with central differences of step `h`
    /// at the given flat parameter indices.
    pub fn gradient_check(&self, f: &S2Signal, label: usize, indices: &[usize], h: f64) -> Result<Vec<GradientCheck>> {
        let analytic = self.flatten_grads(&self.backward(f, label)?.grads);
        let p0 = self.params();
        let mut probe = self.clone();
        indices
            .iter()
            .map(|&i| {
                if i >= p0.len() {
                    return Err(Error::Shape(format!("parameter {i} out of range")));
                }
                let mut loss_at = |v: f64| {
                    let mut p = p0.clone();
                    p[i] = v;
                    probe.set_params(&p)?;
                    probe.loss(f, label)
                };
                let numeric = (loss_at(p0[i] + h)? - loss_at(p0[i] - h)?) / (2.0 * h);
                let a = analytic[i];
                Ok(GradientCheck {
                    index: i,
                    analytic: a,
                    numeric,
                    relative_error: (a - numeric).abs() / a.abs().max(numeric.abs()).max(GRADIENT_FLOOR),
                })
            })
            .collect()
    }
}

/// Smallest denominator of the relative gradient error. Central differences
/// with step 1e-5 carry roundoff near `ε|L|/h ≈ 5e-11` at `L ≈ ln 10`, which
/// no gradient component much below 1e-5 can be resolved against relatively.
pub const GRADIENT_FLOOR: f64 = 1e-5;

/// One analytic-versus-numeric gradient comparison.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GradientCheck {
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
    /// `|a − n| / max(|a|, |n|, GRADIENT_FLOOR)`.
    pub relative_error: f64,
}

impl GradientCheck {
    /// True when both values sit below the floor, so the comparison is
    /// effectively absolute.
    pub fn below_floor(&self) -> bool {
        self.analytic.abs().max(self.numeric.abs()) < GRADIENT_FLOOR
    }
}

pub fn log_sum_exp(z: &[f64]) -> f64 {
    let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    m + z.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

pub fn softmax(z: &[f64]) -> Vec<f64> {
    let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// Index of the largest entry; the first wins ties.
pub fn argmax(p: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in p.iter().enumerate() {
        if *v > p[best] {
            best = i;
        }
    }
    best
}
