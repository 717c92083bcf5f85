//! Small fully connected networks with explicit forward/backward passes,
//! a momentum optimizer and a finite-difference gradient checker.
//!
//! Parameters of a [`SmallNet`] live in one flat vector: for each layer the
//! row-major `out × in` weight matrix followed by the bias. Gradients use the
//! same layout.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Linear,
    Relu,
    Tanh,
}

impl Activation {
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Linear => x,
            Activation::Relu => x.max(0.0),
            Activation::Tanh => x.tanh(),
        }
    }

    /// Derivative given the pre-activation and the activation output.
    fn derivative(self, pre: f64, out: f64) -> f64 {
        match self {
            Activation::Linear => 1.0,
            Activation::Relu => {
                if pre > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - out * out,
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Activation::Linear => "linear",
            Activation::Relu => "relu",
            Activation::Tanh => "tanh",
        })
    }
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(Activation::Linear),
            "relu" => Ok(Activation::Relu),
            "tanh" => Ok(Activation::Tanh),
            other => Err(Error::Domain(format!("unknown activation `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerSpec {
    pub input: usize,
    pub output: usize,
    pub activation: Activation,
}

impl LayerSpec {
    pub fn new(input: usize, output: usize, activation: Activation) -> Self {
        LayerSpec {
            input,
            output,
            activation,
        }
    }

    fn param_count(&self) -> usize {
        self.output * (self.input + 1)
    }
}

/// A feed-forward network of dense layers.
#[derive(Debug, Clone)]
pub struct SmallNet {
    layers: Vec<LayerSpec>,
    offsets: Vec<usize>,
    params: Vec<f64>,
    // bumped on every mutable parameter access; forward caches record it
    generation: u64,
}

impl PartialEq for SmallNet {
    fn eq(&self, other: &Self) -> bool {
        self.layers == other.layers && self.params == other.params
    }
}

/// Activations recorded by [`SmallNet::forward`].
#[derive(Debug, Clone)]
pub struct ForwardCache {
    inputs: Vec<Vec<f64>>,
    pre: Vec<Vec<f64>>,
    output: Vec<f64>,
    generation: u64,
}

impl ForwardCache {
    pub fn output(&self) -> &[f64] {
        &self.output
    }

    /// Pre-activation values of every layer.
    pub fn pre_activations(&self) -> &[Vec<f64>] {
        &self.pre
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetGrads {
    /// Same layout as [`SmallNet::params`].
    pub params: Vec<f64>,
    pub input: Vec<f64>,
}

impl SmallNet {
    pub fn from_parts(layers: Vec<LayerSpec>, params: Vec<f64>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Domain("network needs at least one layer".into()));
        }
        for pair in layers.windows(2) {
            if pair[0].output != pair[1].input {
                return Err(Error::shape("chained layer input", pair[0].output, pair[1].input));
            }
        }
        if layers.iter().any(|l| l.input == 0 || l.output == 0) {
            return Err(Error::Domain("layer dimensions must be positive".into()));
        }
        let mut offsets = Vec::with_capacity(layers.len());
        let mut total = 0;
        for l in &layers {
            offsets.push(total);
            total += l.param_count();
        }
        if params.len() != total {
            return Err(Error::shape("network parameters", total, params.len()));
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::Domain("network has non-finite parameters".into()));
        }
        Ok(SmallNet {
            layers,
            offsets,
            params,
            generation: 0,
        })
    }

    /// Gaussian fan-in initialization (variance 2/in for relu layers, 1/in
    /// otherwise) with zero biases.
    pub fn init<R: Rng + ?Sized>(layers: Vec<LayerSpec>, rng: &mut R) -> Result<Self> {
        let mut params = Vec::new();
        for l in &layers {
            let gain = if l.activation == Activation::Relu { 2.0 } else { 1.0 };
            let std = (gain / l.input as f64).sqrt();
            params.extend((0..l.input * l.output).map(|_| std * rng.sample::<f64, _>(StandardNormal)));
            params.extend(std::iter::repeat_n(0.0, l.output));
        }
        Self::from_parts(layers, params)
    }

    /// Motion encoder: `6t → hidden → C`, tanh hidden layer. The output
    /// bias is drawn from N(0, 0.1²) so a motionless clip still maps to a
    /// nonzero feature.
    pub fn motion_encoder<R: Rng + ?Sized>(t: usize, hidden: usize, dim: usize, rng: &mut R) -> Result<Self> {
        let mut net = Self::init(
            vec![
                LayerSpec::new(6 * t, hidden, Activation::Tanh),
                LayerSpec::new(hidden, dim, Activation::Linear),
            ],
            rng,
        )?;
        let n = net.params.len();
        for b in &mut net.params[n - dim..] {
            *b = 0.1 * rng.sample::<f64, _>(StandardNormal);
        }
        Ok(net)
    }

    /// Audio weight predictor: `256t → hidden → S`, relu hidden layer, last
    /// layer zeroed so the initial prediction is uniform.
    pub fn audio_encoder<R: Rng + ?Sized>(t: usize, hidden: usize, size: usize, rng: &mut R) -> Result<Self> {
        let mut net = Self::init(
            vec![
                LayerSpec::new(crate::AUDIO_FRAME_DIM * t, hidden, Activation::Relu),
                LayerSpec::new(hidden, size, Activation::Linear),
            ],
            rng,
        )?;
        net.zero_layer(1);
        Ok(net)
    }

    /// Expression extractor: `(256 + identity_dim) → hidden → D_exp`.
    pub fn expression_extractor<R: Rng + ?Sized>(
        identity_dim: usize,
        hidden: usize,
        exp_dim: usize,
        rng: &mut R,
    ) -> Result<Self> {
        Self::init(
            vec![
                LayerSpec::new(crate::AUDIO_FRAME_DIM + identity_dim, hidden, Activation::Tanh),
                LayerSpec::new(hidden, exp_dim, Activation::Linear),
            ],
            rng,
        )
    }

    /// Pose decoder: `C → hidden → 6t`, tanh hidden layer.
    pub fn pose_decoder<R: Rng + ?Sized>(dim: usize, hidden: usize, t: usize, rng: &mut R) -> Result<Self> {
        Self::init(
            vec![
                LayerSpec::new(dim, hidden, Activation::Tanh),
                LayerSpec::new(hidden, 6 * t, Activation::Linear),
            ],
            rng,
        )
    }

    pub fn layers(&self) -> &[LayerSpec] {
        &self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].input
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].output
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        self.generation += 1;
        &mut self.params
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    /// Zeroes the weights and bias of layer `index`.
    pub fn zero_layer(&mut self, index: usize) {
        let start = self.offsets[index];
        let end = start + self.layers[index].param_count();
        self.params_mut()[start..end].iter_mut().for_each(|p| *p = 0.0);
    }

    /// Human-readable name of the parameter tensor holding flat index `i`.
    pub fn param_name(&self, i: usize) -> String {
        let layer = self.offsets.iter().rposition(|o| *o <= i).unwrap_or(0);
        let spec = self.layers[layer];
        if i - self.offsets[layer] < spec.input * spec.output {
            format!("layer{layer}.weight")
        } else {
            format!("layer{layer}.bias")
        }
    }

    fn layer_slices(&self, index: usize) -> (&[f64], &[f64]) {
        let spec = self.layers[index];
        let start = self.offsets[index];
        let w_end = start + spec.input * spec.output;
        (&self.params[start..w_end], &self.params[w_end..w_end + spec.output])
    }

    /// Output only.
    pub fn predict(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.forward(x)?.output)
    }

    pub fn forward(&self, x: &[f64]) -> Result<ForwardCache> {
        if x.len() != self.input_dim() {
            return Err(Error::shape("network input", self.input_dim(), x.len()));
        }
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut current = x.to_vec();
        for (li, spec) in self.layers.iter().enumerate() {
            let (w, b) = self.layer_slices(li);
            let z: Vec<f64> = (0..spec.output)
                .map(|o| {
                    let row = &w[o * spec.input..(o + 1) * spec.input];
                    b[o] + row.iter().zip(&current).map(|(a, c)| a * c).sum::<f64>()
                })
                .collect();
            let out = z.iter().map(|v| spec.activation.apply(*v)).collect();
            inputs.push(std::mem::replace(&mut current, out));
            pre.push(z);
        }
        Ok(ForwardCache {
            inputs,
            pre,
            output: current,
            generation: self.generation,
        })
    }

    /// Reverse-mode pass; `upstream` is dL/d(output).
    pub fn backward(&self, cache: &ForwardCache, upstream: &[f64]) -> Result<NetGrads> {
        let mut params = vec![0.0; self.params.len()];
        let input = self.backward_accumulate(cache, upstream, &mut params)?;
        Ok(NetGrads { params, input })
    }

    /// Like [`SmallNet::backward`] but adds the parameter gradient into
    /// `acc`; returns dL/d(input).
    pub fn backward_accumulate(&self, cache: &ForwardCache, upstream: &[f64], acc: &mut [f64]) -> Result<Vec<f64>> {
        if cache.generation != self.generation || cache.inputs.len() != self.layers.len() {
            return Err(Error::Contract(
                "forward cache is stale or belongs to another network".into(),
            ));
        }
        if upstream.len() != self.output_dim() {
            return Err(Error::shape("upstream gradient", self.output_dim(), upstream.len()));
        }
        if acc.len() != self.params.len() {
            return Err(Error::shape("gradient accumulator", self.params.len(), acc.len()));
        }
        let mut g = upstream.to_vec();
        for li in (0..self.layers.len()).rev() {
            let spec = self.layers[li];
            let input = &cache.inputs[li];
            let z = &cache.pre[li];
            let out: &[f64] = if li + 1 < self.layers.len() {
                &cache.inputs[li + 1]
            } else {
                &cache.output
            };
            let g_pre: Vec<f64> = (0..spec.output)
                .map(|o| g[o] * spec.activation.derivative(z[o], out[o]))
                .collect();
            let (w, _) = self.layer_slices(li);
            let start = self.offsets[li];
            let w_len = spec.input * spec.output;
            let (gw, gb) = acc[start..start + w_len + spec.output].split_at_mut(w_len);
            let mut g_in = vec![0.0; spec.input];
            for o in 0..spec.output {
                let go = g_pre[o];
                gb[o] += go;
                if go == 0.0 {
                    continue;
                }
                let row = &w[o * spec.input..(o + 1) * spec.input];
                let grow = &mut gw[o * spec.input..(o + 1) * spec.input];
                for i in 0..spec.input {
                    grow[i] += go * input[i];
                    g_in[i] += row[i] * go;
                }
            }
            g = g_in;
        }
        Ok(g)
    }
}

/// Heavy-ball momentum: `v ← μ·v + g`, `p ← p − lr·v`.
#[derive(Debug, Clone, PartialEq)]
pub struct Momentum {
    pub velocity: Vec<f64>,
}

impl Momentum {
    pub fn new(len: usize) -> Self {
        Momentum {
            velocity: vec![0.0; len],
        }
    }

    pub fn step(&mut self, params: &mut [f64], grads: &[f64], lr: f64, momentum: f64) {
        debug_assert_eq!(params.len(), grads.len());
        debug_assert_eq!(params.len(), self.velocity.len());
        for ((p, v), g) in params.iter_mut().zip(&mut self.velocity).zip(grads) {
            *v = momentum * *v + g;
            *p -= lr * *v;
        }
    }
}

/// Result of [`grad_check`].
#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    /// (parameter tensor name, max relative error), in parameter order.
    pub per_parameter: Vec<(String, f64)>,
    pub max_error: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl GradCheckReport {
    pub fn failing(&self) -> Vec<&str> {
        self.per_parameter
            .iter()
            .filter(|(_, e)| *e > self.tolerance)
            .map(|(n, _)| n.as_str())
            .collect()
    }
}

/// Finite-difference step used by the gradient checks.
pub const FD_STEP: f64 = 1e-5;

/// Floor on the relative-error denominator, per unit of loss magnitude.
pub const FD_FLOOR: f64 = 1e-6;

/// Relative error with a small absolute floor on the denominator.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    relative_error_floored(analytic, numeric, FD_FLOOR)
}

fn relative_error_floored(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

/// Relative error between `analytic` and a central difference of `eval`
/// around `x0`. When the error exceeds `tolerance` the difference is
/// retried with a step ten times larger, then ten times smaller. The wider
/// step defeats cancellation on tiny derivatives; the narrower one steps
/// off a kink (relu, L1) that the default interval straddles. A wrong
/// analytic value fails at every step. The denominator floor scales with
/// the loss magnitude.
pub fn fd_coordinate_error<F>(analytic: f64, x0: f64, tolerance: f64, mut eval: F) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    let mut best = f64::INFINITY;
    for h in [FD_STEP, FD_STEP * 10.0, FD_STEP / 10.0] {
        let (plus, minus) = (eval(x0 + h)?, eval(x0 - h)?);
        let numeric = (plus - minus) / (2.0 * h);
        // derivatives this far below the loss scale are lost to rounding
        let floor = FD_FLOOR * (0.5 * (plus + minus)).abs().max(1.0);
        best = best.min(relative_error_floored(analytic, numeric, floor));
        if best <= tolerance {
            break;
        }
    }
    Ok(best)
}

/// Compares the analytic parameter gradient returned by `loss` against
/// central differences on every parameter of `net`.
pub fn grad_check<F>(net: &SmallNet, loss: F, tolerance: f64) -> Result<GradCheckReport>
where
    F: Fn(&SmallNet) -> Result<(f64, Vec<f64>)>,
{
    let (_, analytic) = loss(net)?;
    if analytic.len() != net.param_count() {
        return Err(Error::shape("analytic gradient", net.param_count(), analytic.len()));
    }
    let mut probe = net.clone();
    let mut per_parameter: Vec<(String, f64)> = Vec::new();
    for (i, &a) in analytic.iter().enumerate() {
        let orig = net.params()[i];
        let err = fd_coordinate_error(a, orig, tolerance, |v| {
            probe.params_mut()[i] = v;
            Ok(loss(&probe)?.0)
        })?;
        probe.params_mut()[i] = orig;
        let name = net.param_name(i);
        match per_parameter.last_mut() {
            Some((n, e)) if *n == name => *e = e.max(err),
            _ => per_parameter.push((name, err)),
        }
    }
    let max_error = per_parameter.iter().map(|(_, e)| *e).fold(0.0, f64::max);
    Ok(GradCheckReport {
        per_parameter,
        max_error,
        tolerance,
        passed: max_error <= tolerance,
    })
}
