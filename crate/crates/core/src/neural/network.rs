//! Fully connected network with layer normalization after every hidden layer.
//!
//! Parameters for all layers live in one flat vector so that optimizers and
//! finite-difference checks can treat a network as a single point in
//! parameter space. Each hidden layer computes
//!
//! ```text
//! z = W x + b
//! y = gain * (z - mean(z)) / sqrt(var(z) + eps) + offset
//! a = relu(y)
//! ```
//!
//! and the output layer is a plain affine map. The output is used either as
//! action values or as policy logits; softmax is applied by the caller.

use rand::Rng;

use crate::error::{Error, Result};

pub const LAYER_NORM_EPS: f64 = 1e-5;
pub const DEFAULT_HIDDEN: [usize; 2] = [32, 32];

/// Layer sizes of a network.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Architecture {
    pub input: usize,
    pub hidden: Vec<usize>,
    pub output: usize,
}

impl Architecture {
    pub fn new(input: usize, hidden: Vec<usize>, output: usize) -> Result<Self> {
        if input == 0 || output == 0 || hidden.iter().any(|&h| h == 0) {
            return Err(Error::InvalidArgument(format!(
                "layer sizes must be positive (input {input}, hidden {hidden:?}, output {output})"
            )));
        }
        Ok(Self {
            input,
            hidden,
            output,
        })
    }

    /// Two hidden layers of 32 units.
    pub fn standard(input: usize, output: usize) -> Result<Self> {
        Self::new(input, DEFAULT_HIDDEN.to_vec(), output)
    }

    pub fn num_layers(&self) -> usize {
        self.hidden.len() + 1
    }

    fn slots(&self) -> Vec<LayerSlots> {
        let mut slots = Vec::with_capacity(self.num_layers());
        let mut offset = 0;
        let mut inputs = self.input;
        for (l, &outputs) in self.hidden.iter().chain(std::iter::once(&self.output)).enumerate() {
            let weight = offset;
            let bias = weight + inputs * outputs;
            offset = bias + outputs;
            let norm = if l < self.hidden.len() {
                let gain = offset;
                offset += 2 * outputs;
                Some(gain)
            } else {
                None
            };
            slots.push(LayerSlots {
                inputs,
                outputs,
                weight,
                bias,
                norm,
            });
            inputs = outputs;
        }
        slots
    }

    pub fn num_params(&self) -> usize {
        self.slots()
            .last()
            .map(|s| s.bias + s.outputs)
            .unwrap_or(0)
    }
}

/// Offsets of one layer's tensors inside the flat parameter vector.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) struct LayerSlots {
    pub inputs: usize,
    pub outputs: usize,
    pub weight: usize,
    pub bias: usize,
    /// Offset of the layer-norm gain; the offset vector follows it.
    pub norm: Option<usize>,
}

impl LayerSlots {
    fn weight_range(&self) -> std::ops::Range<usize> {
        self.weight..self.weight + self.inputs * self.outputs
    }
    fn bias_range(&self) -> std::ops::Range<usize> {
        self.bias..self.bias + self.outputs
    }
    fn gain_range(&self) -> Option<std::ops::Range<usize>> {
        self.norm.map(|g| g..g + self.outputs)
    }
    fn offset_range(&self) -> Option<std::ops::Range<usize>> {
        self.norm.map(|g| g + self.outputs..g + 2 * self.outputs)
    }
}

/// Flat storage shared by [`ParameterSet`] and [`GradientSet`].
#[derive(Clone, Debug, PartialEq)]
pub(crate) struct Layout {
    pub arch: Architecture,
    pub slots: Vec<LayerSlots>,
}

impl Layout {
    fn new(arch: Architecture) -> Self {
        let slots = arch.slots();
        Self { arch, slots }
    }
}

/// Borrowed view of one layer's tensors.
#[derive(Debug)]
pub struct LayerParams<'a> {
    /// Row-major `outputs x inputs`.
    pub weight: &'a [f64],
    pub bias: &'a [f64],
    pub gain: Option<&'a [f64]>,
    pub offset: Option<&'a [f64]>,
}

/// Mutable view of one layer's tensors.
#[derive(Debug)]
pub struct LayerParamsMut<'a> {
    pub weight: &'a mut [f64],
    pub bias: &'a mut [f64],
    pub gain: Option<&'a mut [f64]>,
    pub offset: Option<&'a mut [f64]>,
}

macro_rules! flat_tensor_set {
    ($name:ident) => {
        impl $name {
            pub fn architecture(&self) -> &Architecture {
                &self.layout.arch
            }

            pub fn len(&self) -> usize {
                self.values.len()
            }

            pub fn is_empty(&self) -> bool {
                self.values.is_empty()
            }

            pub fn values(&self) -> &[f64] {
                &self.values
            }

            pub fn values_mut(&mut self) -> &mut [f64] {
                &mut self.values
            }

            pub fn is_finite(&self) -> bool {
                self.values.iter().all(|v| v.is_finite())
            }

            pub fn layer(&self, l: usize) -> LayerParams<'_> {
                let s = self.layout.slots[l];
                LayerParams {
                    weight: &self.values[s.weight_range()],
                    bias: &self.values[s.bias_range()],
                    gain: s.gain_range().map(|r| &self.values[r]),
                    offset: s.offset_range().map(|r| &self.values[r]),
                }
            }

            pub fn layer_mut(&mut self, l: usize) -> LayerParamsMut<'_> {
                let s = self.layout.slots[l];
                let (head, rest) = self.values[s.weight..].split_at_mut(s.inputs * s.outputs);
                let (bias, rest) = rest.split_at_mut(s.outputs);
                let (gain, offset) = match s.norm {
                    Some(_) => {
                        let (g, rest) = rest.split_at_mut(s.outputs);
                        (Some(g), Some(&mut rest[..s.outputs]))
                    }
                    None => (None, None),
                };
                LayerParamsMut {
                    weight: head,
                    bias,
                    gain,
                    offset,
                }
            }

            /// Named tensors in storage order: `(name, shape, values)`.
            pub fn tensors(&self) -> Vec<(String, Vec<usize>, &[f64])> {
                let mut out = Vec::new();
                for (l, s) in self.layout.slots.iter().enumerate() {
                    out.push((
                        format!("layer{l}.weight"),
                        vec![s.outputs, s.inputs],
                        &self.values[s.weight_range()],
                    ));
                    out.push((
                        format!("layer{l}.bias"),
                        vec![s.outputs],
                        &self.values[s.bias_range()],
                    ));
                    if let (Some(g), Some(o)) = (s.gain_range(), s.offset_range()) {
                        out.push((format!("layer{l}.ln_gain"), vec![s.outputs], &self.values[g]));
                        out.push((format!("layer{l}.ln_offset"), vec![s.outputs], &self.values[o]));
                    }
                }
                out
            }
        }
    };
}

/// Weights, biases and layer-norm gains/offsets of one network.
#[derive(Clone, Debug, PartialEq)]
pub struct ParameterSet {
    pub(crate) layout: Layout,
    pub(crate) values: Vec<f64>,
}

/// Gradient of a scalar loss with respect to every entry of a [`ParameterSet`].
#[derive(Clone, Debug, PartialEq)]
pub struct GradientSet {
    pub(crate) layout: Layout,
    pub(crate) values: Vec<f64>,
}

flat_tensor_set!(ParameterSet);
flat_tensor_set!(GradientSet);

impl ParameterSet {
    /// Zero weights and biases, unit gains, zero offsets.
    pub fn zeroed(arch: Architecture) -> Self {
        let layout = Layout::new(arch);
        let mut values = vec![0.0; layout.arch.num_params()];
        for s in &layout.slots {
            if let Some(g) = s.gain_range() {
                values[g].iter_mut().for_each(|v| *v = 1.0);
            }
        }
        Self { layout, values }
    }

    /// Weights and biases uniform in `[-1/sqrt(fan_in), 1/sqrt(fan_in)]`.
    pub fn init<R: Rng + ?Sized>(arch: Architecture, rng: &mut R) -> Self {
        let mut params = Self::zeroed(arch);
        for s in params.layout.slots.clone() {
            let bound = 1.0 / (s.inputs as f64).sqrt();
            for v in &mut params.values[s.weight..s.bias + s.outputs] {
                *v = rng.gen_range(-bound..=bound);
            }
        }
        params
    }

    /// Build from a flat value vector laid out as [`ParameterSet::tensors`].
    pub fn from_values(arch: Architecture, values: Vec<f64>) -> Result<Self> {
        let layout = Layout::new(arch);
        let expected = layout.arch.num_params();
        if values.len() != expected {
            return Err(Error::DimensionMismatch {
                context: "parameter vector",
                expected,
                actual: values.len(),
            });
        }
        Ok(Self { layout, values })
    }

    /// Overwrite with `other`'s values without reallocating.
    pub fn copy_from(&mut self, other: &ParameterSet) -> Result<()> {
        self.check_congruent(&other.layout)?;
        self.values.copy_from_slice(&other.values);
        Ok(())
    }

    pub(crate) fn check_congruent(&self, layout: &Layout) -> Result<()> {
        if self.layout != *layout {
            return Err(Error::DimensionMismatch {
                context: "parameter/gradient shape",
                expected: self.values.len(),
                actual: layout.arch.num_params(),
            });
        }
        Ok(())
    }
}

impl GradientSet {
    pub fn zeros_like(params: &ParameterSet) -> Self {
        Self {
            layout: params.layout.clone(),
            values: vec![0.0; params.values.len()],
        }
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    pub fn scale(&mut self, factor: f64) {
        self.values.iter_mut().for_each(|v| *v *= factor);
    }

    pub fn add_assign(&mut self, other: &GradientSet) -> Result<()> {
        if self.layout != other.layout {
            return Err(Error::DimensionMismatch {
                context: "gradient sum",
                expected: self.values.len(),
                actual: other.values.len(),
            });
        }
        self.values
            .iter_mut()
            .zip(&other.values)
            .for_each(|(a, b)| *a += b);
        Ok(())
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Intermediate values of one hidden layer.
#[derive(Clone, Debug, PartialEq)]
pub struct HiddenTrace {
    pub pre_activation: Vec<f64>,
    pub normalized: Vec<f64>,
    pub inv_std: f64,
    pub post_norm: Vec<f64>,
    pub activation: Vec<f64>,
}

/// Everything [`backward`] needs from a forward pass.
#[derive(Clone, Debug, PartialEq)]
pub struct ForwardTrace {
    pub input: Vec<f64>,
    pub hidden: Vec<HiddenTrace>,
    pub output: Vec<f64>,
}

fn affine(weight: &[f64], bias: &[f64], x: &[f64]) -> Vec<f64> {
    let n = x.len();
    bias.iter()
        .zip(weight.chunks_exact(n))
        .map(|(b, row)| b + row.iter().zip(x).map(|(w, xi)| w * xi).sum::<f64>())
        .collect()
}

/// Normalized values and `1/sqrt(var + eps)` of `x`.
fn standardize(x: &[f64], eps: f64) -> (Vec<f64>, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let inv_std = 1.0 / (var + eps).sqrt();
    (x.iter().map(|v| (v - mean) * inv_std).collect(), inv_std)
}

/// `gain * (x - mean(x)) / sqrt(var(x) + eps) + offset` with population variance.
pub fn layer_norm(x: &[f64], gain: &[f64], offset: &[f64], eps: f64) -> Result<Vec<f64>> {
    if gain.len() != x.len() || offset.len() != x.len() {
        return Err(Error::DimensionMismatch {
            context: "layer_norm",
            expected: x.len(),
            actual: if gain.len() != x.len() { gain.len() } else { offset.len() },
        });
    }
    if !(eps > 0.0) {
        return Err(Error::InvalidArgument(format!("layer_norm eps must be > 0, got {eps}")));
    }
    if x.is_empty() {
        return Ok(Vec::new());
    }
    let (xhat, _) = standardize(x, eps);
    Ok(xhat
        .iter()
        .zip(gain)
        .zip(offset)
        .map(|((h, g), o)| g * h + o)
        .collect())
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// `log softmax(logits)[index]` via log-sum-exp.
pub fn log_softmax_at(logits: &[f64], index: usize) -> f64 {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|l| (l - max).exp()).sum::<f64>().ln();
    logits[index] - lse
}

/// Run the network on one input vector.
pub fn forward(params: &ParameterSet, input: &[f64]) -> Result<(Vec<f64>, ForwardTrace)> {
    let arch = params.architecture();
    if input.len() != arch.input {
        return Err(Error::DimensionMismatch {
            context: "network input",
            expected: arch.input,
            actual: input.len(),
        });
    }
    let last = params.layout.slots.len() - 1;
    let mut hidden = Vec::with_capacity(last);
    let mut x = input.to_vec();
    for l in 0..last {
        let p = params.layer(l);
        let z = affine(p.weight, p.bias, &x);
        let (normalized, inv_std) = standardize(&z, LAYER_NORM_EPS);
        let gain = p.gain.expect("hidden layers carry layer norm");
        let offset = p.offset.expect("hidden layers carry layer norm");
        let post_norm: Vec<f64> = normalized
            .iter()
            .zip(gain)
            .zip(offset)
            .map(|((h, g), o)| g * h + o)
            .collect();
        let activation: Vec<f64> = post_norm.iter().map(|v| v.max(0.0)).collect();
        x = activation.clone();
        hidden.push(HiddenTrace {
            pre_activation: z,
            normalized,
            inv_std,
            post_norm,
            activation,
        });
    }
    let p = params.layer(last);
    let output = affine(p.weight, p.bias, &x);
    let trace = ForwardTrace {
        input: input.to_vec(),
        hidden,
        output: output.clone(),
    };
    Ok((output, trace))
}

/// Output only; skips keeping the trace around.
pub fn predict(params: &ParameterSet, input: &[f64]) -> Result<Vec<f64>> {
    forward(params, input).map(|(out, _)| out)
}

/// Gradient of `output . output_grad` with respect to every parameter.
pub fn backward(params: &ParameterSet, trace: &ForwardTrace, output_grad: &[f64]) -> Result<GradientSet> {
    let mut grad = GradientSet::zeros_like(params);
    backward_into(params, trace, output_grad, &mut grad)?;
    Ok(grad)
}

/// Like [`backward`] but accumulates into an existing gradient.
pub fn backward_into(
    params: &ParameterSet,
    trace: &ForwardTrace,
    output_grad: &[f64],
    grad: &mut GradientSet,
) -> Result<()> {
    let slots = &params.layout.slots;
    let last = slots.len() - 1;
    if trace.hidden.len() != last || trace.input.len() != params.architecture().input {
        return Err(Error::DimensionMismatch {
            context: "forward trace layers",
            expected: last,
            actual: trace.hidden.len(),
        });
    }
    if output_grad.len() != slots[last].outputs || trace.output.len() != slots[last].outputs {
        return Err(Error::DimensionMismatch {
            context: "output gradient",
            expected: slots[last].outputs,
            actual: output_grad.len(),
        });
    }
    params.check_congruent(&grad.layout)?;
    if output_grad.iter().all(|&g| g == 0.0) {
        return Ok(());
    }

    let mut delta = output_grad.to_vec();
    for l in (0..=last).rev() {
        let s = slots[l];
        if l < last {
            // delta holds dL/d(activation); push it through relu and layer norm.
            let h = &trace.hidden[l];
            let dpost: Vec<f64> = delta
                .iter()
                .zip(&h.post_norm)
                .map(|(d, y)| if *y > 0.0 { *d } else { 0.0 })
                .collect();
            let gain = params.layer(l).gain.expect("hidden layers carry layer norm");
            let g0 = s.norm.expect("hidden layers carry layer norm");
            let n = s.outputs;
            let mut dxhat = vec![0.0; n];
            for j in 0..n {
                grad.values[g0 + j] += dpost[j] * h.normalized[j];
                grad.values[g0 + n + j] += dpost[j];
                dxhat[j] = dpost[j] * gain[j];
            }
            let mean_d = dxhat.iter().sum::<f64>() / n as f64;
            let mean_dx = dxhat
                .iter()
                .zip(&h.normalized)
                .map(|(d, x)| d * x)
                .sum::<f64>()
                / n as f64;
            delta = dxhat
                .iter()
                .zip(&h.normalized)
                .map(|(d, x)| h.inv_std * (d - mean_d - x * mean_dx))
                .collect();
        }
        let input: &[f64] = if l == 0 {
            &trace.input
        } else {
            &trace.hidden[l - 1].activation
        };
        for (o, d) in delta.iter().enumerate() {
            if *d == 0.0 {
                continue;
            }
            grad.values[s.bias + o] += d;
            let row = &mut grad.values[s.weight + o * s.inputs..s.weight + (o + 1) * s.inputs];
            row.iter_mut().zip(input).for_each(|(g, x)| *g += d * x);
        }
        if l > 0 {
            let weight = params.layer(l).weight;
            let mut next = vec![0.0; s.inputs];
            for (o, d) in delta.iter().enumerate() {
                if *d == 0.0 {
                    continue;
                }
                let row = &weight[o * s.inputs..(o + 1) * s.inputs];
                next.iter_mut().zip(row).for_each(|(n, w)| *n += d * w);
            }
            delta = next;
        }
    }
    Ok(())
}
