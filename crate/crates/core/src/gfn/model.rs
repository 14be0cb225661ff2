use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Fully connected network producing log edge flows, plus a learnable
/// log-partition scalar.
///
/// Hidden layers use `tanh`; the output layer is linear, one output per
/// edge head. Parameters are stored flat, layer by layer, each layer as a
/// row-major `out x in` weight matrix followed by its `out` biases.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowModel {
    layers: Vec<usize>,
    params: Vec<f64>,
    pub log_z: f64,
    pub steps: u64,
}

/// Activations recorded by [`FlowModel::forward`] for backpropagation.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// `acts[0]` is the input, `acts[l]` the output of layer `l - 1`
    /// (after `tanh` for hidden layers, raw for the last).
    acts: Vec<Vec<f64>>,
}

impl ForwardCache {
    pub fn outputs(&self) -> &[f64] {
        self.acts.last().expect("at least one layer")
    }
}

fn num_params_for(layers: &[usize]) -> usize {
    layers.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
}

impl FlowModel {
    /// All-zero parameters: uniform edge flows everywhere.
    pub fn zeros(layers: &[usize]) -> Result<Self> {
        if layers.len() < 2 || layers.iter().any(|&n| n == 0) {
            return Err(Error::Config(format!(
                "model needs at least input and output layer sizes, all positive: {layers:?}"
            )));
        }
        Ok(Self {
            layers: layers.to_vec(),
            params: vec![0.0; num_params_for(layers)],
            log_z: 0.0,
            steps: 0,
        })
    }

    /// Glorot-uniform weights, zero biases; the output layer is scaled by
    /// `output_scale` so initial policies start close to uniform.
    pub fn random<R: Rng + ?Sized>(layers: &[usize], output_scale: f64, rng: &mut R) -> Result<Self> {
        let mut model = Self::zeros(layers)?;
        let mut offset = 0;
        let last = layers.len() - 2;
        for (l, w) in layers.windows(2).enumerate() {
            let (fan_in, fan_out) = (w[0], w[1]);
            let bound = (6.0 / (fan_in + fan_out) as f64).sqrt() * if l == last { output_scale } else { 1.0 };
            for p in &mut model.params[offset..offset + fan_in * fan_out] {
                *p = rng.random_range(-bound..=bound);
            }
            offset += fan_in * fan_out + fan_out;
        }
        Ok(model)
    }

    pub fn layers(&self) -> &[usize] {
        &self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0]
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1]
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    /// Length of a gradient vector: every parameter plus `log_z`.
    pub fn gradient_len(&self) -> usize {
        self.params.len() + 1
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    /// Offset of layer `l`'s weight matrix in the flat parameter vector.
    pub fn layer_offset(&self, l: usize) -> usize {
        self.layers[..=l].windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }

    /// Sets the weight connecting input `j` to output `i` of layer `l`.
    pub fn set_weight(&mut self, l: usize, i: usize, j: usize, value: f64) {
        let off = self.layer_offset(l);
        let fan_in = self.layers[l];
        self.params[off + i * fan_in + j] = value;
    }

    pub fn forward(&self, input: &[f64]) -> Result<ForwardCache> {
        if input.len() != self.input_dim() {
            return Err(Error::ShapeMismatch {
                expected: self.input_dim(),
                actual: input.len(),
            });
        }
        let mut acts = Vec::with_capacity(self.layers.len());
        acts.push(input.to_vec());
        let mut offset = 0;
        let n_layers = self.layers.len() - 1;
        for l in 0..n_layers {
            let (fan_in, fan_out) = (self.layers[l], self.layers[l + 1]);
            let a = &acts[l];
            // One-hot inputs are common, so only visit non-zero activations.
            let nz: Vec<usize> = (0..fan_in).filter(|&j| a[j] != 0.0).collect();
            let w = &self.params[offset..offset + fan_in * fan_out];
            let b = &self.params[offset + fan_in * fan_out..offset + fan_in * fan_out + fan_out];
            let mut z: Vec<f64> = b.to_vec();
            for (i, zi) in z.iter_mut().enumerate() {
                let row = &w[i * fan_in..(i + 1) * fan_in];
                *zi += nz.iter().map(|&j| row[j] * a[j]).sum::<f64>();
            }
            if l + 1 < n_layers {
                for zi in &mut z {
                    *zi = zi.tanh();
                }
            }
            acts.push(z);
            offset += fan_in * fan_out + fan_out;
        }
        Ok(ForwardCache { acts })
    }

    /// Raw outputs (log edge flows for every head).
    pub fn outputs(&self, input: &[f64]) -> Result<Vec<f64>> {
        Ok(self.forward(input)?.acts.pop().expect("output layer"))
    }

    /// Accumulates `d(loss)/d(params)` into `grad[..num_params]`, given
    /// `d_out = d(loss)/d(outputs)` for the pass recorded in `cache`.
    pub fn backward(&self, cache: &ForwardCache, d_out: &[f64], grad: &mut [f64]) {
        debug_assert_eq!(d_out.len(), self.output_dim());
        let n_layers = self.layers.len() - 1;
        let mut delta = d_out.to_vec();
        for l in (0..n_layers).rev() {
            let (fan_in, fan_out) = (self.layers[l], self.layers[l + 1]);
            let offset = self.layer_offset(l);
            let a = &cache.acts[l];
            let nz: Vec<usize> = (0..fan_in).filter(|&j| a[j] != 0.0).collect();
            for i in 0..fan_out {
                let d = delta[i];
                if d == 0.0 {
                    continue;
                }
                let row = &mut grad[offset + i * fan_in..offset + (i + 1) * fan_in];
                for &j in &nz {
                    row[j] += d * a[j];
                }
                grad[offset + fan_in * fan_out + i] += d;
            }
            if l > 0 {
                let w = &self.params[offset..offset + fan_in * fan_out];
                let mut prev = vec![0.0; fan_in];
                for (i, &d) in delta.iter().enumerate() {
                    if d == 0.0 {
                        continue;
                    }
                    let row = &w[i * fan_in..(i + 1) * fan_in];
                    for (p, &wij) in prev.iter_mut().zip(row) {
                        *p += d * wij;
                    }
                }
                // tanh'(z) = 1 - tanh(z)^2
                for (p, &act) in prev.iter_mut().zip(a) {
                    *p *= 1.0 - act * act;
                }
                delta = prev;
            }
        }
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        Checkpoint {
            format: CHECKPOINT_FORMAT.to_string(),
            version: CHECKPOINT_VERSION,
            layers: self.layers.clone(),
            params: self.params.clone(),
            log_z: self.log_z,
            steps: self.steps,
        }
    }

    /// Rebuilds a model from a checkpoint, optionally requiring an architecture.
    pub fn from_checkpoint(ckpt: Checkpoint, expected_layers: Option<&[usize]>) -> Result<Self> {
        if ckpt.format != CHECKPOINT_FORMAT {
            return Err(Error::Checkpoint(format!("unknown checkpoint format {:?}", ckpt.format)));
        }
        if ckpt.version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!("unsupported checkpoint version {}", ckpt.version)));
        }
        if let Some(expected) = expected_layers {
            if expected != ckpt.layers.as_slice() {
                return Err(Error::Checkpoint(format!(
                    "architecture mismatch: checkpoint has {:?}, expected {expected:?}",
                    ckpt.layers
                )));
            }
        }
        let mut model = Self::zeros(&ckpt.layers).map_err(|e| Error::Checkpoint(e.to_string()))?;
        if ckpt.params.len() != model.params.len() {
            return Err(Error::Checkpoint(format!(
                "checkpoint has {} parameters, architecture needs {}",
                ckpt.params.len(),
                model.params.len()
            )));
        }
        if ckpt.params.iter().any(|p| !p.is_finite()) || !ckpt.log_z.is_finite() {
            return Err(Error::Checkpoint("non-finite parameter in checkpoint".into()));
        }
        model.params = ckpt.params;
        model.log_z = ckpt.log_z;
        model.steps = ckpt.steps;
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string(&self.to_checkpoint())?;
        text.push('\n');
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn load(path: &Path, expected_layers: Option<&[usize]>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let ckpt: Checkpoint =
            serde_json::from_str(&text).map_err(|e| Error::Checkpoint(format!("{}: {e}", path.display())))?;
        Self::from_checkpoint(ckpt, expected_layers)
    }
}

pub const CHECKPOINT_FORMAT: &str = "feedflow-flow-model";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Serialized form of a [`FlowModel`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub layers: Vec<usize>,
    pub params: Vec<f64>,
    pub log_z: f64,
    pub steps: u64,
}
