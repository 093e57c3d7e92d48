use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    /// `z * sigmoid(z)`.
    Silu,
    Tanh,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Silu => z / (1.0 + (-z).exp()),
            Activation::Tanh => z.tanh(),
        }
    }

    fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Silu => {
                let s = 1.0 / (1.0 + (-z).exp());
                s * (1.0 + z * (1.0 - s))
            }
            Activation::Tanh => {
                let t = z.tanh();
                1.0 - t * t
            }
        }
    }

    pub(crate) fn code(self) -> u32 {
        match self {
            Activation::Silu => 0,
            Activation::Tanh => 1,
        }
    }

    pub(crate) fn from_code(c: u32) -> Option<Self> {
        match c {
            0 => Some(Activation::Silu),
            1 => Some(Activation::Tanh),
            _ => None,
        }
    }
}

/// Fully connected network; layer `l` maps `layer_dims[l] -> layer_dims[l+1]`
/// with `weights[l]` stored `out x in`. The activation follows every layer
/// except the last.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    pub layer_dims: Vec<usize>,
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
    pub activation: Activation,
}

/// Intermediate values kept for the backward pass.
pub(crate) struct Tape {
    inputs: Vec<Array2<f64>>,
    pre: Vec<Array2<f64>>,
}

impl MlpParams {
    /// Weights uniform in `+-sqrt(3 / fan_in)` (unit variance gain), zero biases.
    pub fn init(layer_dims: &[usize], activation: Activation, seed: u64) -> Result<Self> {
        if layer_dims.len() < 2 || layer_dims.contains(&0) {
            return Err(Error::config("layer_dims", "need >= 2 positive widths"));
        }
        let mut r = rng::stream(seed, 0);
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for w in layer_dims.windows(2) {
            let lim = (3.0 / w[0] as f64).sqrt();
            weights.push(Array2::from_shape_fn((w[1], w[0]), |_| r.gen_range(-lim..lim)));
            biases.push(Array1::zeros(w[1]));
        }
        Ok(Self {
            layer_dims: layer_dims.to_vec(),
            weights,
            biases,
            activation,
        })
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            layer_dims: self.layer_dims.clone(),
            weights: self.weights.iter().map(|w| Array2::zeros(w.raw_dim())).collect(),
            biases: self.biases.iter().map(|b| Array1::zeros(b.raw_dim())).collect(),
            activation: self.activation,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.layer_dims[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_dims.last().unwrap()
    }

    pub fn n_params(&self) -> usize {
        self.weights.iter().map(|w| w.len()).sum::<usize>() + self.biases.iter().map(|b| b.len()).sum::<usize>()
    }

    /// Checks the invariants: shapes chain and every entry is finite.
    pub fn validate(&self) -> Result<()> {
        let n = self.layer_dims.len();
        if n < 2 || self.weights.len() != n - 1 || self.biases.len() != n - 1 {
            return Err(Error::config("layer_dims", "layer count does not match parameters"));
        }
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            if w.dim() != (self.layer_dims[l + 1], self.layer_dims[l]) || b.len() != self.layer_dims[l + 1] {
                return Err(Error::config("layer_dims", format!("layer {l} shape mismatch")));
            }
        }
        if self.iter().any(|v| !v.is_finite()) {
            return Err(Error::config("weights", "non-finite parameter"));
        }
        Ok(())
    }

    /// All parameters, layer by layer, weights (row-major) before biases.
    pub fn iter(&self) -> impl Iterator<Item = &f64> {
        self.weights.iter().zip(&self.biases).flat_map(|(w, b)| w.iter().chain(b.iter()))
    }

    /// Parameter `k` in [`iter`](Self::iter) order.
    pub fn get_mut(&mut self, mut k: usize) -> Option<&mut f64> {
        for (w, b) in self.weights.iter_mut().zip(self.biases.iter_mut()) {
            if k < w.len() {
                return w.as_slice_mut().map(|s| &mut s[k]);
            }
            k -= w.len();
            if k < b.len() {
                return Some(&mut b[k]);
            }
            k -= b.len();
        }
        None
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.weights
            .iter_mut()
            .zip(self.biases.iter_mut())
            .flat_map(|(w, b)| w.iter_mut().chain(b.iter_mut()))
    }

    pub fn forward(&self, input: ArrayView2<f64>) -> Array2<f64> {
        let last = self.weights.len() - 1;
        let mut a = input.to_owned();
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let mut z = a.dot(&w.t());
            z += b;
            if l < last {
                let act = self.activation;
                z.mapv_inplace(|v| act.apply(v));
            }
            a = z;
        }
        a
    }

    pub(crate) fn forward_tape(&self, input: ArrayView2<f64>) -> (Array2<f64>, Tape) {
        let last = self.weights.len() - 1;
        let mut tape = Tape {
            inputs: Vec::with_capacity(self.weights.len()),
            pre: Vec::with_capacity(last),
        };
        let mut a = input.to_owned();
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let mut z = a.dot(&w.t());
            z += b;
            tape.inputs.push(a);
            if l < last {
                let act = self.activation;
                a = z.mapv(|v| act.apply(v));
                tape.pre.push(z);
            } else {
                a = z;
            }
        }
        (a, tape)
    }

    /// Reverse-mode pass: gradients of a scalar loss given `d_out`, its
    /// derivative with respect to the network output.
    pub(crate) fn backward(&self, tape: &Tape, d_out: Array2<f64>) -> MlpParams {
        let mut grads = self.zeros_like();
        let mut delta = d_out;
        for l in (0..self.weights.len()).rev() {
            grads.weights[l] = delta.t().dot(&tape.inputs[l]);
            grads.biases[l] = delta.sum_axis(Axis(0));
            if l > 0 {
                let mut back = delta.dot(&self.weights[l]);
                let act = self.activation;
                Zip::from(&mut back).and(&tape.pre[l - 1]).for_each(|g, z| *g *= act.derivative(*z));
                delta = back;
            }
        }
        grads
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn zero_network_outputs_zero() {
        let mut p = MlpParams::init(&[3, 8, 2], Activation::Silu, 0).unwrap();
        p.iter_mut().for_each(|v| *v = 0.0);
        let out = p.forward(array![[1.0, -2.0, 0.5], [3.0, 0.0, 0.0]].view());
        assert!(out.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn single_linear_layer_is_affine() {
        let p = MlpParams {
            layer_dims: vec![1, 1],
            weights: vec![array![[2.5]]],
            biases: vec![array![-1.0]],
            activation: Activation::Tanh,
        };
        let out = p.forward(array![[0.0], [1.0], [-2.0]].view());
        assert_eq!(out, array![[-1.0], [1.5], [-6.0]]);
    }

    #[test]
    fn validate_catches_shape_and_nan() {
        let mut p = MlpParams::init(&[2, 4, 2], Activation::Tanh, 1).unwrap();
        assert!(p.validate().is_ok());
        p.biases[0][1] = f64::NAN;
        assert!(p.validate().is_err());
        let mut q = MlpParams::init(&[2, 4, 2], Activation::Tanh, 1).unwrap();
        q.layer_dims[1] = 5;
        assert!(q.validate().is_err());
    }

    #[test]
    fn activation_derivatives() {
        for act in [Activation::Silu, Activation::Tanh] {
            for z in [-3.0, -0.2, 0.0, 0.7, 4.0] {
                let h = 1e-6;
                let fd = (act.apply(z + h) - act.apply(z - h)) / (2.0 * h);
                assert!((fd - act.derivative(z)).abs() < 1e-9);
            }
        }
    }
}
