//! Fully connected action-value network with tanh hidden layers, trained by
//! hand-written backpropagation and Adam.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Feed-forward network stored as one flat parameter vector. Layer `l` owns
/// a row-major `sizes[l + 1] x sizes[l]` weight block followed by its bias.
#[derive(Debug, Clone, PartialEq)]
pub struct QNetwork {
    sizes: Vec<usize>,
    params: Vec<f64>,
}

/// Post-activation outputs of every layer, input included.
#[derive(Debug, Clone)]
pub struct Activations(Vec<Vec<f64>>);

impl Activations {
    pub fn output(&self) -> &[f64] {
        self.0.last().expect("at least one layer")
    }
}

fn param_count(sizes: &[usize]) -> usize {
    sizes.windows(2).map(|w| w[1] * w[0] + w[1]).sum()
}

impl QNetwork {
    /// Uniform fan-in initialisation, `U(-1/sqrt(fan_in), 1/sqrt(fan_in))`.
    pub fn new<R: Rng>(sizes: &[usize], rng: &mut R) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::config("hidden", format!("invalid layer sizes {sizes:?}")));
        }
        let mut params = Vec::with_capacity(param_count(sizes));
        for w in sizes.windows(2) {
            let bound = 1.0 / (w[0] as f64).sqrt();
            for _ in 0..w[1] * w[0] + w[1] {
                params.push(rng.gen_range(-bound..bound));
            }
        }
        Ok(Self {
            sizes: sizes.to_vec(),
            params,
        })
    }

    pub fn from_params(sizes: &[usize], params: Vec<f64>) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::config("hidden", format!("invalid layer sizes {sizes:?}")));
        }
        if params.len() != param_count(sizes) {
            return Err(Error::Contract(format!(
                "expected {} parameters for {sizes:?}, got {}",
                param_count(sizes),
                params.len()
            )));
        }
        Ok(Self {
            sizes: sizes.to_vec(),
            params,
        })
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn is_finite(&self) -> bool {
        self.params.iter().all(|p| p.is_finite())
    }

    /// `(weight offset, bias offset)` of each layer.
    fn offsets(&self) -> impl Iterator<Item = (usize, usize, usize, usize)> + '_ {
        let mut off = 0;
        self.sizes.windows(2).map(move |w| {
            let (n_in, n_out) = (w[0], w[1]);
            let w_off = off;
            off += n_in * n_out + n_out;
            (w_off, w_off + n_in * n_out, n_in, n_out)
        })
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        let last = self.sizes.len() - 2;
        let mut cur = x.to_vec();
        for (l, (w_off, b_off, n_in, n_out)) in self.offsets().enumerate() {
            cur = self.layer(&cur, w_off, b_off, n_in, n_out, l < last);
        }
        cur
    }

    pub fn forward_cached(&self, x: &[f64]) -> Activations {
        let last = self.sizes.len() - 2;
        let mut acts = vec![x.to_vec()];
        for (l, (w_off, b_off, n_in, n_out)) in self.offsets().enumerate() {
            let next = self.layer(acts.last().unwrap(), w_off, b_off, n_in, n_out, l < last);
            acts.push(next);
        }
        Activations(acts)
    }

    fn layer(&self, x: &[f64], w_off: usize, b_off: usize, n_in: usize, n_out: usize, hidden: bool) -> Vec<f64> {
        debug_assert_eq!(x.len(), n_in);
        let w = &self.params[w_off..w_off + n_in * n_out];
        let b = &self.params[b_off..b_off + n_out];
        (0..n_out)
            .map(|o| {
                let row = &w[o * n_in..(o + 1) * n_in];
                let z = b[o] + row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
                if hidden {
                    z.tanh()
                } else {
                    z
                }
            })
            .collect()
    }

    /// Accumulates `d loss / d params` into `grad` given the gradient with
    /// respect to the network output.
    pub fn backward(&self, acts: &Activations, d_out: &[f64], grad: &mut [f64]) {
        debug_assert_eq!(grad.len(), self.params.len());
        let layers: Vec<_> = self.offsets().collect();
        let mut delta = d_out.to_vec();
        for (l, &(w_off, b_off, n_in, n_out)) in layers.iter().enumerate().rev() {
            let input = &acts.0[l];
            for o in 0..n_out {
                grad[b_off + o] += delta[o];
                let g_row = &mut grad[w_off + o * n_in..w_off + (o + 1) * n_in];
                for (g, x) in g_row.iter_mut().zip(input) {
                    *g += delta[o] * x;
                }
            }
            if l == 0 {
                break;
            }
            let w = &self.params[w_off..w_off + n_in * n_out];
            delta = (0..n_in)
                .map(|i| {
                    let back: f64 = (0..n_out).map(|o| w[o * n_in + i] * delta[o]).sum();
                    // tanh' = 1 - tanh^2
                    back * (1.0 - input[i] * input[i])
                })
                .collect();
        }
    }

    /// Named parameter blocks (`layer{l}.weight`, `layer{l}.bias`) with
    /// their shapes.
    pub fn named_blocks(&self) -> Vec<(String, Vec<usize>, &[f64])> {
        self.offsets()
            .enumerate()
            .flat_map(|(l, (w_off, b_off, n_in, n_out))| {
                [
                    (format!("layer{l}.weight"), vec![n_out, n_in], &self.params[w_off..b_off]),
                    (format!("layer{l}.bias"), vec![n_out], &self.params[b_off..b_off + n_out]),
                ]
            })
            .collect()
    }
}

/// Index of the largest value, lowest index on ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// Adam optimiser state over a flat parameter vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl Adam {
    pub fn new(n: usize, lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for i in 0..params.len() {
            let g = grad[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            params[i] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
        }
    }
}
