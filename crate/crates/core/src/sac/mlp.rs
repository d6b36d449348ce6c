//! Dense multilayer perceptron with hand-rolled reverse-mode gradients.
//!
//! Hidden layers are ReLU, the output layer is linear, and everything is
//! 64-bit. Weights are stored `(out, in)` row-major; batches are `(B, in)`.

use ndarray::{Array1, Array2, Axis};
use rand::Rng;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MlpError {
    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: String, got: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub w: Array2<f64>,
    pub b: Array1<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    layers: Vec<Layer>,
}

/// Per-layer parameter gradients, same shapes as the network.
#[derive(Debug, Clone)]
pub struct MlpGrads {
    pub layers: Vec<Layer>,
}

/// Cached activations from a forward pass: `acts[0]` is the input batch,
/// `acts[k]` the post-activation output of layer k.
pub struct ForwardCache {
    acts: Vec<Array2<f64>>,
}

impl ForwardCache {
    pub fn output(&self) -> &Array2<f64> {
        self.acts.last().expect("cache holds at least the input")
    }
}

impl Mlp {
    /// `sizes` = [input, hidden..., output]. Weights are initialized uniform
    /// in +-1/sqrt(fan_in), biases zero.
    pub fn new<R: Rng>(sizes: &[usize], rng: &mut R) -> Self {
        assert!(sizes.len() >= 2, "need at least input and output sizes");
        let mut layers = Vec::with_capacity(sizes.len() - 1);
        for win in sizes.windows(2) {
            let (fan_in, fan_out) = (win[0], win[1]);
            let bound = 1.0 / (fan_in as f64).sqrt();
            let w = Array2::from_shape_fn((fan_out, fan_in), |_| rng.random_range(-bound..=bound));
            let b = Array1::zeros(fan_out);
            layers.push(Layer { w, b });
        }
        Self { layers }
    }

    pub fn from_layers(layers: Vec<Layer>) -> Self {
        Self { layers }
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    /// Mutable parameter access, used by optimizers and perturbation-based
    /// gradient checks.
    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].w.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().unwrap().w.nrows()
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.w.len() + l.b.len()).sum()
    }

    pub fn zeros_like(&self) -> MlpGrads {
        MlpGrads {
            layers: self
                .layers
                .iter()
                .map(|l| Layer {
                    w: Array2::zeros(l.w.raw_dim()),
                    b: Array1::zeros(l.b.raw_dim()),
                })
                .collect(),
        }
    }

    fn check_input(&self, x: &Array2<f64>) -> Result<(), MlpError> {
        if x.ncols() != self.input_dim() {
            return Err(MlpError::ShapeMismatch {
                expected: format!("(*, {})", self.input_dim()),
                got: format!("{:?}", x.dim()),
            });
        }
        Ok(())
    }

    /// Batched forward pass.
    pub fn forward(&self, x: &Array2<f64>) -> Result<Array2<f64>, MlpError> {
        Ok(self.forward_cached(x)?.acts.pop_last())
    }

    /// Forward pass retaining every activation for a later backward pass.
    pub fn forward_cached(&self, x: &Array2<f64>) -> Result<ForwardCache, MlpError> {
        self.check_input(x)?;
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(x.clone());
        let last = self.layers.len() - 1;
        for (k, layer) in self.layers.iter().enumerate() {
            let mut z = acts[k].dot(&layer.w.t());
            z += &layer.b;
            if k != last {
                z.mapv_inplace(|v| v.max(0.0));
            }
            acts.push(z);
        }
        Ok(ForwardCache { acts })
    }

    /// Reverse-mode accumulation: given dL/d(output), produce parameter
    /// gradients and dL/d(input).
    pub fn backward(&self, cache: &ForwardCache, d_out: &Array2<f64>) -> (MlpGrads, Array2<f64>) {
        let mut grads = self.zeros_like();
        let mut delta = d_out.clone();
        for k in (0..self.layers.len()).rev() {
            let a_prev = &cache.acts[k];
            grads.layers[k].w = delta.t().dot(a_prev);
            grads.layers[k].b = delta.sum_axis(Axis(0));
            let mut d_prev = delta.dot(&self.layers[k].w);
            if k > 0 {
                // ReLU subgradient from the cached post-activation.
                d_prev.zip_mut_with(&cache.acts[k], |d, a| {
                    if *a <= 0.0 {
                        *d = 0.0;
                    }
                });
            }
            delta = d_prev;
        }
        (grads, delta)
    }

    /// Backward pass that only propagates to the input, skipping parameter
    /// gradients (used when differentiating through a frozen network).
    pub fn backward_input_only(&self, cache: &ForwardCache, d_out: &Array2<f64>) -> Array2<f64> {
        let mut delta = d_out.clone();
        for k in (0..self.layers.len()).rev() {
            let mut d_prev = delta.dot(&self.layers[k].w);
            if k > 0 {
                d_prev.zip_mut_with(&cache.acts[k], |d, a| {
                    if *a <= 0.0 {
                        *d = 0.0;
                    }
                });
            }
            delta = d_prev;
        }
        delta
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.w.iter().all(|v| v.is_finite()) && l.b.iter().all(|v| v.is_finite()))
    }
}

trait PopLast {
    fn pop_last(self) -> Array2<f64>;
}

impl PopLast for Vec<Array2<f64>> {
    fn pop_last(mut self) -> Array2<f64> {
        self.pop().expect("non-empty")
    }
}

/// Polyak averaging `target <- (1 - tau) target + tau online`, elementwise.
pub fn polyak(target: &mut Mlp, online: &Mlp, tau: f64) -> Result<(), MlpError> {
    if target.layers.len() != online.layers.len() {
        return Err(MlpError::ShapeMismatch {
            expected: format!("{} layers", target.layers.len()),
            got: format!("{} layers", online.layers.len()),
        });
    }
    for (t, o) in target.layers.iter_mut().zip(online.layers.iter()) {
        if t.w.dim() != o.w.dim() {
            return Err(MlpError::ShapeMismatch {
                expected: format!("{:?}", t.w.dim()),
                got: format!("{:?}", o.w.dim()),
            });
        }
        t.w.zip_mut_with(&o.w, |tv, ov| *tv = (1.0 - tau) * *tv + tau * *ov);
        t.b.zip_mut_with(&o.b, |tv, ov| *tv = (1.0 - tau) * *tv + tau * *ov);
    }
    Ok(())
}

/// Adam optimizer state mirroring one network's layers.
#[derive(Debug, Clone)]
pub struct Adam {
    m: Vec<Layer>,
    v: Vec<Layer>,
    t: u64,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Adam {
    pub fn new(net: &Mlp, lr: f64) -> Self {
        let zeros = || {
            net.layers
                .iter()
                .map(|l| Layer {
                    w: Array2::zeros(l.w.raw_dim()),
                    b: Array1::zeros(l.b.raw_dim()),
                })
                .collect::<Vec<_>>()
        };
        Self { m: zeros(), v: zeros(), t: 0, lr, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }

    pub fn step(&mut self, net: &mut Mlp, grads: &MlpGrads) {
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        let scale = self.lr * bc2.sqrt() / bc1;
        let (b1, b2, eps) = (self.beta1, self.beta2, self.eps);
        for ((layer, g), (m, v)) in net
            .layers
            .iter_mut()
            .zip(grads.layers.iter())
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            ndarray::Zip::from(&mut layer.w).and(&g.w).and(&mut m.w).and(&mut v.w).for_each(
                |p, &g, m, v| {
                    *m = b1 * *m + (1.0 - b1) * g;
                    *v = b2 * *v + (1.0 - b2) * g * g;
                    *p -= scale * *m / (v.sqrt() + eps);
                },
            );
            ndarray::Zip::from(&mut layer.b).and(&g.b).and(&mut m.b).and(&mut v.b).for_each(
                |p, &g, m, v| {
                    *m = b1 * *m + (1.0 - b1) * g;
                    *v = b2 * *v + (1.0 - b2) * g * g;
                    *p -= scale * *m / (v.sqrt() + eps);
                },
            );
        }
    }
}

/// Scalar Adam for the entropy temperature parameter.
#[derive(Debug, Clone)]
pub struct AdamScalar {
    m: f64,
    v: f64,
    t: u64,
    pub lr: f64,
}

impl AdamScalar {
    pub fn new(lr: f64) -> Self {
        Self { m: 0.0, v: 0.0, t: 0, lr }
    }

    pub fn step(&mut self, p: &mut f64, g: f64) {
        const B1: f64 = 0.9;
        const B2: f64 = 0.999;
        const EPS: f64 = 1e-8;
        self.t += 1;
        self.m = B1 * self.m + (1.0 - B1) * g;
        self.v = B2 * self.v + (1.0 - B2) * g * g;
        let mhat = self.m / (1.0 - B1.powi(self.t as i32));
        let vhat = self.v / (1.0 - B2.powi(self.t as i32));
        *p -= self.lr * mhat / (vhat.sqrt() + EPS);
    }
}
