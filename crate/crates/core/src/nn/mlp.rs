use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::Real;

use super::{NnError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputActivation {
    Linear,
    /// `tanh`, keeping every output in `(-1, 1)`.
    Tanh,
}

/// Fully connected network, rectifier on hidden layers.
///
/// Layer `k` maps `sizes[k]` inputs to `sizes[k + 1]` outputs with a weight
/// matrix of shape `(sizes[k + 1], sizes[k])`. Batches are row-major: one
/// sample per row.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp<T> {
    sizes: Vec<usize>,
    weights: Vec<Array2<T>>,
    biases: Vec<Array1<T>>,
    output: OutputActivation,
}

/// Parameter-shaped arrays (gradients, optimizer moments).
#[derive(Debug, Clone, PartialEq)]
pub struct GradientSet<T> {
    pub weights: Vec<Array2<T>>,
    pub biases: Vec<Array1<T>>,
}

/// Activations kept from a forward pass for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache<T> {
    /// `layers + 1` entries: the input, each hidden activation, the output.
    activations: Vec<Array2<T>>,
}

impl<T: Real> ForwardCache<T> {
    pub fn output(&self) -> &Array2<T> {
        self.activations.last().expect("non-empty cache")
    }

    pub fn into_output(mut self) -> Array2<T> {
        self.activations.pop().expect("non-empty cache")
    }
}

fn check_sizes(sizes: &[usize]) -> Result<()> {
    if sizes.len() < 2 || sizes.contains(&0) {
        return Err(NnError::InvalidSizes(sizes.to_vec()));
    }
    Ok(())
}

impl<T: Real> Mlp<T> {
    /// Uniform `±sqrt(6 / fan_in)` weights, zero biases.
    pub fn new(sizes: &[usize], output: OutputActivation, seed: u64) -> Result<Self> {
        check_sizes(sizes)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut weights = Vec::with_capacity(sizes.len() - 1);
        let mut biases = Vec::with_capacity(sizes.len() - 1);
        for w in sizes.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let bound = (6.0 / fan_in as f64).sqrt();
            weights.push(Array2::from_shape_simple_fn((fan_out, fan_in), || {
                T::lit(rng.random_range(-bound..bound))
            }));
            biases.push(Array1::zeros(fan_out));
        }
        Ok(Self { sizes: sizes.to_vec(), weights, biases, output })
    }

    pub fn from_parts(weights: Vec<Array2<T>>, biases: Vec<Array1<T>>, output: OutputActivation) -> Result<Self> {
        if weights.is_empty() || weights.len() != biases.len() {
            return Err(NnError::Shape("need one bias per weight matrix".into()));
        }
        let mut sizes = vec![weights[0].ncols()];
        for (k, (w, b)) in weights.iter().zip(&biases).enumerate() {
            if w.ncols() != *sizes.last().expect("non-empty") || b.len() != w.nrows() {
                return Err(NnError::Shape(format!("layer {k} is inconsistent")));
            }
            sizes.push(w.nrows());
        }
        check_sizes(&sizes)?;
        Ok(Self { sizes, weights, biases, output })
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().expect("non-empty sizes")
    }

    pub fn output_activation(&self) -> OutputActivation {
        self.output
    }

    pub fn weights(&self) -> &[Array2<T>] {
        &self.weights
    }

    pub fn biases(&self) -> &[Array1<T>] {
        &self.biases
    }

    pub fn weights_mut(&mut self) -> &mut [Array2<T>] {
        &mut self.weights
    }

    pub fn biases_mut(&mut self) -> &mut [Array1<T>] {
        &mut self.biases
    }

    pub fn param_count(&self) -> usize {
        self.weights.iter().map(|w| w.len()).sum::<usize>() + self.biases.iter().map(|b| b.len()).sum::<usize>()
    }

    pub fn is_finite(&self) -> bool {
        self.weights.iter().all(|w| w.iter().all(|v| v.is_finite()))
            && self.biases.iter().all(|b| b.iter().all(|v| v.is_finite()))
    }

    pub fn forward(&self, input: ArrayView2<T>) -> Result<ForwardCache<T>> {
        if input.ncols() != self.input_dim() {
            return Err(NnError::Shape(format!(
                "input width {} != {}",
                input.ncols(),
                self.input_dim()
            )));
        }
        let last = self.weights.len() - 1;
        let mut activations = Vec::with_capacity(self.weights.len() + 1);
        activations.push(input.to_owned());
        for (k, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let mut z = activations[k].dot(&w.t());
            z += b;
            if k < last {
                z.mapv_inplace(|v| v.max(T::zero()));
            } else if self.output == OutputActivation::Tanh {
                z.mapv_inplace(|v| v.tanh());
            }
            activations.push(z);
        }
        Ok(ForwardCache { activations })
    }

    /// Forward pass without keeping intermediates.
    pub fn predict(&self, input: ArrayView2<T>) -> Result<Array2<T>> {
        self.forward(input).map(ForwardCache::into_output)
    }

    /// Reverse pass for the loss `L = (1/B) Σ_i ⟨g_i, y_i⟩` where `g = grad_output`
    /// and `B` the batch size.
    ///
    /// Parameter gradients are those of `L`. Row `i` of the returned input
    /// gradient is `∂⟨g_i, y_i⟩/∂x_i`, i.e. `B · ∂L/∂x_i`, so it can be fed
    /// directly as the output gradient of an upstream network.
    pub fn backward(&self, cache: &ForwardCache<T>, grad_output: ArrayView2<T>) -> Result<(GradientSet<T>, Array2<T>)> {
        let layers = self.weights.len();
        let out = cache.output();
        if cache.activations.len() != layers + 1 || grad_output.dim() != out.dim() {
            return Err(NnError::Shape(format!(
                "output gradient {:?} does not match cached output {:?}",
                grad_output.dim(),
                out.dim()
            )));
        }
        let batch = T::lit(out.nrows() as f64);
        let mut delta = grad_output.to_owned();
        if self.output == OutputActivation::Tanh {
            Zip::from(&mut delta).and(out).for_each(|d, &y| *d *= T::one() - y * y);
        }
        let mut grads = GradientSet::zeros_like(self);
        for k in (0..layers).rev() {
            let a_in = &cache.activations[k];
            grads.weights[k] = delta.t().dot(a_in) / batch;
            grads.biases[k] = delta.sum_axis(Axis(0)) / batch;
            let mut upstream = delta.dot(&self.weights[k]);
            if k > 0 {
                Zip::from(&mut upstream).and(a_in).for_each(|d, &a| {
                    if a <= T::zero() {
                        *d = T::zero();
                    }
                });
            }
            delta = upstream;
        }
        Ok((grads, delta))
    }

    /// `self ← ρ·self + (1 − ρ)·live`, componentwise.
    pub fn polyak_from(&mut self, live: &Mlp<T>, rho: T) -> Result<()> {
        if live.sizes != self.sizes {
            return Err(NnError::Shape(format!("polyak {:?} vs {:?}", self.sizes, live.sizes)));
        }
        let keep = T::one() - rho;
        for (t, l) in self.weights.iter_mut().zip(&live.weights) {
            Zip::from(t).and(l).for_each(|t, &l| *t = rho * *t + keep * l);
        }
        for (t, l) in self.biases.iter_mut().zip(&live.biases) {
            Zip::from(t).and(l).for_each(|t, &l| *t = rho * *t + keep * l);
        }
        Ok(())
    }
}

impl<T: Real> GradientSet<T> {
    pub fn zeros_like(net: &Mlp<T>) -> Self {
        Self::zeros_for_sizes(net.sizes())
    }

    pub fn zeros_for_sizes(sizes: &[usize]) -> Self {
        Self {
            weights: sizes.windows(2).map(|w| Array2::zeros((w[1], w[0]))).collect(),
            biases: sizes.windows(2).map(|w| Array1::zeros(w[1])).collect(),
        }
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s: Vec<usize> = self.weights.iter().map(|w| w.ncols()).collect();
        if let Some(w) = self.weights.last() {
            s.push(w.nrows());
        }
        s
    }

    pub fn is_finite(&self) -> bool {
        self.values().all(|v| v.is_finite())
    }

    /// All entries, layer by layer: weights (row-major) then biases.
    pub fn values(&self) -> impl Iterator<Item = T> + '_ {
        self.weights
            .iter()
            .zip(&self.biases)
            .flat_map(|(w, b)| w.iter().chain(b.iter()).copied())
    }

    pub fn congruent_with(&self, net: &Mlp<T>) -> bool {
        self.weights.len() == net.weights.len()
            && self.weights.iter().zip(&net.weights).all(|(a, b)| a.dim() == b.dim())
            && self.biases.iter().zip(&net.biases).all(|(a, b)| a.len() == b.len())
    }
}
