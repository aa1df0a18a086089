use ndarray::Zip;

use crate::Real;

use super::{GradientSet, Mlp, NnError, Result};

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

/// First and second moment estimates for one network.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T> {
    pub m: GradientSet<T>,
    pub v: GradientSet<T>,
    pub t: u64,
    pub beta1: T,
    pub beta2: T,
    pub eps: T,
}

impl<T: Real> AdamState<T> {
    pub fn new(net: &Mlp<T>) -> Self {
        Self::for_sizes(net.sizes())
    }

    pub fn for_sizes(sizes: &[usize]) -> Self {
        Self {
            m: GradientSet::zeros_for_sizes(sizes),
            v: GradientSet::zeros_for_sizes(sizes),
            t: 0,
            beta1: T::lit(ADAM_BETA1),
            beta2: T::lit(ADAM_BETA2),
            eps: T::lit(ADAM_EPS),
        }
    }
}

/// One bias-corrected Adam update. Non-finite gradients are rejected before
/// anything is modified.
pub fn adam_step<T: Real>(net: &mut Mlp<T>, grads: &GradientSet<T>, state: &mut AdamState<T>, lr: T) -> Result<()> {
    if !grads.congruent_with(net) || state.m.sizes() != net.sizes() {
        return Err(NnError::Shape("gradient or optimizer state does not match network".into()));
    }
    if !grads.is_finite() {
        return Err(NnError::NonFiniteGradient);
    }
    state.t += 1;
    let (b1, b2, eps) = (state.beta1, state.beta2, state.eps);
    let one = T::one();
    let t = i32::try_from(state.t).unwrap_or(i32::MAX);
    let c1 = one - b1.powi(t);
    let c2 = one - b2.powi(t);
    let update = |p: &mut T, m: &mut T, v: &mut T, g: T| {
        *m = b1 * *m + (one - b1) * g;
        *v = b2 * *v + (one - b2) * g * g;
        let m_hat = *m / c1;
        let v_hat = *v / c2;
        *p -= lr * m_hat / (v_hat.sqrt() + eps);
    };
    for k in 0..grads.weights.len() {
        Zip::from(&mut net.weights_mut()[k])
            .and(&mut state.m.weights[k])
            .and(&mut state.v.weights[k])
            .and(&grads.weights[k])
            .for_each(|p, m, v, &g| update(p, m, v, g));
        Zip::from(&mut net.biases_mut()[k])
            .and(&mut state.m.biases[k])
            .and(&mut state.v.biases[k])
            .and(&grads.biases[k])
            .for_each(|p, m, v, &g| update(p, m, v, g));
    }
    Ok(())
}
