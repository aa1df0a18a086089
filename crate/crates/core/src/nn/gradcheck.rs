//! Central-difference gradients, used as an independent check of `backward`.

use ndarray::{Array2, ArrayView2};

use crate::Real;

use super::{GradientSet, Mlp};

pub const FD_STEP: f64 = 1e-6;

/// Central differences of `loss(net(input))` with respect to every parameter.
/// Costs two forward passes per parameter; meant for small networks.
pub fn finite_difference_grad<T, F>(net: &Mlp<T>, input: ArrayView2<T>, loss: F) -> GradientSet<T>
where
    T: Real,
    F: Fn(&Array2<T>) -> T,
{
    let h = T::lit(FD_STEP);
    let two_h = h + h;
    let mut probe = net.clone();
    let eval = |n: &Mlp<T>| loss(&n.predict(input).expect("input width checked by caller"));
    let mut grads = GradientSet::zeros_like(net);
    for k in 0..net.weights().len() {
        for idx in 0..net.weights()[k].len() {
            let (r, c) = (idx / net.weights()[k].ncols(), idx % net.weights()[k].ncols());
            let orig = probe.weights()[k][[r, c]];
            probe.weights_mut()[k][[r, c]] = orig + h;
            let up = eval(&probe);
            probe.weights_mut()[k][[r, c]] = orig - h;
            let down = eval(&probe);
            probe.weights_mut()[k][[r, c]] = orig;
            grads.weights[k][[r, c]] = (up - down) / two_h;
        }
        for i in 0..net.biases()[k].len() {
            let orig = probe.biases()[k][i];
            probe.biases_mut()[k][i] = orig + h;
            let up = eval(&probe);
            probe.biases_mut()[k][i] = orig - h;
            let down = eval(&probe);
            probe.biases_mut()[k][i] = orig;
            grads.biases[k][i] = (up - down) / two_h;
        }
    }
    grads
}

/// `max |a − b| / max(|a|, |b|, floor)` over all entries.
pub fn max_relative_error<T: Real>(a: &GradientSet<T>, b: &GradientSet<T>, floor: T) -> T {
    a.values()
        .zip(b.values())
        .map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()).max(floor))
        .fold(T::zero(), T::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::OutputActivation;
    use ndarray::array;

    #[test]
    fn constant_loss_has_zero_gradient() {
        let net = Mlp::<f64>::new(&[2, 3, 1], OutputActivation::Linear, 1).unwrap();
        let g = finite_difference_grad(&net, array![[0.5, -0.5]].view(), |_| 4.0);
        assert!(g.values().all(|v| v == 0.0));
    }

    #[test]
    fn linear_in_one_weight() {
        // f(x) = w·x + b on a single input; d/dw = x, d/db = 1
        let net = Mlp::from_parts(vec![array![[0.8f64]]], vec![array![0.1]], OutputActivation::Linear).unwrap();
        let g = finite_difference_grad(&net, array![[3.0]].view(), |y| y[[0, 0]]);
        assert!((g.weights[0][[0, 0]] - 3.0).abs() < 1e-8);
        assert!((g.biases[0][0] - 1.0).abs() < 1e-8);
    }
}
