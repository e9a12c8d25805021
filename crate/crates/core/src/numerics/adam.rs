//! Adam with bias correction.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::mlp::{GradSet, Mlp};

/// First/second moment accumulators for one network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    m: GradSet,
    v: GradSet,
    pub step: u64,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    /// Fresh state with the usual moment decays (0.9, 0.999) and `eps = 1e-8`.
    pub fn new(net: &Mlp, lr: f64) -> Result<Self> {
        if !(lr > 0.0 && lr.is_finite()) {
            return Err(Error::config(format!("learning rate must be positive, got {lr}")));
        }
        Ok(AdamState {
            m: GradSet::zeros_like(net),
            v: GradSet::zeros_like(net),
            step: 0,
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        })
    }
}

/// Applies one Adam update to `net` in place.
pub fn adam_step(net: &mut Mlp, grads: &GradSet, state: &mut AdamState) -> Result<()> {
    if !grads.matches(net) || !state.m.matches(net) {
        return Err(Error::Shape {
            context: "adam parameters",
            expected: net.num_params(),
            found: grads.flat().len(),
        });
    }
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - state.beta1.powi(t);
    let c2 = 1.0 - state.beta2.powi(t);
    let (b1, b2, lr, eps) = (state.beta1, state.beta2, state.lr, state.eps);

    let params = net
        .layers_mut()
        .iter_mut()
        .flat_map(|l| l.weights.iter_mut().chain(l.bias.iter_mut()));
    for (((p, g), m), v) in params
        .zip(grads.values())
        .zip(state.m.values_mut())
        .zip(state.v.values_mut())
    {
        *m = b1 * *m + (1.0 - b1) * g;
        *v = b2 * *v + (1.0 - b2) * g * g;
        let m_hat = *m / c1;
        let v_hat = *v / c2;
        *p -= lr * m_hat / (v_hat.sqrt() + eps);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::mlp::Dense;

    fn scalar_net(value: f64) -> Mlp {
        // one "weight" parameter and a bias we leave at zero gradient
        Mlp::from_layers(vec![Dense { in_dim: 1, out_dim: 1, weights: vec![value], bias: vec![0.0] }]).unwrap()
    }

    #[test]
    fn zero_gradients_leave_params_and_bump_counter() {
        let mut net = Mlp::init(&[3, 4, 1], 1).unwrap();
        let before = net.clone();
        let mut st = AdamState::new(&net, 0.01).unwrap();
        let g = GradSet::zeros_like(&net);
        for _ in 0..25 {
            adam_step(&mut net, &g, &mut st).unwrap();
        }
        assert_eq!(net, before);
        assert_eq!(st.step, 25);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut net = scalar_net(0.0);
        let mut st = AdamState::new(&net, 0.1).unwrap();
        let mut g = GradSet::zeros_like(&net);
        g.layers[0].weights[0] = 1.0;
        adam_step(&mut net, &g, &mut st).unwrap();
        // m_hat = 1, v_hat = 1, step = lr / (1 + eps)
        let expected = -0.1 / (1.0 + 1e-8);
        assert!((net.layers()[0].weights[0] - expected).abs() < 1e-15);
        assert!((net.layers()[0].weights[0] + 0.1).abs() < 1e-8);
    }

    #[test]
    fn identical_runs_are_bitwise_equal() {
        let run = || {
            let mut net = Mlp::init(&[2, 3, 1], 42).unwrap();
            let mut st = AdamState::new(&net, 0.05).unwrap();
            let mut g = GradSet::zeros_like(&net);
            for (i, v) in g.values_mut().enumerate() {
                *v = (i as f64 * 0.37).sin();
            }
            for _ in 0..10 {
                adam_step(&mut net, &g, &mut st).unwrap();
            }
            net.flat_params()
        };
        let a = run();
        let b = run();
        assert!(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()));
    }

    #[test]
    fn shape_mismatch_rejected() {
        let mut net = Mlp::init(&[2, 3, 1], 1).unwrap();
        let other = Mlp::init(&[2, 1], 1).unwrap();
        let mut st = AdamState::new(&net, 0.1).unwrap();
        assert!(adam_step(&mut net, &GradSet::zeros_like(&other), &mut st).is_err());
        assert!(AdamState::new(&net, 0.0).is_err());
    }
}
