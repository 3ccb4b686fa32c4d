//! Adam with bias correction over a [`ParamSet`].

use serde::{Deserialize, Serialize};

use super::params::ParamSet;
use crate::error::{invalid, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub step: u64,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

impl AdamState {
    pub fn new(n_params: usize, learning_rate: f64) -> Self {
        Self {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
        }
    }
}

/// One Adam update using the accumulated gradients; gradients are zeroed afterwards.
pub fn adam_step(params: &mut ParamSet, state: &mut AdamState) -> Result<()> {
    let n = params.len();
    if state.m.len() != n || state.v.len() != n {
        return invalid(format!(
            "adam state tracks {} parameters, parameter set has {n}",
            state.m.len()
        ));
    }
    let grads = params.flat_grads();
    let mut theta = params.flat_values();
    state.step += 1;
    let t = state.step as i32;
    let bc1 = 1.0 - state.beta1.powi(t);
    let bc2 = 1.0 - state.beta2.powi(t);
    for i in 0..n {
        let g = grads[i];
        state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g;
        state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * g * g;
        let m_hat = state.m[i] / bc1;
        let v_hat = state.v[i] / bc2;
        theta[i] -= state.learning_rate * m_hat / (v_hat.sqrt() + state.eps);
    }
    params.set_flat_values(&theta)?;
    params.zero_grads();
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(value: f64, grad: f64) -> ParamSet {
        let mut p = ParamSet::new();
        let i = p.add_group("w", vec![value]);
        p.accumulate(i, &[grad]).unwrap();
        p
    }

    #[test]
    fn first_step_moves_by_lr_times_sign() {
        for &g in &[0.37, -12.0, 1e-3] {
            let mut p = single(1.0, g);
            let mut st = AdamState::new(1, 1e-3);
            adam_step(&mut p, &mut st).unwrap();
            // m_hat = g, v_hat = g^2, so the step is lr * g / (|g| + eps)
            let expected = 1.0 - 1e-3 * g / (g.abs() + 1e-8);
            assert!((p.values(0)[0] - expected).abs() < 1e-15);
            assert!((p.values(0)[0] - (1.0 - 1e-3 * g.signum())).abs() < 1e-8);
            assert_eq!(p.grads(0), &[0.0]);
        }
    }

    #[test]
    fn zero_gradient_leaves_params() {
        let mut p = single(0.25, 0.0);
        let mut st = AdamState::new(1, 1e-3);
        adam_step(&mut p, &mut st).unwrap();
        assert_eq!(p.values(0), &[0.25]);
    }

    #[test]
    fn constant_gradient_moves_monotonically() {
        let mut p = single(0.0, 0.5);
        let mut st = AdamState::new(1, 1e-2);
        adam_step(&mut p, &mut st).unwrap();
        let after_one = p.values(0)[0];
        p.accumulate(0, &[0.5]).unwrap();
        adam_step(&mut p, &mut st).unwrap();
        let after_two = p.values(0)[0];
        assert!(after_one < 0.0 && after_two < after_one);
        assert_eq!(st.step, 2);
    }

    #[test]
    fn cardinality_mismatch_is_rejected() {
        let mut p = single(0.0, 1.0);
        let mut st = AdamState::new(3, 1e-3);
        assert!(adam_step(&mut p, &mut st).is_err());
    }
}
