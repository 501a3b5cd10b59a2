use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Model;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First/second moment estimates, one vector per trainable parameter.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub step: u64,
    pub first: Vec<Vec<f32>>,
    pub second: Vec<Vec<f32>>,
}

impl AdamState {
    /// Zeroed moments shaped like the model's trainable parameters.
    pub fn new(model: &Model) -> Self {
        let sizes: Vec<usize> = model
            .trainable_indices()
            .into_iter()
            .map(|i| model.params()[i].len())
            .collect();
        Self::with_sizes(&sizes)
    }

    pub fn with_sizes(sizes: &[usize]) -> Self {
        Self {
            step: 0,
            first: sizes.iter().map(|&n| vec![0.0; n]).collect(),
            second: sizes.iter().map(|&n| vec![0.0; n]).collect(),
        }
    }
}

/// One bias-corrected Adam update.
///
/// `params` pairs each parameter's name with its storage; `grads` follows
/// the same order. Nothing is modified when any gradient is non-finite.
pub fn adam_step(
    params: &mut [(&str, &mut [f32])],
    grads: &[&[f32]],
    state: &mut AdamState,
    lr: f64,
    cfg: &AdamConfig,
) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.first.len() {
        return Err(Error::shape(format!(
            "adam: {} parameters, {} gradients, {} moment slots",
            params.len(),
            grads.len(),
            state.first.len()
        )));
    }
    for ((name, p), g) in params.iter().zip(grads) {
        if p.len() != g.len() {
            return Err(Error::shape(format!(
                "adam: parameter `{name}` has {} elements but its gradient has {}",
                p.len(),
                g.len()
            )));
        }
        if g.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteGradient(name.to_string()));
        }
    }
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - cfg.beta1.powi(t);
    let c2 = 1.0 - cfg.beta2.powi(t);
    for (i, ((_, p), g)) in params.iter_mut().zip(grads).enumerate() {
        let m = &mut state.first[i];
        let v = &mut state.second[i];
        for j in 0..p.len() {
            let gj = g[j] as f64;
            let mj = cfg.beta1 * m[j] as f64 + (1.0 - cfg.beta1) * gj;
            let vj = cfg.beta2 * v[j] as f64 + (1.0 - cfg.beta2) * gj * gj;
            m[j] = mj as f32;
            v[j] = vj as f32;
            let update = lr * (mj / c1) / ((vj / c2).sqrt() + cfg.eps);
            p[j] = (p[j] as f64 - update) as f32;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_parameters() {
        let mut p = vec![1.0f32, -2.0, 3.5];
        let g = vec![0.0f32; 3];
        let mut state = AdamState::with_sizes(&[3]);
        adam_step(&mut [("w", &mut p)], &[&g], &mut state, 0.1, &AdamConfig::default()).unwrap();
        assert_eq!(p, vec![1.0, -2.0, 3.5]);
        assert_eq!(state.step, 1);
    }

    #[test]
    fn first_step_closed_form() {
        // m̂ = g, v̂ = g², so the first step moves by lr·g/(|g| + ε).
        let mut p = vec![1.0f32];
        let mut state = AdamState::with_sizes(&[1]);
        adam_step(&mut [("p", &mut p)], &[&[1.0]], &mut state, 0.1, &AdamConfig::default()).unwrap();
        let expected = (1.0f64 - 0.1 / (1.0 + 1e-8)) as f32;
        assert_eq!(p[0], expected);
    }

    #[test]
    fn non_finite_gradient_names_the_parameter() {
        let mut a = vec![0.0f32; 2];
        let mut b = vec![0.0f32; 2];
        let mut state = AdamState::with_sizes(&[2, 2]);
        let err = adam_step(
            &mut [("conv1.weight", &mut a), ("conv2.weight", &mut b)],
            &[&[1.0, 1.0], &[f32::NAN, 0.0]],
            &mut state,
            0.1,
            &AdamConfig::default(),
        )
        .unwrap_err();
        assert!(err.to_string().contains("conv2.weight"));
        assert_eq!(state.step, 0);
        assert_eq!(a, vec![0.0, 0.0]);
    }
}
