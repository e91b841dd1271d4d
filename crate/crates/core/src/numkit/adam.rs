use super::ParamSet;
use crate::error::{Error, Result};

/// Bias-corrected Adam with per-tensor moment buffers.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub step_count: u64,
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new(params: &ParamSet, lr: f64) -> Self {
        let zeros = || params.tensors.iter().map(|t| vec![0.0; t.len()]).collect();
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            step_count: 0,
            m: zeros(),
            v: zeros(),
        }
    }
}

/// One Adam update from the gradients stored in `params`; gradients are
/// zeroed afterwards. A non-finite gradient aborts the step before any
/// value changes.
pub fn adam_step(params: &mut ParamSet, state: &mut AdamState) -> Result<()> {
    if state.m.len() != params.tensors.len() {
        return Err(Error::Dimension(format!(
            "optimizer tracks {} tensors, parameter set has {}",
            state.m.len(),
            params.tensors.len()
        )));
    }
    if let Some(bad) = params
        .tensors
        .iter()
        .find(|t| t.grad.iter().any(|g| !g.is_finite()))
    {
        return Err(Error::NonFinite(format!("gradient of {}", bad.name)));
    }
    state.step_count += 1;
    let t = state.step_count as i32;
    let (b1, b2) = (state.beta1, state.beta2);
    let step = state.lr / (1.0 - b1.powi(t));
    let v_corr = 1.0 / (1.0 - b2.powi(t));
    for ((tensor, m), v) in params.tensors.iter_mut().zip(&mut state.m).zip(&mut state.v) {
        for (((p, g), m), v) in tensor
            .values
            .iter_mut()
            .zip(&tensor.grad)
            .zip(m.iter_mut())
            .zip(v.iter_mut())
        {
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            *p -= step * *m / ((*v * v_corr).sqrt() + state.epsilon);
        }
        tensor.zero_grad();
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkit::ParamTensor;

    fn scalar(value: f64, grad: f64) -> ParamSet {
        let mut p = ParamSet::new();
        let mut t = ParamTensor::from_values("w", &[1], vec![value]).unwrap();
        t.grad[0] = grad;
        p.push(t);
        p
    }

    #[test]
    fn first_step_hand_evaluated() {
        let mut p = scalar(0.0, 1.0);
        let mut s = AdamState::new(&p, 0.01);
        adam_step(&mut p, &mut s).unwrap();
        // m̂ = 1, v̂ = 1  =>  Δ = -0.01 / (1 + 1e-8)
        let expected = -0.01 / (1.0 + 1e-8);
        assert!((p[0].values[0] - expected).abs() < 1e-18);
        assert_eq!(p[0].grad[0], 0.0);
        assert_eq!(s.step_count, 1);
    }

    #[test]
    fn zero_gradient_leaves_params() {
        let mut p = scalar(0.7, 0.0);
        let mut s = AdamState::new(&p, 0.01);
        adam_step(&mut p, &mut s).unwrap();
        assert_eq!(p[0].values[0], 0.7);
    }

    #[test]
    fn non_finite_gradient_aborts_and_names_tensor() {
        let mut p = scalar(0.7, f64::NAN);
        let mut s = AdamState::new(&p, 0.01);
        match adam_step(&mut p, &mut s) {
            Err(Error::NonFinite(msg)) => assert!(msg.contains('w')),
            other => panic!("unexpected {other:?}"),
        }
        assert_eq!(p[0].values[0], 0.7);
        assert_eq!(s.step_count, 0);
    }

    #[test]
    fn identical_runs_identical_trajectories() {
        let run = || {
            let mut p = scalar(1.0, 0.0);
            let mut s = AdamState::new(&p, 0.01);
            let mut traj = Vec::new();
            for k in 0..50 {
                p[0].grad[0] = 2.0 * p[0].values[0] + (k as f64).sin();
                adam_step(&mut p, &mut s).unwrap();
                traj.push(p[0].values[0]);
            }
            traj
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn minimizes_a_quadratic() {
        let mut p = scalar(3.0, 0.0);
        let mut s = AdamState::new(&p, 0.05);
        for _ in 0..2000 {
            p[0].grad[0] = 2.0 * (p[0].values[0] - 1.0);
            adam_step(&mut p, &mut s).unwrap();
        }
        assert!((p[0].values[0] - 1.0).abs() < 1e-3);
    }
}
