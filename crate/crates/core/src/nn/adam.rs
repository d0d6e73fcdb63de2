use crate::error::{ensure, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub first_moment: Vec<f64>,
    pub second_moment: Vec<f64>,
    pub step_count: u64,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamState {
    pub fn new(parameter_count: usize, learning_rate: f64) -> Self {
        Self {
            first_moment: vec![0.0; parameter_count],
            second_moment: vec![0.0; parameter_count],
            step_count: 0,
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// One bias-corrected Adam update applied in place.
pub fn adam_step(params: &mut [f64], grads: &[f64], state: &mut AdamState) -> Result<()> {
    ensure!(
        params.len() == grads.len()
            && params.len() == state.first_moment.len()
            && params.len() == state.second_moment.len(),
        Shape,
        "adam: {} parameters, {} gradients, {} moments",
        params.len(),
        grads.len(),
        state.first_moment.len()
    );
    state.step_count += 1;
    let t = state.step_count as i32;
    let (b1, b2) = (state.beta1, state.beta2);
    let correction1 = 1.0 - b1.powi(t);
    let correction2 = 1.0 - b2.powi(t);
    for (((p, g), m), v) in params
        .iter_mut()
        .zip(grads)
        .zip(state.first_moment.iter_mut())
        .zip(state.second_moment.iter_mut())
    {
        *m = b1 * *m + (1.0 - b1) * g;
        *v = b2 * *v + (1.0 - b2) * g * g;
        let m_hat = *m / correction1;
        let v_hat = *v / correction2;
        *p -= state.learning_rate * m_hat / (v_hat.sqrt() + state.epsilon);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_parameters_and_decays_moments() {
        let mut p = vec![1.0, -2.0];
        let mut st = AdamState::new(2, 1e-3);
        st.first_moment = vec![0.5, 0.5];
        st.second_moment = vec![0.25, 0.25];
        st.step_count = 3;
        // A nonzero first moment still moves the parameter; only check decay
        // and step accounting here.
        let before = p.clone();
        adam_step(&mut p, &[0.0, 0.0], &mut st).unwrap();
        assert_eq!(st.step_count, 4);
        assert!((st.first_moment[0] - 0.45).abs() < 1e-15);
        assert!((st.second_moment[0] - 0.25 * 0.999).abs() < 1e-15);
        assert_ne!(p, before);

        let mut p = vec![1.0, -2.0];
        let mut fresh = AdamState::new(2, 1e-3);
        adam_step(&mut p, &[0.0, 0.0], &mut fresh).unwrap();
        assert_eq!(p, vec![1.0, -2.0]);
    }

    #[test]
    fn first_step_moves_by_learning_rate_against_the_sign() {
        let grads = [3.0, -0.02, 1e-3, -50.0];
        let mut p = vec![0.0; 4];
        let mut st = AdamState::new(4, 1e-3);
        adam_step(&mut p, &grads, &mut st).unwrap();
        for (pi, g) in p.iter().zip(grads) {
            // m_hat = g, v_hat = g^2, so the step is lr * g / (|g| + eps).
            let expected = -1e-3 * g / (g.abs() + 1e-8);
            assert!((pi - expected).abs() < 1e-15);
            assert!((pi + 1e-3 * g.signum()).abs() < 1e-8);
        }
    }

    #[test]
    fn deterministic_and_shape_checked() {
        let mut a = vec![0.3, 0.4];
        let mut b = a.clone();
        let mut sa = AdamState::new(2, 0.01);
        let mut sb = sa.clone();
        adam_step(&mut a, &[0.1, -0.2], &mut sa).unwrap();
        adam_step(&mut b, &[0.1, -0.2], &mut sb).unwrap();
        assert_eq!(a, b);
        assert_eq!(sa, sb);
        assert!(matches!(
            adam_step(&mut a, &[0.1], &mut sa),
            Err(crate::Error::Shape(_))
        ));
    }
}
