//! Bias-corrected Adam over a flat parameter vector.

use super::NnError;

#[derive(Debug, Clone)]
pub struct AdamState {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub t: u64,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

impl AdamState {
    pub fn new(n_params: usize, learning_rate: f64) -> Self {
        Self {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            t: 0,
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
        }
    }

    /// One Adam step. Rejects non-finite gradients so a diverged run aborts
    /// with diagnostics instead of poisoning the parameters.
    pub fn update(&mut self, params: &mut [f64], grads: &[f64]) -> Result<(), NnError> {
        assert_eq!(params.len(), self.m.len());
        assert_eq!(grads.len(), self.m.len());
        if grads.iter().any(|g| !g.is_finite()) {
            return Err(NnError::NonFinite {
                what: "gradient".into(),
                step: self.t + 1,
            });
        }
        self.t += 1;
        let b1t = 1.0 - self.beta1.powi(self.t as i32);
        let b2t = 1.0 - self.beta2.powi(self.t as i32);
        for i in 0..params.len() {
            let g = grads[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let m_hat = self.m[i] / b1t;
            let v_hat = self.v[i] / b2t;
            params[i] -= self.learning_rate * m_hat / (v_hat.sqrt() + self.epsilon);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_params_unchanged() {
        let mut st = AdamState::new(3, 0.001);
        let mut p = vec![1.0, -2.0, 0.5];
        let before = p.clone();
        st.update(&mut p, &[0.0, 0.0, 0.0]).unwrap();
        assert_eq!(p, before);
        assert_eq!(st.t, 1);
    }

    #[test]
    fn first_step_with_unit_gradient_moves_by_lr() {
        // bias correction cancels: m_hat = v_hat = 1, step = lr / (1 + eps)
        let mut st = AdamState::new(1, 0.001);
        let mut p = vec![0.0];
        st.update(&mut p, &[1.0]).unwrap();
        let expected = -0.001 / (1.0 + 1e-8);
        assert!((p[0] - expected).abs() < 1e-15);
    }

    #[test]
    fn identical_runs_are_identical() {
        let mut a = AdamState::new(2, 0.01);
        let mut b = AdamState::new(2, 0.01);
        let mut pa = vec![0.3, -0.4];
        let mut pb = vec![0.3, -0.4];
        for step in 0..50 {
            let g = [0.1 * (step as f64).sin(), -0.2];
            a.update(&mut pa, &g).unwrap();
            b.update(&mut pb, &g).unwrap();
        }
        assert_eq!(pa, pb);
    }

    #[test]
    fn non_finite_gradient_is_rejected() {
        let mut st = AdamState::new(1, 0.001);
        let mut p = vec![0.0];
        assert!(st.update(&mut p, &[f64::NAN]).is_err());
    }
}
