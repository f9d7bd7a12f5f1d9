use crate::error::{QramError, Result};

/// Bias-corrected Adam.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl AdamState {
    pub fn new(n_params: usize, lr: f64) -> Self {
        AdamState {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
            t: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) -> Result<()> {
        if params.len() != self.m.len() || grad.len() != self.m.len() {
            return Err(QramError::Structure(format!(
                "adam tracks {} params, got {} params and {} grads",
                self.m.len(),
                params.len(),
                grad.len()
            )));
        }
        if let Some(i) = grad.iter().position(|g| !g.is_finite()) {
            return Err(QramError::Numeric(format!(
                "non-finite gradient at parameter {i} (step {})",
                self.t + 1
            )));
        }
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for i in 0..params.len() {
            let g = grad[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            params[i] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_params() {
        let mut adam = AdamState::new(3, 0.001);
        let mut p = vec![0.1, -2.0, 3.0];
        adam.step(&mut p, &[0.0; 3]).unwrap();
        assert_eq!(p, vec![0.1, -2.0, 3.0]);
        assert_eq!(adam.steps(), 1);
    }

    #[test]
    fn first_step_moves_by_lr() {
        let mut adam = AdamState::new(1, 0.001);
        let mut p = vec![0.0];
        adam.step(&mut p, &[0.5]).unwrap();
        assert!((p[0] + 0.001).abs() < 1e-6);
    }

    #[test]
    fn rejects_non_finite() {
        let mut adam = AdamState::new(2, 0.001);
        let mut p = vec![0.0, 0.0];
        assert!(matches!(
            adam.step(&mut p, &[1.0, f64::INFINITY]),
            Err(QramError::Numeric(_))
        ));
        assert_eq!(p, vec![0.0, 0.0]);
    }

    #[test]
    fn minimizes_quadratic() {
        let mut adam = AdamState::new(2, 0.05);
        let mut p = vec![1.5, -0.7];
        for _ in 0..2000 {
            let g: Vec<f64> = p.iter().map(|x| 2.0 * (x - 0.3)).collect();
            adam.step(&mut p, &g).unwrap();
        }
        assert!(p.iter().all(|x| (x - 0.3).abs() < 1e-3));
    }
}
