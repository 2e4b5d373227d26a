//! Adam optimizer over a flat parameter vector.

use crate::scalar::Scalar;

#[derive(Debug, Clone)]
pub struct Adam<T> {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    m: Vec<T>,
    v: Vec<T>,
}

impl<T: Scalar> Adam<T> {
    pub fn new(lr: f64, param_count: usize) -> Self {
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: vec![T::zero(); param_count],
            v: vec![T::zero(); param_count],
        }
    }

    /// One update with bias correction; deterministic given inputs.
    pub fn step(&mut self, params: &mut [T], grads: &[T]) {
        assert_eq!(params.len(), self.m.len(), "adam: param count mismatch");
        assert_eq!(grads.len(), self.m.len(), "adam: grad count mismatch");
        self.step += 1;
        let b1 = T::from_f64(self.beta1);
        let b2 = T::from_f64(self.beta2);
        let one = T::one();
        let corr1 = T::from_f64(1.0 - self.beta1.powi(self.step as i32));
        let corr2 = T::from_f64(1.0 - self.beta2.powi(self.step as i32));
        let lr = T::from_f64(self.lr);
        let eps = T::from_f64(self.eps);
        for i in 0..params.len() {
            let g = grads[i];
            self.m[i] = b1 * self.m[i] + (one - b1) * g;
            self.v[i] = b2 * self.v[i] + (one - b2) * g * g;
            let m_hat = self.m[i] / corr1;
            let v_hat = self.v[i] / corr2;
            params[i] = params[i] - lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_params_unchanged() {
        let mut opt = Adam::<f64>::new(1e-3, 3);
        let mut p = vec![1.0, -2.0, 0.5];
        opt.step(&mut p, &[0.0; 3]);
        assert_eq!(p, vec![1.0, -2.0, 0.5]);
    }

    #[test]
    fn first_step_moves_by_lr_against_gradient_sign() {
        // With bias correction, m_hat = g and v_hat = g^2, so the first update
        // is -lr * g / (|g| + eps) ~= -lr * sign(g).
        let lr = 1e-3;
        let mut opt = Adam::<f64>::new(lr, 2);
        let mut p = vec![0.0, 0.0];
        opt.step(&mut p, &[0.5, -2.0]);
        assert!((p[0] + lr).abs() < lr * 1e-6, "got {}", p[0]);
        assert!((p[1] - lr).abs() < lr * 1e-6, "got {}", p[1]);
    }

    #[test]
    fn identical_state_gives_identical_results() {
        let mut a = Adam::<f64>::new(1e-2, 2);
        let mut b = Adam::<f64>::new(1e-2, 2);
        let mut pa = vec![0.3, 0.9];
        let mut pb = vec![0.3, 0.9];
        for _ in 0..10 {
            a.step(&mut pa, &[0.1, -0.2]);
            b.step(&mut pb, &[0.1, -0.2]);
        }
        assert_eq!(pa, pb);
    }
}
