use serde::{Deserialize, Serialize};

use super::tensor::Parameter;

/// Bias-corrected adaptive-moment optimiser.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Number of updates applied so far.
    pub t: u64,
}

impl Default for Adam {
    fn default() -> Self {
        Adam { lr: 1e-3, beta1: 0.9, beta2: 0.999, eps: 1e-8, t: 0 }
    }
}

impl Adam {
    pub fn with_lr(lr: f64) -> Self {
        Adam { lr, ..Adam::default() }
    }

    pub fn step<'a>(&mut self, params: impl IntoIterator<Item = &'a mut Parameter>) {
        self.t += 1;
        for p in params {
            adam_step(p, self.lr, self.beta1, self.beta2, self.eps, self.t);
        }
    }
}

/// One in-place update of `p` at step `t` (1-based) from its accumulated gradient.
pub fn adam_step(p: &mut Parameter, lr: f64, beta1: f64, beta2: f64, eps: f64, t: u64) {
    debug_assert!(t >= 1);
    let bc1 = 1.0 - beta1.powi(t as i32);
    let bc2 = 1.0 - beta2.powi(t as i32);
    let g = p.grad.data();
    let m = p.first_moment.data_mut();
    for (mi, gi) in m.iter_mut().zip(g) {
        *mi = beta1 * *mi + (1.0 - beta1) * gi;
    }
    let v = p.second_moment.data_mut();
    for (vi, gi) in v.iter_mut().zip(g) {
        *vi = beta2 * *vi + (1.0 - beta2) * gi * gi;
    }
    let (m, v) = (p.first_moment.data().to_vec(), p.second_moment.data());
    for ((w, mi), vi) in p.value.data_mut().iter_mut().zip(&m).zip(v) {
        *w -= lr * (mi / bc1) / ((vi / bc2).sqrt() + eps);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::tensor::Tensor;

    #[test]
    fn zero_gradient_keeps_value_and_decays_moments() {
        let mut p = Parameter::new("w", Tensor::filled(&[3], 2.0));
        p.first_moment.fill(1.0);
        p.second_moment.fill(1.0);
        adam_step(&mut p, 1e-3, 0.9, 0.999, 1e-8, 5);
        // moments decay but a non-zero first moment still moves the value
        assert!((p.first_moment.data()[0] - 0.9).abs() < 1e-15);
        assert!((p.second_moment.data()[0] - 0.999).abs() < 1e-15);

        let mut q = Parameter::new("w", Tensor::filled(&[3], 2.0));
        adam_step(&mut q, 1e-3, 0.9, 0.999, 1e-8, 1);
        assert_eq!(q.value.data(), &[2.0; 3]);
    }

    #[test]
    fn first_step_magnitude_is_lr() {
        for g in [1e-3, 0.5, 40.0] {
            let mut p = Parameter::new("w", Tensor::zeros(&[1]));
            p.grad.fill(g);
            adam_step(&mut p, 1e-3, 0.9, 0.999, 1e-8, 1);
            assert!((p.value.data()[0].abs() - 1e-3).abs() < 1e-8, "g = {g}");
        }
    }

    #[test]
    fn quadratic_bowl() {
        // oracle recurrence written out independently of adam_step
        let (lr, b1, b2, eps) = (1e-2, 0.9, 0.999, 1e-8);
        let (mut w, mut m, mut v) = (1.0f64, 0.0f64, 0.0f64);
        let mut oracle_hit = None;
        for t in 1..=500 {
            let g = 2.0 * w;
            m = b1 * m + (1.0 - b1) * g;
            v = b2 * v + (1.0 - b2) * g * g;
            w -= lr * (m / (1.0 - b1.powi(t))) / ((v / (1.0 - b2.powi(t))).sqrt() + eps);
            if w.abs() < 0.1 && oracle_hit.is_none() {
                oracle_hit = Some(t);
            }
        }
        assert!(oracle_hit.is_some());

        let mut p = Parameter::new("w", Tensor::filled(&[1], 1.0));
        let mut opt = Adam::with_lr(1e-2);
        let mut hit = None;
        for t in 1..=500 {
            p.grad.fill(2.0 * p.value.data()[0]);
            opt.step([&mut p]);
            if p.value.data()[0].abs() < 0.1 && hit.is_none() {
                hit = Some(t);
            }
        }
        assert_eq!(hit, oracle_hit);
        assert!((p.value.data()[0] - w).abs() < 1e-12);
    }
}
