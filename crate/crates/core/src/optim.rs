//! Adam with a step-decay learning-rate schedule.

use crate::config::OptimizerConfig;

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const EPS: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct Adam {
    schedule: OptimizerConfig,
    m: Vec<f64>,
    v: Vec<f64>,
    step: usize,
}

impl Adam {
    pub fn new(schedule: OptimizerConfig, n_params: usize) -> Self {
        Adam {
            schedule,
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
            step: 0,
        }
    }

    pub fn steps_taken(&self) -> usize {
        self.step
    }

    /// One update of `params` in place.
    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) {
        assert_eq!(params.len(), self.m.len());
        assert_eq!(grads.len(), self.m.len());
        let lr = self.schedule.lr_at(self.step);
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - BETA1.powi(t);
        let c2 = 1.0 - BETA2.powi(t);
        for i in 0..params.len() {
            let g = grads[i];
            self.m[i] = BETA1 * self.m[i] + (1.0 - BETA1) * g;
            self.v[i] = BETA2 * self.v[i] + (1.0 - BETA2) * g * g;
            let mh = self.m[i] / c1;
            let vh = self.v[i] / c2;
            params[i] -= lr * mh / (vh.sqrt() + EPS);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_moves_by_lr() {
        let mut adam = Adam::new(OptimizerConfig::default().with_lr(0.1), 2);
        let mut p = [1.0, -1.0];
        adam.step(&mut p, &[3.0, -0.001]);
        assert!((p[0] - 0.9).abs() < 1e-6);
        assert!((p[1] + 0.9).abs() < 1e-4);
    }

    #[test]
    fn minimizes_quadratic() {
        let mut adam = Adam::new(
            OptimizerConfig::default()
                .with_lr(0.05)
                .with_iterations(2000),
            1,
        );
        let mut p = [3.0];
        for _ in 0..2000 {
            let g = 2.0 * (p[0] - 1.0);
            adam.step(&mut p, &[g]);
        }
        assert!((p[0] - 1.0).abs() < 1e-2);
    }

    #[test]
    fn zero_gradient_is_a_no_op() {
        let mut adam = Adam::new(OptimizerConfig::default(), 3);
        let mut p = [0.25, 0.5, 0.75];
        for _ in 0..10 {
            adam.step(&mut p, &[0.0; 3]);
        }
        assert_eq!(p, [0.25, 0.5, 0.75]);
    }
}
