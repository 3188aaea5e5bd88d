/// Adam with bias correction, maximizing its objective.
#[derive(Clone, Debug, PartialEq)]
pub struct Adam {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl Adam {
    pub fn new(n: usize, beta1: f64, beta2: f64, eps: f64) -> Self {
        Adam { beta1, beta2, eps, m: vec![0.0; n], v: vec![0.0; n], t: 0 }
    }

    /// Number of steps taken.
    pub fn steps(&self) -> u64 {
        self.t
    }

    /// Moves `theta` along the ascent direction `grad`.
    pub fn step(&mut self, theta: &mut [f64], grad: &[f64], lr: f64) {
        assert_eq!(theta.len(), self.m.len());
        assert_eq!(grad.len(), self.m.len());
        self.t += 1;
        let t = self.t as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        for i in 0..theta.len() {
            let g = grad[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let mhat = self.m[i] / c1;
            let vhat = self.v[i] / c2;
            theta[i] += lr * mhat / (vhat.sqrt() + self.eps);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    // f(θ) = −θ²/2 maximized; the ascent gradient at θ is −θ.
    #[test]
    fn first_step_moves_by_lr() {
        let lr = 0.01;
        let mut adam = Adam::new(1, 0.9, 0.999, 0.0);
        let mut theta = [1.0];
        adam.step(&mut theta, &[-1.0], lr);
        assert!((theta[0] - 1.0 + lr).abs() <= 1e-12, "{}", theta[0] - 1.0);
    }

    #[test]
    fn first_step_with_default_eps() {
        let (lr, eps) = (0.01, 1e-8);
        let mut adam = Adam::new(1, 0.9, 0.999, eps);
        let mut theta = [1.0];
        adam.step(&mut theta, &[-1.0], lr);
        assert!((theta[0] - 1.0 + lr).abs() <= lr * eps * 1.01);
    }

    #[test]
    fn first_step_is_scale_free() {
        for g in [1e-6, 3.0, 1e4] {
            let mut adam = Adam::new(2, 0.9, 0.999, 0.0);
            let mut theta = [0.0, 0.0];
            adam.step(&mut theta, &[g, -g], 0.1);
            assert!((theta[0] - 0.1).abs() < 1e-12 && (theta[1] + 0.1).abs() < 1e-12);
        }
    }

    #[test]
    fn converges_on_quadratic() {
        let mut adam = Adam::new(1, 0.9, 0.999, 1e-8);
        let mut theta = [1.0];
        for _ in 0..2000 {
            let g = [-theta[0]];
            adam.step(&mut theta, &g, 0.01);
        }
        assert!(theta[0].abs() < 1e-2);
        assert_eq!(adam.steps(), 2000);
    }
}
