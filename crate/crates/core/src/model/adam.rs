//! Adam with global-norm gradient clipping.

use serde::{Deserialize, Serialize};

use crate::scalar::Real;

/// Scales `grads` in place so their joint L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
pub fn clip_global_norm<T: Real>(grads: &mut [Vec<T>], max_norm: T) -> T {
    let norm = grads.iter().flatten().map(|&g| g * g).sum::<T>().sqrt();
    if norm > max_norm && norm > T::zero() {
        let k = max_norm / norm;
        grads.iter_mut().flatten().for_each(|g| *g *= k);
    }
    norm
}

/// Scales a single vector to norm at most `max_norm`.
pub fn clip_norm<T: Real>(v: &mut [T], max_norm: T) -> T {
    let norm = v.iter().map(|&g| g * g).sum::<T>().sqrt();
    if norm > max_norm && norm > T::zero() {
        let k = max_norm / norm;
        v.iter_mut().for_each(|g| *g *= k);
    }
    norm
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Adam<T> {
    pub learning_rate: T,
    pub beta1: T,
    pub beta2: T,
    pub epsilon: T,
    step: u64,
    m: Vec<Vec<T>>,
    v: Vec<Vec<T>>,
}

impl<T: Real> Adam<T> {
    pub fn new(learning_rate: T, shapes: &[usize]) -> Self {
        Self {
            learning_rate,
            beta1: T::lit(0.9),
            beta2: T::lit(0.999),
            epsilon: T::lit(1e-8),
            step: 0,
            m: shapes.iter().map(|&n| vec![T::zero(); n]).collect(),
            v: shapes.iter().map(|&n| vec![T::zero(); n]).collect(),
        }
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    pub fn step(&mut self, params: &mut [&mut Vec<T>], grads: &[Vec<T>]) {
        self.step += 1;
        let t = self.step as i32;
        let bc1 = T::one() - self.beta1.powi(t);
        let bc2 = T::one() - self.beta2.powi(t);
        for (k, (p, g)) in params.iter_mut().zip(grads).enumerate() {
            let (m, v) = (&mut self.m[k], &mut self.v[k]);
            for i in 0..p.len() {
                m[i] = self.beta1 * m[i] + (T::one() - self.beta1) * g[i];
                v[i] = self.beta2 * v[i] + (T::one() - self.beta2) * g[i] * g[i];
                let mh = m[i] / bc1;
                let vh = v[i] / bc2;
                p[i] -= self.learning_rate * mh / (vh.sqrt() + self.epsilon);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn norm_five_scaled_by_fifth() {
        let mut g: Vec<Vec<f64>> = vec![vec![3.0, 0.0], vec![4.0]];
        let n = clip_global_norm(&mut g, 1.0);
        assert_eq!(n, 5.0);
        assert!((g[0][0] - 0.6).abs() < 1e-15 && (g[1][0] - 0.8).abs() < 1e-15);
    }

    #[test]
    fn small_gradients_untouched() {
        let mut g = vec![vec![0.3, 0.4]];
        clip_global_norm(&mut g, 1.0);
        assert_eq!(g[0], [0.3, 0.4]);
    }

    #[test]
    fn zero_rate_leaves_params() {
        let mut w = vec![1.0, -2.0];
        let mut adam = Adam::new(0.0, &[2]);
        adam.step(&mut [&mut w], &[vec![0.5, 0.5]]);
        assert_eq!(w, [1.0, -2.0]);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        // bias-corrected first step is lr * sign(g)
        let mut w = vec![1.0_f64];
        let mut adam = Adam::new(0.1, &[1]);
        adam.step(&mut [&mut w], &[vec![2.0]]);
        assert!((w[0] - 0.9).abs() < 1e-6);
    }

    #[test]
    fn minimizes_quadratic() {
        let mut w = vec![3.0_f64];
        let mut adam = Adam::new(0.05, &[1]);
        for _ in 0..2000 {
            let g = vec![2.0 * w[0]];
            adam.step(&mut [&mut w], &[g]);
        }
        assert!(w[0].abs() < 1e-2);
    }
}
