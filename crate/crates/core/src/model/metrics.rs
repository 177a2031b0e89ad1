//! Sequence loss and target-level R².

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::tasks::Task;

/// `Σ(y−t)² / Σ(t−t̄)²`, the complement of R² over a sequence.
pub fn loss_ls<T: Real>(predicted: &[T], observed: &[T]) -> Result<T> {
    if predicted.len() != observed.len() {
        return Err(Error::LengthMismatch(predicted.len(), observed.len()));
    }
    if observed.len() < 2 {
        return Err(Error::TooFewValues { needed: 2, got: observed.len() });
    }
    let n = T::lit(observed.len() as f64);
    let mean = observed.iter().copied().sum::<T>() / n;
    let den: T = observed.iter().map(|&t| (t - mean) * (t - mean)).sum();
    if den == T::zero() {
        return Err(Error::ZeroVariance);
    }
    let num: T = predicted.iter().zip(observed).map(|(&y, &t)| (y - t) * (y - t)).sum();
    Ok(num / den)
}

/// Denominator of [`loss_ls`]: total squared deviation of the observations.
pub fn observed_spread(observed: &[f64]) -> Result<f64> {
    if observed.len() < 2 {
        return Err(Error::TooFewValues { needed: 2, got: observed.len() });
    }
    let mean = observed.iter().sum::<f64>() / observed.len() as f64;
    let den: f64 = observed.iter().map(|t| (t - mean).powi(2)).sum();
    if den == 0.0 {
        Err(Error::ZeroVariance)
    } else {
        Ok(den)
    }
}

/// R² over per-(target, trial) group means.
///
/// Tasks are grouped by the id of their final target and their trial index;
/// predicted and observed values are averaged within each group.
pub fn target_level_r2(predicted: &[f64], observed: &[f64], tasks: &[Task]) -> Result<f64> {
    if predicted.len() != observed.len() {
        return Err(Error::LengthMismatch(predicted.len(), observed.len()));
    }
    if tasks.len() != observed.len() {
        return Err(Error::LengthMismatch(tasks.len(), observed.len()));
    }
    let mut groups: BTreeMap<(&str, u32), (f64, f64, usize)> = BTreeMap::new();
    for ((task, &p), &o) in tasks.iter().zip(predicted).zip(observed) {
        let g = groups.entry((task.target_id(), task.trial_index)).or_default();
        g.0 += p;
        g.1 += o;
        g.2 += 1;
    }
    if groups.len() < 2 {
        return Err(Error::TooFewValues { needed: 2, got: groups.len() });
    }
    let (p, o): (Vec<f64>, Vec<f64>) = groups.values().map(|&(p, o, n)| (p / n as f64, o / n as f64)).unzip();
    Ok(1.0 - loss_ls(&p, &o)?)
}
