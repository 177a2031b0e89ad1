//! Central finite-difference checks for tape gradients.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{NodeId, Tape};
use crate::error::Result;

/// `|analytic − numeric| / max(1e-8, |numeric|)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / numeric.abs().max(1e-8)
}

/// Largest relative error between the tape gradient of `f` and central
/// differences with step `eps`, over every coordinate of every input.
///
/// `f` builds a scalar from the given input nodes on a fresh tape.
pub fn grad_check<F>(f: F, inputs: &[Vec<f64>], eps: f64) -> Result<f64>
where
    F: Fn(&mut Tape<f64>, &[NodeId]) -> Result<NodeId>,
{
    let coords: Vec<(usize, usize)> = inputs.iter().enumerate().flat_map(|(i, v)| (0..v.len()).map(move |k| (i, k))).collect();
    check_coords(&f, inputs, eps, &coords)
}

/// Like [`grad_check`] but over at most `max_coords` seeded random coordinates.
pub fn grad_check_sampled<F>(f: F, inputs: &[Vec<f64>], eps: f64, max_coords: usize, seed: u64) -> Result<f64>
where
    F: Fn(&mut Tape<f64>, &[NodeId]) -> Result<NodeId>,
{
    let all: Vec<(usize, usize)> = inputs.iter().enumerate().flat_map(|(i, v)| (0..v.len()).map(move |k| (i, k))).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let picked = sample(&mut rng, all.len(), max_coords.min(all.len()));
    let mut coords: Vec<_> = picked.into_iter().map(|i| all[i]).collect();
    coords.sort_unstable();
    check_coords(&f, inputs, eps, &coords)
}

fn evaluate<F>(f: &F, inputs: &[Vec<f64>]) -> Result<f64>
where
    F: Fn(&mut Tape<f64>, &[NodeId]) -> Result<NodeId>,
{
    let mut tape = Tape::new();
    let ids: Vec<NodeId> = inputs.iter().map(|v| tape.constant(v.clone())).collect();
    let root = f(&mut tape, &ids)?;
    Ok(tape.scalar(root))
}

fn check_coords<F>(f: &F, inputs: &[Vec<f64>], eps: f64, coords: &[(usize, usize)]) -> Result<f64>
where
    F: Fn(&mut Tape<f64>, &[NodeId]) -> Result<NodeId>,
{
    let mut tape = Tape::new();
    let ids: Vec<NodeId> = inputs.iter().map(|v| tape.var(v.clone())).collect();
    let root = f(&mut tape, &ids)?;
    let grads = tape.backward(root)?;
    let analytic: Vec<Vec<f64>> = ids.iter().zip(inputs).map(|(id, v)| grads.get_or_zeros(*id, v.len())).collect();

    let mut worst = 0.0_f64;
    let mut probe = inputs.to_vec();
    for &(i, k) in coords {
        let x0 = probe[i][k];
        probe[i][k] = x0 + eps;
        let up = evaluate(f, &probe)?;
        probe[i][k] = x0 - eps;
        let down = evaluate(f, &probe)?;
        probe[i][k] = x0;
        let numeric = (up - down) / (2.0 * eps);
        worst = worst.max(relative_error(analytic[i][k], numeric));
    }
    Ok(worst)
}
