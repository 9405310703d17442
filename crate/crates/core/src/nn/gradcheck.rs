//! Finite-difference verification of analytic gradients.

use rand::seq::SliceRandom;

use super::loss::{self, KlDirection};
use super::{Mode, Network};
use crate::rng;

/// Loss under which gradients are checked.
#[derive(Debug, Clone)]
pub enum LossSpec {
    CrossEntropy,
    /// (1 - alpha) * CE + alpha * KL against the per-sample soft targets.
    Distill { alpha: f64, direction: KlDirection },
}

/// A small labeled batch for gradient checking.
pub struct CheckBatch<'a> {
    pub inputs: &'a [Vec<f64>],
    pub onehot: &'a [[f64; 2]],
    /// Soft targets, required by `LossSpec::Distill`.
    pub soft: Option<&'a [[f64; 2]]>,
}

fn batch_loss(net: &Network, batch: &CheckBatch, spec: &LossSpec) -> f64 {
    let b = batch.inputs.len() as f64;
    let mut total = 0.0;
    for (i, input) in batch.inputs.iter().enumerate() {
        let probs = net.infer(input);
        total += match spec {
            LossSpec::CrossEntropy => loss::sample_ce(&probs, &batch.onehot[i]),
            LossSpec::Distill { alpha, direction } => {
                let soft = &batch.soft.expect("distill check needs soft targets")[i];
                (1.0 - alpha) * loss::sample_ce(&probs, &batch.onehot[i])
                    + alpha * loss::sample_kl(&probs, soft, *direction)
            }
        };
    }
    total / b
}

fn analytic_grads(net: &Network, batch: &CheckBatch, spec: &LossSpec) -> Vec<f64> {
    let mut grads = vec![0.0; net.params().len()];
    let scale = 1.0 / batch.inputs.len() as f64;
    for (i, input) in batch.inputs.iter().enumerate() {
        let (probs, cache) = net.forward_sample(input, &mut Mode::Eval);
        let mut dprobs = vec![0.0; probs.len()];
        match spec {
            LossSpec::CrossEntropy => {
                loss::sample_ce_grad(&probs, &batch.onehot[i], scale, &mut dprobs);
            }
            LossSpec::Distill { alpha, direction } => {
                let soft = &batch.soft.expect("distill check needs soft targets")[i];
                loss::sample_ce_grad(&probs, &batch.onehot[i], (1.0 - alpha) * scale, &mut dprobs);
                loss::sample_kl_grad(&probs, soft, *direction, alpha * scale, &mut dprobs);
            }
        }
        net.backward_sample(&cache, &dprobs, &mut grads, false);
    }
    grads
}

/// Compare analytic gradients against central finite differences on a seeded
/// random subset of parameter coordinates; returns the worst relative error.
pub fn grad_check(
    net: &mut Network,
    batch: &CheckBatch,
    spec: &LossSpec,
    n_coords: usize,
    seed: u64,
) -> f64 {
    const H: f64 = 1e-5;
    let analytic = analytic_grads(net, batch, spec);
    let n = net.params().len();
    let mut coords: Vec<usize> = (0..n).collect();
    coords.shuffle(&mut rng::stream(seed, &[rng::tag("grad-check")]));
    coords.truncate(n_coords.min(n));

    let mut worst = 0.0f64;
    for &c in &coords {
        let orig = net.params()[c];
        net.params_mut()[c] = orig + H;
        let up = batch_loss(net, batch, spec);
        net.params_mut()[c] = orig - H;
        let down = batch_loss(net, batch, spec);
        net.params_mut()[c] = orig;
        let numeric = (up - down) / (2.0 * H);
        let a = analytic[c];
        let diff = (a - numeric).abs();
        // absolute floor absorbs finite-difference noise on dead coordinates
        let rel = if diff < 1e-9 {
            0.0
        } else {
            diff / a.abs().max(numeric.abs())
        };
        worst = worst.max(rel);
    }
    worst
}
