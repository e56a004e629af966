//! Central-difference gradient checking for small networks.

use crate::error::Result;
use crate::matrix::Matrix;
use crate::nn::network::{DropoutMasks, Gradients, Network};
use crate::optim::loss::Loss;
use crate::rng::Rng;

pub const STEP: f64 = 1e-5;
const FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct TensorError {
    pub name: String,
    pub max_relative_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    /// One entry per trainable tensor; frozen blocks do not appear.
    pub tensors: Vec<TensorError>,
    pub max_relative_error: f64,
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(FLOOR)
}

/// Analytic gradients from one train-mode pass, plus the dropout masks it drew.
pub fn analytic_gradients(
    net: &Network,
    x: &Matrix,
    target: &Matrix,
    loss: Loss,
    rng: &mut Rng,
) -> Result<(Gradients, DropoutMasks)> {
    let mut work = net.clone();
    let (y, cache) = work.forward_train(x, rng)?;
    let l = loss.evaluate(&y, target)?;
    let (_, grads) = net.backward(&cache, &l.grad)?;
    Ok((grads, cache.dropout_masks()))
}

/// Central differences of the train-mode loss with dropout masks held fixed.
pub fn numeric_gradients(
    net: &Network,
    x: &Matrix,
    target: &Matrix,
    loss: Loss,
    masks: &DropoutMasks,
) -> Result<Gradients> {
    let mut work = net.clone();
    let sizes: Vec<usize> = work.params().iter().map(|p| p.len()).collect();
    let mut tensors = Vec::with_capacity(sizes.len());
    let eval = |w: &mut Network| -> Result<f64> {
        let (y, _) = w.forward_replay(x, masks)?;
        Ok(loss.evaluate(&y, target)?.value)
    };
    for (t, &len) in sizes.iter().enumerate() {
        let mut g = Vec::with_capacity(len);
        for e in 0..len {
            let orig = work.params()[t][e];
            work.params_mut()[t][e] = orig + STEP;
            let plus = eval(&mut work)?;
            work.params_mut()[t][e] = orig - STEP;
            let minus = eval(&mut work)?;
            work.params_mut()[t][e] = orig;
            g.push((plus - minus) / (2.0 * STEP));
        }
        tensors.push(g);
    }
    Ok(Gradients { tensors })
}

pub fn compare(names: &[String], analytic: &Gradients, numeric: &Gradients) -> GradCheckReport {
    let tensors: Vec<TensorError> = names
        .iter()
        .zip(analytic.tensors.iter().zip(&numeric.tensors))
        .map(|(name, (a, n))| TensorError {
            name: name.clone(),
            max_relative_error: a
                .iter()
                .zip(n)
                .map(|(&a, &n)| relative_error(a, n))
                .fold(0.0, f64::max),
        })
        .collect();
    let max_relative_error = tensors.iter().map(|t| t.max_relative_error).fold(0.0, f64::max);
    GradCheckReport {
        tensors,
        max_relative_error,
    }
}

/// Largest relative error between backprop and finite differences over all
/// trainable parameters of `net`.
pub fn grad_check(
    net: &Network,
    x: &Matrix,
    target: &Matrix,
    loss: Loss,
    rng: &mut Rng,
) -> Result<GradCheckReport> {
    let (analytic, masks) = analytic_gradients(net, x, target, loss, rng)?;
    let numeric = numeric_gradients(net, x, target, loss, &masks)?;
    Ok(compare(&net.param_names(), &analytic, &numeric))
}
