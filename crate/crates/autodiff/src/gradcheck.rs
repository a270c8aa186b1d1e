//! Central finite-difference gradient checks.

use crate::error::{AutodiffError, Result};
use crate::graph::Graph;
use crate::tensor::{NodeId, Tensor};

/// `|a - n| / max(|a|, |n|, 1e-8)`, maximised over every entry.
pub fn max_relative_error(analytic: &[Vec<f64>], numeric: &[Vec<f64>]) -> f64 {
    analytic
        .iter()
        .zip(numeric)
        .flat_map(|(a, n)| a.iter().zip(n))
        .map(|(&a, &n)| (a - n).abs() / a.abs().max(n.abs()).max(1e-8))
        .fold(0.0, f64::max)
}

/// Central differences of `value_fn` with respect to every entry of every
/// parameter.
pub fn numeric_gradient<F>(mut value_fn: F, params: &[Tensor], h: f64) -> Result<Vec<Vec<f64>>>
where
    F: FnMut(&[Tensor]) -> Result<f64>,
{
    if !(h > 0.0) {
        return Err(AutodiffError::InvalidArgument(format!("step h = {h} must be > 0")));
    }
    let mut work = params.to_vec();
    let mut out = Vec::with_capacity(params.len());
    for p in 0..params.len() {
        let mut grads = Vec::with_capacity(params[p].len());
        for i in 0..params[p].len() {
            let orig = work[p].values()[i];
            work[p].values_mut()[i] = orig + h;
            let plus = value_fn(&work)?;
            work[p].values_mut()[i] = orig - h;
            let minus = value_fn(&work)?;
            work[p].values_mut()[i] = orig;
            if !plus.is_finite() || !minus.is_finite() {
                return Err(AutodiffError::NonFinite {
                    context: format!("loss at perturbed parameter {p}[{i}]"),
                });
            }
            grads.push((plus - minus) / (2.0 * h));
        }
        out.push(grads);
    }
    Ok(out)
}

/// Analytic gradients of the loss built by `loss_fn` for every parameter.
pub fn analytic_gradient<F>(loss_fn: &F, params: &[Tensor]) -> Result<Vec<Vec<f64>>>
where
    F: Fn(&mut Graph, &[NodeId]) -> Result<NodeId>,
{
    let mut g = Graph::new();
    let ids = params
        .iter()
        .map(|p| g.insert(p.clone().with_requires_grad(true)))
        .collect::<Result<Vec<_>>>()?;
    let loss = loss_fn(&mut g, &ids)?;
    g.backward(loss)?;
    ids.iter().map(|&id| Ok(g.grad(id)?.to_vec())).collect()
}

/// Compares backward-pass gradients against central finite differences.
/// `loss_fn` builds a scalar loss on a fresh graph from the parameter nodes.
pub fn finite_diff_check<F>(loss_fn: F, params: &[Tensor], h: f64) -> Result<f64>
where
    F: Fn(&mut Graph, &[NodeId]) -> Result<NodeId>,
{
    if !(h > 0.0) {
        return Err(AutodiffError::InvalidArgument(format!("step h = {h} must be > 0")));
    }
    let analytic = analytic_gradient(&loss_fn, params)?;
    let numeric = numeric_gradient(
        |ps| {
            let mut g = Graph::new();
            let ids = ps
                .iter()
                .map(|p| g.insert(p.clone()))
                .collect::<Result<Vec<_>>>()?;
            let loss = loss_fn(&mut g, &ids)?;
            g.item(loss)
        },
        params,
        h,
    )?;
    Ok(max_relative_error(&analytic, &numeric))
}
