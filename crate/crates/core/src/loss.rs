//! Task losses, each a scalar mean over the batch.
//!
//! Grasp: binary cross entropy on the logit of the attempted angle only, in
//! the log-sum-exp form that cannot overflow. The other 17 logits of each
//! element receive exactly zero gradient. Push and poke: squared Euclidean
//! norm of the prediction error, averaged over the batch.

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::ops::{self, sigmoid_scalar};
use crate::tensor::Tensor;

fn stable_bce(logit: f64, target: f64) -> f64 {
    logit.max(0.0) - logit * target + (-logit.abs()).exp().ln_1p()
}

/// Mean binary cross entropy between selected logits [N] and targets [N].
fn bce_with_logits_mean(g: &mut Graph, logits: &Tensor, targets: &[f64]) -> Tensor {
    let z = logits.data();
    let n = z.len();
    let total: f64 = z.iter().zip(targets).map(|(&zi, &yi)| stable_bce(zi, yi)).sum();
    let loss_val = total / n as f64;
    drop(z);

    let requires = logits.requires_grad();
    let y = Tensor::intermediate(&[1], vec![loss_val], g.wants_grad(requires));
    if g.wants_grad(requires) {
        let zc = logits.clone();
        let yc = y.clone();
        let targets = targets.to_vec();
        g.push(move || {
            let gy = yc.grad_ref();
            let Some(gy) = gy.as_ref() else { return };
            let scale = gy[0] / n as f64;
            let z = zc.data();
            let dz: Vec<f64> = z
                .iter()
                .zip(targets.iter())
                .map(|(&zi, &yi)| (sigmoid_scalar(zi) - yi) * scale)
                .collect();
            drop(z);
            zc.accumulate_grad(&dz);
        });
    }
    y
}

/// Binary cross entropy over the attempted grasp angle of each element.
///
/// logits [N,18], theta[i] in 0..18 picks the attempted angle, y[i] in {0,1}.
pub fn grasp_loss(g: &mut Graph, logits: &Tensor, theta: &[usize], y: &[f64]) -> Result<Tensor> {
    let shape = logits.shape();
    if shape.len() != 2 {
        return Err(Error::dimension(
            "grasp_loss",
            format!("expected [N,angles] logits, got {shape:?}"),
        ));
    }
    let n = shape[0];
    if n == 0 {
        return Err(Error::contract("grasp_loss", "empty batch"));
    }
    if y.len() != n {
        return Err(Error::dimension(
            "grasp_loss",
            format!("batch axis: {} labels for {n} rows", y.len()),
        ));
    }
    for (i, &yi) in y.iter().enumerate() {
        if yi != 0.0 && yi != 1.0 {
            return Err(Error::contract("grasp_loss", format!("label {yi} at row {i} not binary")));
        }
    }
    let attempted = ops::select_per_row(g, logits, theta)?;
    Ok(bce_with_logits_mean(g, &attempted, y))
}

fn squared_error_mean(
    op: &'static str,
    g: &mut Graph,
    pred: &Tensor,
    target: &Tensor,
) -> Result<Tensor> {
    if pred.shape() != target.shape() {
        return Err(Error::dimension(
            op,
            format!("prediction {:?} vs target {:?}", pred.shape(), target.shape()),
        ));
    }
    let shape = pred.shape();
    if shape.len() != 2 || shape[0] == 0 {
        return Err(Error::contract(op, format!("expected nonempty [N,D], got {shape:?}")));
    }
    let n = shape[0];

    let p = pred.data();
    let t = target.data();
    let total: f64 = p.iter().zip(t.iter()).map(|(&a, &b)| (a - b) * (a - b)).sum();
    let loss_val = total / n as f64;
    drop(p);
    drop(t);

    let requires = pred.requires_grad();
    let y = Tensor::intermediate(&[1], vec![loss_val], g.wants_grad(requires));
    if g.wants_grad(requires) {
        let pc = pred.clone();
        let tc = target.clone();
        let yc = y.clone();
        g.push(move || {
            let gy = yc.grad_ref();
            let Some(gy) = gy.as_ref() else { return };
            let scale = 2.0 * gy[0] / n as f64;
            let p = pc.data();
            let t = tc.data();
            let dp: Vec<f64> = p.iter().zip(t.iter()).map(|(&a, &b)| (a - b) * scale).collect();
            drop(p);
            drop(t);
            pc.accumulate_grad(&dp);
        });
    }
    Ok(y)
}

/// Mean over the batch of the squared L2 norm of the 5-component action error.
pub fn push_loss(g: &mut Graph, pred: &Tensor, target: &Tensor) -> Result<Tensor> {
    squared_error_mean("push_loss", g, pred, target)
}

/// Mean over the batch of the squared L2 norm of the 2-component response error.
pub fn poke_loss(g: &mut Graph, pred: &Tensor, target: &Tensor) -> Result<Tensor> {
    squared_error_mean("poke_loss", g, pred, target)
}
