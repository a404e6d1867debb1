//! Differentiable tensor operations.
//!
//! Each op computes its forward result eagerly and, when the graph is
//! recording and an input requires gradients, pushes one backward closure
//! onto the graph. Backward closures read the output's accumulated gradient
//! and add contributions into the inputs' gradients.

mod activation;
mod batchnorm;
mod conv;
mod dense;
mod shape;

pub use activation::{dropout, relu, sigmoid, sigmoid_scalar};
pub use batchnorm::{batch_norm, BnState};
pub use conv::{conv2d, conv_output_side};
pub use dense::fully_connected;
pub use shape::{concat, flatten, reshape, select_per_row};

use crate::graph::Graph;
use crate::tensor::Tensor;

/// Forward-pass mode: governs batch-norm statistics and dropout.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Sum of all elements, as a scalar.
pub fn sum_all(g: &mut Graph, x: &Tensor) -> Tensor {
    let total: f64 = x.data().iter().sum();
    let requires = x.requires_grad();
    let y = Tensor::intermediate(&[1], vec![total], g.wants_grad(requires));
    if g.wants_grad(requires) {
        let xc = x.clone();
        let yc = y.clone();
        g.push(move || {
            let gy = yc.grad_ref();
            let Some(gy) = gy.as_ref() else { return };
            let dx = vec![gy[0]; xc.numel()];

            xc.accumulate_grad(&dx);
        });
    }
    y
}

/// Elementwise square.
pub fn square(g: &mut Graph, x: &Tensor) -> Tensor {
    let out: Vec<f64> = x.data().iter().map(|&v| v * v).collect();
    let requires = x.requires_grad();
    let y = Tensor::intermediate(x.shape(), out, g.wants_grad(requires));
    if g.wants_grad(requires) {
        let xc = x.clone();
        let yc = y.clone();
        g.push(move || {
            let gy = yc.grad_ref();
            let Some(gy) = gy.as_ref() else { return };
            let xd = xc.data();
            let dx: Vec<f64> = xd.iter().zip(gy.iter()).map(|(&xv, &gv)| 2.0 * xv * gv).collect();
            drop(xd);

            xc.accumulate_grad(&dx);
        });
    }
    y
}
