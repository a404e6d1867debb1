//! Elementwise nonlinearities and dropout.

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::ops::Mode;
use crate::rng::Rng;
use crate::tensor::Tensor;

pub fn relu(g: &mut Graph, x: &Tensor) -> Tensor {
    let out: Vec<f64> = x.data().iter().map(|&v| v.max(0.0)).collect();
    let requires = x.requires_grad();
    let y = Tensor::intermediate(x.shape(), out, g.wants_grad(requires));
    if g.wants_grad(requires) {
        let xc = x.clone();
        let yc = y.clone();
        g.push(move || {
            let gy = yc.grad_ref();
            let Some(gy) = gy.as_ref() else { return };
            // y > 0 exactly where x > 0; the kink at 0 takes derivative 0.
            let yd = yc.data();
            let dx: Vec<f64> =
                yd.iter().zip(gy.iter()).map(|(&yv, &gv)| if yv > 0.0 { gv } else { 0.0 }).collect();
            drop(yd);

            xc.accumulate_grad(&dx);
        });
    }
    y
}

/// Numerically stable logistic function.
pub fn sigmoid_scalar(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

pub fn sigmoid(g: &mut Graph, x: &Tensor) -> Tensor {
    let out: Vec<f64> = x.data().iter().map(|&v| sigmoid_scalar(v)).collect();
    let requires = x.requires_grad();
    let y = Tensor::intermediate(x.shape(), out, g.wants_grad(requires));
    if g.wants_grad(requires) {
        let xc = x.clone();
        let yc = y.clone();
        g.push(move || {
            let gy = yc.grad_ref();
            let Some(gy) = gy.as_ref() else { return };
            let yd = yc.data();
            let dx: Vec<f64> =
                yd.iter().zip(gy.iter()).map(|(&yv, &gv)| gv * yv * (1.0 - yv)).collect();
            drop(yd);

            xc.accumulate_grad(&dx);
        });
    }
    y
}

/// Inverted dropout: train mode zeroes each element independently with
/// probability `p` and scales survivors by 1/(1-p); eval mode is the
/// identity and draws nothing from the generator.
pub fn dropout(g: &mut Graph, x: &Tensor, p: f64, mode: Mode, rng: &mut Rng) -> Result<Tensor> {
    if !(0.0..1.0).contains(&p) {
        return Err(Error::contract("dropout", format!("probability {p} outside [0,1)")));
    }
    if mode == Mode::Eval {
        let y = Tensor::intermediate(x.shape(), x.to_vec(), g.wants_grad(x.requires_grad()));
        if g.wants_grad(x.requires_grad()) {
            let xc = x.clone();
            let yc = y.clone();
            g.push(move || {
                let gy = yc.grad_ref();
                if let Some(gy) = gy.as_ref() {
                    let dx = gy.clone();

                    xc.accumulate_grad(&dx);
                }
            });
        }
        return Ok(y);
    }

    let keep_scale = 1.0 / (1.0 - p);
    let xd = x.data();
    let mut mult = vec![0.0; xd.len()];
    let mut out = vec![0.0; xd.len()];
    for i in 0..xd.len() {
        if !rng.chance(p) {
            mult[i] = keep_scale;
            out[i] = xd[i] * keep_scale;
        }
    }
    drop(xd);

    let requires = x.requires_grad();
    let y = Tensor::intermediate(x.shape(), out, g.wants_grad(requires));
    if g.wants_grad(requires) {
        let xc = x.clone();
        let yc = y.clone();
        g.push(move || {
            let gy = yc.grad_ref();
            let Some(gy) = gy.as_ref() else { return };
            let dx: Vec<f64> = gy.iter().zip(mult.iter()).map(|(&gv, &mv)| gv * mv).collect();

            xc.accumulate_grad(&dx);
        });
    }
    Ok(y)
}
