//! Batch normalization over the channel axis.
//!
//! Train mode standardizes with batch statistics (mean and biased variance
//! over the batch and spatial axes) and folds them into the running
//! statistics; eval mode standardizes with the running statistics. The
//! backward pass in train mode differentiates through the batch statistics.

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::ops::Mode;
use crate::tensor::Tensor;

/// Per-layer running statistics, carried outside the graph and checkpointed.
#[derive(Debug, Clone, PartialEq)]
pub struct BnState {
    pub running_mean: Vec<f64>,
    pub running_var: Vec<f64>,
    pub momentum: f64,
    pub eps: f64,
}

impl BnState {
    pub fn new(channels: usize) -> Self {
        BnState {
            running_mean: vec![0.0; channels],
            running_var: vec![1.0; channels],
            momentum: 0.9,
            eps: 1e-5,
        }
    }
}

/// input [N,C,...], gamma [C], beta [C] -> same shape as input.
pub fn batch_norm(
    g: &mut Graph,
    input: &Tensor,
    gamma: &Tensor,
    beta: &Tensor,
    mode: Mode,
    state: &mut BnState,
) -> Result<Tensor> {
    let shape = input.shape().to_vec();
    if shape.len() < 2 {
        return Err(Error::dimension(
            "batch_norm",
            format!("expected rank >= 2 (N,C,...), got {:?}", shape),
        ));
    }
    let batch = shape[0];
    let channels = shape[1];
    let spatial: usize = shape[2..].iter().product();
    if gamma.shape() != [channels] || beta.shape() != [channels] {
        return Err(Error::dimension(
            "batch_norm",
            format!(
                "channel axis: input has C={channels}, gamma {:?}, beta {:?}",
                gamma.shape(),
                beta.shape()
            ),
        ));
    }
    if state.running_mean.len() != channels {
        return Err(Error::dimension(
            "batch_norm",
            format!("state channels {} != input C={channels}", state.running_mean.len()),
        ));
    }
    if mode == Mode::Train && batch < 2 {
        return Err(Error::BatchSize { op: "batch_norm", required: 2, got: batch });
    }

    let m = (batch * spatial) as f64;
    let x = input.data();
    let (mean, var) = match mode {
        Mode::Train => {
            let mut mean = vec![0.0; channels];
            let mut var = vec![0.0; channels];
            for n in 0..batch {
                for c in 0..channels {
                    let base = (n * channels + c) * spatial;
                    mean[c] += x[base..base + spatial].iter().sum::<f64>();
                }
            }
            for mc in &mut mean {
                *mc /= m;
            }
            for n in 0..batch {
                for c in 0..channels {
                    let base = (n * channels + c) * spatial;
                    let mu = mean[c];
                    var[c] += x[base..base + spatial].iter().map(|&v| (v - mu) * (v - mu)).sum::<f64>();
                }
            }
            for vc in &mut var {
                *vc /= m;
            }
            for c in 0..channels {
                state.running_mean[c] =
                    state.momentum * state.running_mean[c] + (1.0 - state.momentum) * mean[c];
                state.running_var[c] =
                    state.momentum * state.running_var[c] + (1.0 - state.momentum) * var[c];
            }
            (mean, var)
        }
        Mode::Eval => (state.running_mean.clone(), state.running_var.clone()),
    };

    let inv_std: Vec<f64> = var.iter().map(|&v| 1.0 / (v + state.eps).sqrt()).collect();
    let gamma_d = gamma.data();
    let beta_d = beta.data();
    let mut xhat = vec![0.0; x.len()];
    let mut out = vec![0.0; x.len()];
    for n in 0..batch {
        for c in 0..channels {
            let base = (n * channels + c) * spatial;
            let (mu, istd, ga, be) = (mean[c], inv_std[c], gamma_d[c], beta_d[c]);
            for s in 0..spatial {
                let h = (x[base + s] - mu) * istd;
                xhat[base + s] = h;
                out[base + s] = ga * h + be;
            }
        }
    }
    drop(x);
    drop(gamma_d);
    drop(beta_d);

    let requires = input.requires_grad() || gamma.requires_grad() || beta.requires_grad();
    let y = Tensor::intermediate(&shape, out, g.wants_grad(requires));

    if g.wants_grad(requires) {
        let xc = input.clone();
        let gc = gamma.clone();
        let bc = beta.clone();
        let yc = y.clone();
        g.push(move || {
            let gy = yc.grad_ref();
            let Some(gy) = gy.as_ref() else { return };

            // Per-channel reductions of dy and dy*xhat.
            let mut sum_dy = vec![0.0; channels];
            let mut sum_dy_xhat = vec![0.0; channels];
            for n in 0..batch {
                for c in 0..channels {
                    let base = (n * channels + c) * spatial;
                    for s in 0..spatial {
                        sum_dy[c] += gy[base + s];
                        sum_dy_xhat[c] += gy[base + s] * xhat[base + s];
                    }
                }
            }

            if bc.requires_grad() {
                bc.accumulate_grad(&sum_dy);
            }
            if gc.requires_grad() {
                gc.accumulate_grad(&sum_dy_xhat);
            }

            if xc.requires_grad() {
                let gamma_d = gc.data();
                let mut dx = vec![0.0; batch * channels * spatial];
                match mode {
                    Mode::Train => {
                        for n in 0..batch {
                            for c in 0..channels {
                                let base = (n * channels + c) * spatial;
                                let scale = gamma_d[c] * inv_std[c];
                                let mean_dy = sum_dy[c] / m;
                                let mean_dy_xhat = sum_dy_xhat[c] / m;
                                for s in 0..spatial {
                                    dx[base + s] = scale
                                        * (gy[base + s] - mean_dy - xhat[base + s] * mean_dy_xhat);
                                }
                            }
                        }
                    }
                    Mode::Eval => {
                        for n in 0..batch {
                            for c in 0..channels {
                                let base = (n * channels + c) * spatial;
                                let scale = gamma_d[c] * inv_std[c];
                                for s in 0..spatial {
                                    dx[base + s] = scale * gy[base + s];
                                }
                            }
                        }
                    }
                }
                drop(gamma_d);
                xc.accumulate_grad(&dx);
            }
        });
    }
    Ok(y)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stats_per_channel(data: &[f64], shape: &[usize]) -> Vec<(f64, f64)> {
        let (n, c) = (shape[0], shape[1]);
        let spatial: usize = shape[2..].iter().product();
        let m = (n * spatial) as f64;
        (0..c)
            .map(|ch| {
                let mut vals = Vec::new();
                for b in 0..n {
                    let base = (b * c + ch) * spatial;
                    vals.extend_from_slice(&data[base..base + spatial]);
                }
                let mu = vals.iter().sum::<f64>() / m;
                let var = vals.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / m;
                (mu, var)
            })
            .collect()
    }

    #[test]
    fn standardizes_each_channel() {
        let mut g = Graph::inference();
        let shape = [4, 3, 2, 2];
        let data: Vec<f64> = (0..48).map(|i| (i as f64) * 0.37 - 3.0).collect();
        let x = Tensor::from_vec(&shape, data);
        let gamma = Tensor::from_vec(&[3], vec![1.0; 3]);
        let beta = Tensor::zeros(&[3]);
        let mut state = BnState::new(3);
        let y = batch_norm(&mut g, &x, &gamma, &beta, Mode::Train, &mut state).unwrap();
        for (mu, var) in stats_per_channel(&y.data(), &shape) {
            assert!(mu.abs() < 1e-10, "mean {mu}");
            assert!((var - 1.0).abs() < 1e-4, "var {var}"); // epsilon shifts it slightly
        }
    }

    #[test]
    fn zero_gamma_broadcasts_beta() {
        let mut g = Graph::inference();
        let x = Tensor::from_vec(&[2, 2, 2], vec![5.0, -1.0, 2.0, 0.0, 3.0, 3.0, 7.0, -2.0]);
        let gamma = Tensor::zeros(&[2]);
        let beta = Tensor::from_vec(&[2], vec![0.25, -0.75]);
        let mut state = BnState::new(2);
        let y = batch_norm(&mut g, &x, &gamma, &beta, Mode::Train, &mut state).unwrap();
        let yd = y.data();
        for n in 0..2 {
            for s in 0..2 {
                assert_eq!(yd[(n * 2) * 2 + s], 0.25);
                assert_eq!(yd[(n * 2 + 1) * 2 + s], -0.75);
            }
        }
    }

    #[test]
    fn constant_channel_maps_to_zero() {
        let mut g = Graph::inference();
        let x = Tensor::from_vec(&[3, 1, 2], vec![4.2; 6]);
        let gamma = Tensor::from_vec(&[1], vec![1.0]);
        let beta = Tensor::zeros(&[1]);
        let mut state = BnState::new(1);
        let y = batch_norm(&mut g, &x, &gamma, &beta, Mode::Train, &mut state).unwrap();
        for &v in y.data().iter() {
            assert!(v.abs() < 1e-9, "{v}");
        }
    }

    #[test]
    fn train_mode_needs_batch_of_two() {
        let mut g = Graph::new();
        let x = Tensor::from_vec(&[1, 2, 2], vec![1.0; 4]);
        let gamma = Tensor::from_vec(&[2], vec![1.0; 2]);
        let beta = Tensor::zeros(&[2]);
        let mut state = BnState::new(2);
        let err = batch_norm(&mut g, &x, &gamma, &beta, Mode::Train, &mut state).unwrap_err();
        assert!(matches!(err, Error::BatchSize { .. }));
        // eval mode is fine with a single element
        assert!(batch_norm(&mut g, &x, &gamma, &beta, Mode::Eval, &mut state).is_ok());
    }

    #[test]
    fn running_stats_move_toward_batch_stats() {
        let mut g = Graph::inference();
        let x = Tensor::from_vec(&[2, 1, 2], vec![10.0, 10.0, 10.0, 10.0]);
        let gamma = Tensor::from_vec(&[1], vec![1.0]);
        let beta = Tensor::zeros(&[1]);
        let mut state = BnState::new(1);
        for _ in 0..100 {
            batch_norm(&mut g, &x, &gamma, &beta, Mode::Train, &mut state).unwrap();
        }
        assert!((state.running_mean[0] - 10.0).abs() < 1e-2);
        assert!(state.running_var[0].abs() < 1e-2);
    }
}
