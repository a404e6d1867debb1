//! 2D convolution via im2col and a dense matrix product.
//!
//! The unrolled patch matrix is built once per forward call and kept alive
//! for the backward pass, where it feeds both the weight gradient and (when
//! the input needs gradients) the col2im scatter for the input gradient.
//! A quadruple-loop reference implementation lives in the test suite and the
//! two must agree elementwise.

use std::rc::Rc;

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::tensor::Tensor;

/// Output side length for one spatial axis, checking the geometry.
pub fn conv_output_side(input: usize, kernel: usize, stride: usize, pad: usize) -> Result<usize> {
    let padded = input + 2 * pad;
    if padded < kernel {
        return Err(Error::geometry(
            "conv2d",
            format!("padded input side {padded} smaller than kernel {kernel}"),
        ));
    }
    if stride == 0 {
        return Err(Error::geometry("conv2d", "stride must be positive"));
    }
    if (padded - kernel) % stride != 0 {
        return Err(Error::geometry(
            "conv2d",
            format!("side {input} with pad {pad}, kernel {kernel} not divisible by stride {stride}"),
        ));
    }
    Ok((padded - kernel) / stride + 1)
}

struct ConvGeom {
    batch: usize,
    in_ch: usize,
    in_h: usize,
    in_w: usize,
    out_ch: usize,
    kh: usize,
    kw: usize,
    out_h: usize,
    out_w: usize,
    stride: usize,
    pad: usize,
}

impl ConvGeom {
    fn patch_len(&self) -> usize {
        self.in_ch * self.kh * self.kw
    }

    fn out_positions(&self) -> usize {
        self.out_h * self.out_w
    }
}

fn check_geometry(
    input: &Tensor,
    weight: &Tensor,
    bias: &Tensor,
    stride: usize,
    pad: usize,
) -> Result<ConvGeom> {
    let ishape = input.shape();
    let wshape = weight.shape();
    if ishape.len() != 4 {
        return Err(Error::dimension(
            "conv2d",
            format!("input axis count: expected 4 (N,C,H,W), got {:?}", ishape),
        ));
    }
    if wshape.len() != 4 {
        return Err(Error::dimension(
            "conv2d",
            format!("weight axis count: expected 4 (K,C,kh,kw), got {:?}", wshape),
        ));
    }
    let (batch, in_ch, in_h, in_w) = (ishape[0], ishape[1], ishape[2], ishape[3]);
    let (out_ch, w_ch, kh, kw) = (wshape[0], wshape[1], wshape[2], wshape[3]);
    if in_ch != w_ch {
        return Err(Error::dimension(
            "conv2d",
            format!("channel axis: input has C={in_ch} but weight expects C={w_ch}"),
        ));
    }
    if bias.shape() != [out_ch] {
        return Err(Error::dimension(
            "conv2d",
            format!("bias axis: expected [{out_ch}], got {:?}", bias.shape()),
        ));
    }
    let out_h = conv_output_side(in_h, kh, stride, pad)?;
    let out_w = conv_output_side(in_w, kw, stride, pad)?;
    Ok(ConvGeom { batch, in_ch, in_h, in_w, out_ch, kh, kw, out_h, out_w, stride, pad })
}

/// Unroll one sample into a [patch_len, out_positions] row-major matrix.
fn im2col_sample(x: &[f64], g: &ConvGeom, cols: &mut [f64]) {
    let positions = g.out_positions();
    let mut row = 0;
    for c in 0..g.in_ch {
        let plane = &x[c * g.in_h * g.in_w..(c + 1) * g.in_h * g.in_w];
        for u in 0..g.kh {
            for v in 0..g.kw {
                let dst = &mut cols[row * positions..(row + 1) * positions];
                let mut idx = 0;
                for i in 0..g.out_h {
                    let src_i = (i * g.stride + u) as isize - g.pad as isize;
                    if src_i < 0 || src_i >= g.in_h as isize {
                        dst[idx..idx + g.out_w].fill(0.0);
                        idx += g.out_w;
                        continue;
                    }
                    let row_base = src_i as usize * g.in_w;
                    for j in 0..g.out_w {
                        let src_j = (j * g.stride + v) as isize - g.pad as isize;
                        dst[idx] = if src_j < 0 || src_j >= g.in_w as isize {
                            0.0
                        } else {
                            plane[row_base + src_j as usize]
                        };
                        idx += 1;
                    }
                }
                row += 1;
            }
        }
    }
}

/// Scatter a [patch_len, out_positions] gradient matrix back onto one sample.
fn col2im_sample(dcols: &[f64], g: &ConvGeom, dx: &mut [f64]) {
    let positions = g.out_positions();
    let mut row = 0;
    for c in 0..g.in_ch {
        let plane_base = c * g.in_h * g.in_w;
        for u in 0..g.kh {
            for v in 0..g.kw {
                let src = &dcols[row * positions..(row + 1) * positions];
                let mut idx = 0;
                for i in 0..g.out_h {
                    let dst_i = (i * g.stride + u) as isize - g.pad as isize;
                    if dst_i < 0 || dst_i >= g.in_h as isize {
                        idx += g.out_w;
                        continue;
                    }
                    let row_base = plane_base + dst_i as usize * g.in_w;
                    for j in 0..g.out_w {
                        let dst_j = (j * g.stride + v) as isize - g.pad as isize;
                        if dst_j >= 0 && (dst_j as usize) < g.in_w {
                            dx[row_base + dst_j as usize] += src[idx];
                        }
                        idx += 1;
                    }
                }
                row += 1;
            }
        }
    }
}

fn dgemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    rsa: isize,
    csa: isize,
    b: &[f64],
    rsb: isize,
    csb: isize,
    beta: f64,
    c: &mut [f64],
) {
    debug_assert!(c.len() >= m * n);
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// Strided 2D convolution with zero padding.
///
/// input [N,C,H,W], weight [K,C,kh,kw], bias [K] -> [N,K,H',W'] where
/// H' = (H + 2·pad − kh)/stride + 1 and likewise for W'.
pub fn conv2d(
    g: &mut Graph,
    input: &Tensor,
    weight: &Tensor,
    bias: &Tensor,
    stride: usize,
    pad: usize,
) -> Result<Tensor> {
    let geom = check_geometry(input, weight, bias, stride, pad)?;
    let patch_len = geom.patch_len();
    let positions = geom.out_positions();
    let sample_in = geom.in_ch * geom.in_h * geom.in_w;
    let sample_out = geom.out_ch * positions;

    let mut cols = vec![0.0; geom.batch * patch_len * positions];
    let mut out = vec![0.0; geom.batch * sample_out];
    {
        let x = input.data();
        let w = weight.data();
        let b = bias.data();
        for n in 0..geom.batch {
            let col_n = &mut cols[n * patch_len * positions..(n + 1) * patch_len * positions];
            im2col_sample(&x[n * sample_in..(n + 1) * sample_in], &geom, col_n);
            let out_n = &mut out[n * sample_out..(n + 1) * sample_out];
            dgemm(
                geom.out_ch,
                patch_len,
                positions,
                &w,
                patch_len as isize,
                1,
                col_n,
                positions as isize,
                1,
                0.0,
                out_n,
            );
            for kch in 0..geom.out_ch {
                let bk = b[kch];
                for o in &mut out_n[kch * positions..(kch + 1) * positions] {
                    *o += bk;
                }
            }
        }
    }

    let out_shape = [geom.batch, geom.out_ch, geom.out_h, geom.out_w];
    let requires = input.requires_grad() || weight.requires_grad() || bias.requires_grad();
    let y = Tensor::intermediate(&out_shape, out, g.wants_grad(requires));

    if g.wants_grad(requires) {
        let cols = Rc::new(cols);
        let xc = input.clone();
        let wc = weight.clone();
        let bc = bias.clone();
        let yc = y.clone();
        g.push(move || {
            let gy = yc.grad_ref();
            let Some(gy) = gy.as_ref() else { return };

            if bc.requires_grad() {
                let mut db = vec![0.0; geom.out_ch];
                for n in 0..geom.batch {
                    let gy_n = &gy[n * sample_out..(n + 1) * sample_out];
                    for kch in 0..geom.out_ch {
                        db[kch] += gy_n[kch * positions..(kch + 1) * positions].iter().sum::<f64>();
                    }
                }
                bc.accumulate_grad(&db);
            }

            if wc.requires_grad() {
                let mut dw = vec![0.0; geom.out_ch * patch_len];
                for n in 0..geom.batch {
                    let gy_n = &gy[n * sample_out..(n + 1) * sample_out];
                    let col_n = &cols[n * patch_len * positions..(n + 1) * patch_len * positions];
                    // dW += gy_n [K, P] · col_nᵀ [P, patch_len]
                    dgemm(
                        geom.out_ch,
                        positions,
                        patch_len,
                        gy_n,
                        positions as isize,
                        1,
                        col_n,
                        1,
                        positions as isize,
                        1.0,
                        &mut dw,
                    );
                }
                wc.accumulate_grad(&dw);
            }

            if xc.requires_grad() {
                let w = wc.data();
                let mut dx = vec![0.0; geom.batch * sample_in];
                let mut dcols = vec![0.0; patch_len * positions];
                for n in 0..geom.batch {
                    let gy_n = &gy[n * sample_out..(n + 1) * sample_out];
                    // dcols = Wᵀ [patch_len, K] · gy_n [K, P]
                    dgemm(
                        patch_len,
                        geom.out_ch,
                        positions,
                        &w,
                        1,
                        patch_len as isize,
                        gy_n,
                        positions as isize,
                        1,
                        0.0,
                        &mut dcols,
                    );
                    col2im_sample(&dcols, &geom, &mut dx[n * sample_in..(n + 1) * sample_in]);
                }
                drop(w);
                xc.accumulate_grad(&dx);
            }
        });
    }
    Ok(y)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(shape: &[usize], data: Vec<f64>) -> Tensor {
        Tensor::from_vec(shape, data)
    }

    #[test]
    fn zero_input_gives_zero_output() {
        let mut g = Graph::inference();
        let x = t(&[1, 1, 3, 3], vec![0.0; 9]);
        let w = t(&[2, 1, 2, 2], vec![0.5; 8]);
        let b = t(&[2], vec![0.0; 2]);
        let y = conv2d(&mut g, &x, &w, &b, 1, 0).unwrap();
        assert_eq!(y.shape(), &[1, 2, 2, 2]);
        assert!(y.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn one_by_one_kernel_scales() {
        let mut g = Graph::inference();
        let x = t(&[1, 1, 3, 3], vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0]);
        let w = t(&[1, 1, 1, 1], vec![2.0]);
        let b = t(&[1], vec![0.0]);
        let y = conv2d(&mut g, &x, &w, &b, 1, 0).unwrap();
        let expect: Vec<f64> = x.data().iter().map(|v| v * 2.0).collect();
        assert_eq!(*y.data(), expect);
    }

    #[test]
    fn diagonal_kernel_hand_computed() {
        let mut g = Graph::inference();
        let x = t(&[1, 1, 3, 3], vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0]);
        let w = t(&[1, 1, 2, 2], vec![1.0, 0.0, 0.0, 1.0]);
        let b = t(&[1], vec![0.0]);
        let y = conv2d(&mut g, &x, &w, &b, 1, 0).unwrap();
        assert_eq!(y.shape(), &[1, 1, 2, 2]);
        assert_eq!(*y.data(), vec![6.0, 8.0, 12.0, 14.0]);
    }

    #[test]
    fn channel_mismatch_is_dimension_error() {
        let mut g = Graph::inference();
        let x = t(&[1, 3, 4, 4], vec![0.0; 48]);
        let w = t(&[2, 4, 2, 2], vec![0.0; 32]);
        let b = t(&[2], vec![0.0; 2]);
        let err = conv2d(&mut g, &x, &w, &b, 1, 0).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("channel axis"), "{msg}");
    }

    #[test]
    fn non_divisible_stride_is_geometry_error() {
        let mut g = Graph::inference();
        let x = t(&[1, 1, 5, 5], vec![0.0; 25]);
        let w = t(&[1, 1, 2, 2], vec![0.0; 4]);
        let b = t(&[1], vec![0.0]);
        let err = conv2d(&mut g, &x, &w, &b, 2, 0).unwrap_err();
        assert!(matches!(err, Error::Geometry { .. }));
    }

    #[test]
    fn padding_reaches_outside() {
        // 1x1 input, 3x3 kernel, pad 1: each kernel tap sees the single input
        // value once at the center.
        let mut g = Graph::inference();
        let x = t(&[1, 1, 1, 1], vec![3.0]);
        let w = t(&[1, 1, 3, 3], (1..=9).map(f64::from).collect());
        let b = t(&[1], vec![1.0]);
        let y = conv2d(&mut g, &x, &w, &b, 1, 1).unwrap();
        assert_eq!(y.shape(), &[1, 1, 1, 1]);
        // center tap is weight[1,1] = 5 -> 3*5 + bias
        assert_eq!(y.data()[0], 16.0);
    }
}
