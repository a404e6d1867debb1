//! Shape manipulation: reshape/flatten, concatenation, per-row selection.

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::tensor::Tensor;

/// Reinterpret the row-major data under a new shape with equal element count.
pub fn reshape(g: &mut Graph, x: &Tensor, new_shape: &[usize]) -> Result<Tensor> {
    let n_new: usize = new_shape.iter().product();
    if n_new != x.numel() {
        return Err(Error::dimension(
            "reshape",
            format!("cannot view {:?} as {:?}", x.shape(), new_shape),
        ));
    }
    let requires = x.requires_grad();
    let y = Tensor::intermediate(new_shape, x.to_vec(), g.wants_grad(requires));
    if g.wants_grad(requires) {
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
    Ok(y)
}

/// Collapse all axes after the first: [N, ...] -> [N, D].
pub fn flatten(g: &mut Graph, x: &Tensor) -> Result<Tensor> {
    let shape = x.shape();
    if shape.is_empty() {
        return Err(Error::dimension("flatten", "rank-0 tensor"));
    }
    let d: usize = shape[1..].iter().product();
    reshape(g, x, &[shape[0], d])
}

/// Join tensors along `axis`; all other axes must agree.
pub fn concat(g: &mut Graph, xs: &[&Tensor], axis: usize) -> Result<Tensor> {
    if xs.is_empty() {
        return Err(Error::contract("concat", "no inputs"));
    }
    let rank = xs[0].shape().len();
    if axis >= rank {
        return Err(Error::dimension("concat", format!("axis {axis} out of rank {rank}")));
    }
    for (i, x) in xs.iter().enumerate().skip(1) {
        if x.shape().len() != rank {
            return Err(Error::dimension(
                "concat",
                format!("input {i} rank {} != {}", x.shape().len(), rank),
            ));
        }
        for (ax, (&a, &b)) in xs[0].shape().iter().zip(x.shape().iter()).enumerate() {
            if ax != axis && a != b {
                return Err(Error::dimension(
                    "concat",
                    format!("axis {ax}: input 0 has {a}, input {i} has {b}"),
                ));
            }
        }
    }

    let outer: usize = xs[0].shape()[..axis].iter().product();
    let inner: usize = xs[0].shape()[axis + 1..].iter().product();
    let blocks: Vec<usize> = xs.iter().map(|x| x.shape()[axis] * inner).collect();
    let total_block: usize = blocks.iter().sum();

    let mut out_shape = xs[0].shape().to_vec();
    out_shape[axis] = xs.iter().map(|x| x.shape()[axis]).sum();

    let mut out = vec![0.0; outer * total_block];
    for o in 0..outer {
        let mut dst = o * total_block;
        for (x, &blk) in xs.iter().zip(blocks.iter()) {
            let xd = x.data();
            out[dst..dst + blk].copy_from_slice(&xd[o * blk..(o + 1) * blk]);
            dst += blk;
        }
    }

    let requires = xs.iter().any(|x| x.requires_grad());
    let y = Tensor::intermediate(&out_shape, out, g.wants_grad(requires));
    if g.wants_grad(requires) {
        let inputs: Vec<Tensor> = xs.iter().map(|&x| x.clone()).collect();
        let yc = y.clone();
        g.push(move || {
            let gy = yc.grad_ref();
            let Some(gy) = gy.as_ref() else { return };
            let mut offset = 0;
            for (x, &blk) in inputs.iter().zip(blocks.iter()) {
                if x.requires_grad() {
                    let mut dx = vec![0.0; outer * blk];
                    for o in 0..outer {
                        let src = o * total_block + offset;
                        dx[o * blk..(o + 1) * blk].copy_from_slice(&gy[src..src + blk]);
                    }
                    x.accumulate_grad(&dx);
                }
                offset += blk;
            }
        });
    }
    Ok(y)
}

/// Pick one column per row: out[i] = x[i, idx[i]].
///
/// The backward pass scatters only into the selected entries, so all other
/// columns of a row receive exactly zero gradient from that row.
pub fn select_per_row(g: &mut Graph, x: &Tensor, idx: &[usize]) -> Result<Tensor> {
    let shape = x.shape();
    if shape.len() != 2 {
        return Err(Error::dimension(
            "select_per_row",
            format!("expected rank-2 input, got {:?}", shape),
        ));
    }
    let (rows, cols) = (shape[0], shape[1]);
    if idx.len() != rows {
        return Err(Error::dimension(
            "select_per_row",
            format!("row axis: {} indices for {rows} rows", idx.len()),
        ));
    }
    for (i, &j) in idx.iter().enumerate() {
        if j >= cols {
            return Err(Error::index(
                "select_per_row",
                format!("row {i}: column {j} out of range 0..{cols}"),
            ));
        }
    }

    let xd = x.data();
    let out: Vec<f64> = idx.iter().enumerate().map(|(i, &j)| xd[i * cols + j]).collect();
    drop(xd);

    let requires = x.requires_grad();
    let y = Tensor::intermediate(&[rows], out, g.wants_grad(requires));
    if g.wants_grad(requires) {
        let xc = x.clone();
        let yc = y.clone();
        let idx = idx.to_vec();
        g.push(move || {
            let gy = yc.grad_ref();
            let Some(gy) = gy.as_ref() else { return };
            let mut dx = vec![0.0; rows * cols];
            for (i, &j) in idx.iter().enumerate() {
                dx[i * cols + j] = gy[i];
            }

            xc.accumulate_grad(&dx);
        });
    }
    Ok(y)
}
