//! Fully connected layer: out = input · weightᵀ + bias.

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::tensor::Tensor;

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
    c: &mut [f64],
) {
    unsafe {
        matrixmultiply::dgemm(
            m, k, n, 1.0, a.as_ptr(), rsa, csa, b.as_ptr(), rsb, csb, 0.0, c.as_mut_ptr(),
            n as isize, 1,
        );
    }
}

/// input [N,D], weight [M,D], bias [M] -> [N,M].
pub fn fully_connected(
    g: &mut Graph,
    input: &Tensor,
    weight: &Tensor,
    bias: &Tensor,
) -> Result<Tensor> {
    let ishape = input.shape();
    let wshape = weight.shape();
    if ishape.len() != 2 || wshape.len() != 2 {
        return Err(Error::dimension(
            "fully_connected",
            format!("expected rank-2 input and weight, got {:?} and {:?}", ishape, wshape),
        ));
    }
    let (batch, in_dim) = (ishape[0], ishape[1]);
    let (out_dim, w_in) = (wshape[0], wshape[1]);
    if in_dim != w_in {
        return Err(Error::dimension(
            "fully_connected",
            format!("inner axis: input has D={in_dim} but weight expects D={w_in}"),
        ));
    }
    if bias.shape() != [out_dim] {
        return Err(Error::dimension(
            "fully_connected",
            format!("bias axis: expected [{out_dim}], got {:?}", bias.shape()),
        ));
    }

    let mut out = vec![0.0; batch * out_dim];
    {
        let x = input.data();
        let w = weight.data();
        let b = bias.data();
        // out = x [N,D] · Wᵀ [D,M]
        dgemm(batch, in_dim, out_dim, &x, in_dim as isize, 1, &w, 1, in_dim as isize, &mut out);
        for row in out.chunks_exact_mut(out_dim) {
            for (o, &bm) in row.iter_mut().zip(b.iter()) {
                *o += bm;
            }
        }
    }

    let requires = input.requires_grad() || weight.requires_grad() || bias.requires_grad();
    let y = Tensor::intermediate(&[batch, out_dim], out, g.wants_grad(requires));

    if g.wants_grad(requires) {
        let xc = input.clone();
        let wc = weight.clone();
        let bc = bias.clone();
        let yc = y.clone();
        g.push(move || {
            let gy = yc.grad_ref();
            let Some(gy) = gy.as_ref() else { return };

            if bc.requires_grad() {
                let mut db = vec![0.0; out_dim];
                for row in gy.chunks_exact(out_dim) {
                    for (d, &gv) in db.iter_mut().zip(row.iter()) {
                        *d += gv;
                    }
                }
                bc.accumulate_grad(&db);
            }

            if wc.requires_grad() {
                let x = xc.data();
                let mut dw = vec![0.0; out_dim * in_dim];
                // dW = gyᵀ [M,N] · x [N,D]
                dgemm(out_dim, batch, in_dim, gy, 1, out_dim as isize, &x, in_dim as isize, 1, &mut dw);
                drop(x);
                wc.accumulate_grad(&dw);
            }

            if xc.requires_grad() {
                let w = wc.data();
                let mut dx = vec![0.0; batch * in_dim];
                // dx = gy [N,M] · W [M,D]
                dgemm(batch, out_dim, in_dim, gy, out_dim as isize, 1, &w, in_dim as isize, 1, &mut dx);
                drop(w);
                xc.accumulate_grad(&dx);
            }
        });
    }
    Ok(y)
}
