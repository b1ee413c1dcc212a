use super::tensor::{gemm, Tensor};
use crate::error::{Error, Result};

/// `out = input·Wᵀ + b` for `input` [batch × in], `weights` [out × in], `bias` [out].
pub fn dense_forward(input: &Tensor, weights: &Tensor, bias: &Tensor) -> Result<Tensor> {
    input.expect_rank(2, "dense input")?;
    weights.expect_rank(2, "dense weights")?;
    let (b, n_in) = (input.dim(0), input.dim(1));
    let n_out = weights.dim(0);
    if weights.dim(1) != n_in || bias.len() != n_out {
        return Err(Error::ShapeMismatch(format!(
            "dense: input {:?}, weights {:?}, bias {:?}",
            input.shape(),
            weights.shape(),
            bias.shape()
        )));
    }
    let mut out = Tensor::zeros(&[b, n_out]);
    for row in out.data_mut().chunks_mut(n_out) {
        row.copy_from_slice(bias.data());
    }
    gemm(b, n_in, n_out, input.data(), false, weights.data(), true, 1.0, out.data_mut());
    Ok(out)
}

pub struct DenseGrads {
    pub input: Tensor,
    pub weights: Tensor,
    pub bias: Tensor,
}

pub fn dense_backward(input: &Tensor, weights: &Tensor, grad_out: &Tensor) -> Result<DenseGrads> {
    let (b, n_in) = (input.dim(0), input.dim(1));
    let n_out = weights.dim(0);
    if grad_out.shape() != [b, n_out] {
        return Err(Error::ShapeMismatch(format!("dense grad {:?}, expected [{b}, {n_out}]", grad_out.shape())));
    }
    let mut dx = Tensor::zeros(&[b, n_in]);
    gemm(b, n_out, n_in, grad_out.data(), false, weights.data(), false, 0.0, dx.data_mut());
    let mut dw = Tensor::zeros(&[n_out, n_in]);
    gemm(n_out, b, n_in, grad_out.data(), true, input.data(), false, 0.0, dw.data_mut());
    let mut db = Tensor::zeros(&[n_out]);
    for row in grad_out.data().chunks(n_out) {
        for (d, g) in db.data_mut().iter_mut().zip(row) {
            *d += g;
        }
    }
    Ok(DenseGrads { input: dx, weights: dw, bias: db })
}
