//! One-dimensional convolution over `[batch × length × channels]` sequences in
//! four boundary/tap-spacing modes.

use serde::{Deserialize, Serialize};

use super::tensor::{gemm, Tensor};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConvMode {
    /// No padding, output length `l − k + 1`.
    Vanilla,
    /// `⌈(k−1)/2⌉` zeros on the left, `⌊(k−1)/2⌋` on the right; length preserved.
    Padded,
    /// `k − 1` zeros on the left only; output at `t` sees inputs `t−k+1..=t`.
    Causal,
    /// Causal with `d − 1` skipped steps between taps; output at `t` sees
    /// `t − (k−1)d, …, t − d, t`.
    DilatedCausal(usize),
}

impl ConvMode {
    pub fn output_len(self, l: usize, k: usize, stride: usize) -> Result<usize> {
        if k == 0 {
            return Err(Error::ShapeMismatch("filter length 0".into()));
        }
        match self {
            ConvMode::Vanilla => {
                if stride == 0 {
                    return Err(Error::BadStride(stride));
                }
                if k > l {
                    return Err(Error::FilterTooLong { k, l });
                }
                Ok((l - k) / stride + 1)
            }
            ConvMode::DilatedCausal(0) => Err(Error::ShapeMismatch("dilation must be at least 1".into())),
            _ => {
                if stride != 1 {
                    return Err(Error::BadStride(stride));
                }
                Ok(l)
            }
        }
    }

    /// Input index read by tap `j` for output position `t`; may fall in the padding.
    fn tap(self, t: usize, j: usize, k: usize, stride: usize) -> isize {
        let (t, j, k) = (t as isize, j as isize, k as isize);
        match self {
            ConvMode::Vanilla => t * stride as isize + j,
            ConvMode::Padded => t + j - (k - 1 + 1) / 2,
            ConvMode::Causal => t - (k - 1) + j,
            ConvMode::DilatedCausal(d) => {
                let d = d as isize;
                t - (k - 1) * d + j * d
            }
        }
    }

    /// Number of input steps one output can see.
    pub fn receptive_field(self, k: usize) -> usize {
        match self {
            ConvMode::DilatedCausal(d) => (k - 1) * d + 1,
            _ => k,
        }
    }
}

/// Builds the `[l' × (k·n)]` patch matrix for one batch element.
fn im2col(x: &[f64], l: usize, n: usize, k: usize, out_len: usize, mode: ConvMode, stride: usize) -> Vec<f64> {
    let mut col = vec![0.0; out_len * k * n];
    for t in 0..out_len {
        for j in 0..k {
            let src = mode.tap(t, j, k, stride);
            if src >= 0 && (src as usize) < l {
                let s = src as usize;
                let dst = t * k * n + j * n;
                col[dst..dst + n].copy_from_slice(&x[s * n..(s + 1) * n]);
            }
        }
    }
    col
}

fn check(input: &Tensor, filters: &Tensor, bias: Option<&Tensor>) -> Result<(usize, usize, usize, usize, usize)> {
    input.expect_rank(3, "conv input")?;
    filters.expect_rank(3, "conv filters")?;
    let (b, l, n) = (input.dim(0), input.dim(1), input.dim(2));
    let (f, k) = (filters.dim(0), filters.dim(1));
    if filters.dim(2) != n {
        return Err(Error::ShapeMismatch(format!(
            "conv filters {:?} do not match input channels {n}",
            filters.shape()
        )));
    }
    if let Some(bias) = bias {
        if bias.len() != f {
            return Err(Error::ShapeMismatch("conv bias length".into()));
        }
    }
    Ok((b, l, n, f, k))
}

/// `input` [batch × l × n], `filters` [F × k × n] → [batch × l' × F].
pub fn conv1d(
    input: &Tensor,
    filters: &Tensor,
    bias: Option<&Tensor>,
    mode: ConvMode,
    stride: usize,
) -> Result<Tensor> {
    let (b, l, n, f, k) = check(input, filters, bias)?;
    let out_len = mode.output_len(l, k, stride)?;
    let mut out = Tensor::zeros(&[b, out_len, f]);
    let kn = k * n;
    for bi in 0..b {
        let x = &input.data()[bi * l * n..(bi + 1) * l * n];
        let col = im2col(x, l, n, k, out_len, mode, stride);
        let dst = &mut out.data_mut()[bi * out_len * f..(bi + 1) * out_len * f];
        if let Some(bias) = bias {
            for row in dst.chunks_mut(f) {
                row.copy_from_slice(bias.data());
            }
        }
        gemm(out_len, kn, f, &col, false, filters.data(), true, 1.0, dst);
    }
    Ok(out)
}

pub struct ConvGrads {
    pub input: Tensor,
    pub filters: Tensor,
    pub bias: Tensor,
}

pub fn conv1d_backward(
    input: &Tensor,
    filters: &Tensor,
    mode: ConvMode,
    stride: usize,
    grad_out: &Tensor,
) -> Result<ConvGrads> {
    let (b, l, n, f, k) = check(input, filters, None)?;
    let out_len = mode.output_len(l, k, stride)?;
    if grad_out.shape() != [b, out_len, f] {
        return Err(Error::ShapeMismatch(format!("conv grad {:?}", grad_out.shape())));
    }
    let kn = k * n;
    let mut dx = Tensor::zeros(&[b, l, n]);
    let mut dw = Tensor::zeros(&[f, k, n]);
    let mut db = Tensor::zeros(&[f]);
    let mut dcol = vec![0.0; out_len * kn];
    for bi in 0..b {
        let x = &input.data()[bi * l * n..(bi + 1) * l * n];
        let g = &grad_out.data()[bi * out_len * f..(bi + 1) * out_len * f];
        let col = im2col(x, l, n, k, out_len, mode, stride);
        gemm(f, out_len, kn, g, true, &col, false, 1.0, dw.data_mut());
        gemm(out_len, f, kn, g, false, filters.data(), false, 0.0, &mut dcol);
        for row in g.chunks(f) {
            for (acc, v) in db.data_mut().iter_mut().zip(row) {
                *acc += v;
            }
        }
        let dxb = &mut dx.data_mut()[bi * l * n..(bi + 1) * l * n];
        for t in 0..out_len {
            for j in 0..k {
                let src = mode.tap(t, j, k, stride);
                if src >= 0 && (src as usize) < l {
                    let s = src as usize;
                    let from = &dcol[t * kn + j * n..t * kn + (j + 1) * n];
                    for (d, v) in dxb[s * n..(s + 1) * n].iter_mut().zip(from) {
                        *d += v;
                    }
                }
            }
        }
    }
    Ok(ConvGrads { input: dx, filters: dw, bias: db })
}
