//! LSTM cell with explicit forward cache and backward pass.
//!
//! The four gate weight matrices are stored stacked in one `[4u × (u + n_x)]`
//! tensor, blocks in the order forget, input, output, candidate. Each block
//! multiplies the concatenation `[a_prev, x_t]`.

use super::tensor::{gemm, Tensor};
use crate::error::{Error, Result};

pub const GATE_FORGET: usize = 0;
pub const GATE_INPUT: usize = 1;
pub const GATE_OUTPUT: usize = 2;
pub const GATE_CANDIDATE: usize = 3;

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Everything the backward pass needs from one step.
#[derive(Debug, Clone)]
pub struct LstmStepCache {
    /// `[a_prev, x_t]`, [batch × (u + n_x)]
    pub concat: Tensor,
    pub c_prev: Tensor,
    /// activated gates f, i, o, g per row: [batch × 4u]
    pub gates: Tensor,
    pub c: Tensor,
    pub tanh_c: Tensor,
}

pub struct LstmStepOutput {
    pub a: Tensor,
    pub c: Tensor,
    pub cache: LstmStepCache,
}

fn check_step(x: &Tensor, a_prev: &Tensor, c_prev: &Tensor, w: &Tensor, b: &Tensor) -> Result<(usize, usize, usize)> {
    x.expect_rank(2, "lstm x_t")?;
    let (batch, n_x) = (x.dim(0), x.dim(1));
    let u = a_prev.shape().get(1).copied().unwrap_or(0);
    if u == 0
        || a_prev.shape() != [batch, u]
        || c_prev.shape() != [batch, u]
        || w.shape() != [4 * u, u + n_x]
        || b.len() != 4 * u
    {
        return Err(Error::ShapeMismatch(format!(
            "lstm step: x {:?}, a {:?}, c {:?}, w {:?}, b {:?}",
            x.shape(),
            a_prev.shape(),
            c_prev.shape(),
            w.shape(),
            b.shape()
        )));
    }
    Ok((batch, n_x, u))
}

/// One step: gates from `[a_prev, x_t]`, `c_t = i·g + f·c_prev`, `a_t = o·tanh(c_t)`.
pub fn lstm_cell_step(x: &Tensor, a_prev: &Tensor, c_prev: &Tensor, w: &Tensor, b: &Tensor) -> Result<LstmStepOutput> {
    let (batch, n_x, u) = check_step(x, a_prev, c_prev, w, b)?;
    let width = u + n_x;
    let mut concat = Tensor::zeros(&[batch, width]);
    for r in 0..batch {
        let row = &mut concat.data_mut()[r * width..(r + 1) * width];
        row[..u].copy_from_slice(&a_prev.data()[r * u..(r + 1) * u]);
        row[u..].copy_from_slice(&x.data()[r * n_x..(r + 1) * n_x]);
    }
    let mut gates = Tensor::zeros(&[batch, 4 * u]);
    for row in gates.data_mut().chunks_mut(4 * u) {
        row.copy_from_slice(b.data());
    }
    gemm(batch, width, 4 * u, concat.data(), false, w.data(), true, 1.0, gates.data_mut());

    let mut c = Tensor::zeros(&[batch, u]);
    let mut tanh_c = Tensor::zeros(&[batch, u]);
    let mut a = Tensor::zeros(&[batch, u]);
    for r in 0..batch {
        let g = &mut gates.data_mut()[r * 4 * u..(r + 1) * 4 * u];
        for j in 0..u {
            g[GATE_FORGET * u + j] = sigmoid(g[GATE_FORGET * u + j]);
            g[GATE_INPUT * u + j] = sigmoid(g[GATE_INPUT * u + j]);
            g[GATE_OUTPUT * u + j] = sigmoid(g[GATE_OUTPUT * u + j]);
            g[GATE_CANDIDATE * u + j] = g[GATE_CANDIDATE * u + j].tanh();
        }
        for j in 0..u {
            let k = r * u + j;
            let cv = g[GATE_INPUT * u + j] * g[GATE_CANDIDATE * u + j] + g[GATE_FORGET * u + j] * c_prev.data()[k];
            let tc = cv.tanh();
            c.data_mut()[k] = cv;
            tanh_c.data_mut()[k] = tc;
            a.data_mut()[k] = g[GATE_OUTPUT * u + j] * tc;
        }
    }
    let cache = LstmStepCache { concat, c_prev: c_prev.clone(), gates, c: c.clone(), tanh_c };
    Ok(LstmStepOutput { a, c, cache })
}

pub struct LstmStepGrads {
    pub x: Tensor,
    pub a_prev: Tensor,
    pub c_prev: Tensor,
}

/// Backward through one step. `grad_a` / `grad_c` are the total upstream
/// gradients on `a_t` and `c_t`. Weight and bias gradients are added into
/// `grad_w` / `grad_b`.
pub fn lstm_cell_backward(
    cache: &LstmStepCache,
    w: &Tensor,
    grad_a: &Tensor,
    grad_c: &Tensor,
    grad_w: &mut Tensor,
    grad_b: &mut Tensor,
) -> Result<LstmStepGrads> {
    let batch = cache.c.dim(0);
    let u = cache.c.dim(1);
    let width = cache.concat.dim(1);
    let n_x = width - u;
    if grad_a.shape() != [batch, u] || grad_c.shape() != [batch, u] {
        return Err(Error::ShapeMismatch("lstm backward upstream gradient".into()));
    }
    let mut dz = Tensor::zeros(&[batch, 4 * u]);
    let mut dc_prev = Tensor::zeros(&[batch, u]);
    for r in 0..batch {
        let g = &cache.gates.data()[r * 4 * u..(r + 1) * 4 * u];
        let d = &mut dz.data_mut()[r * 4 * u..(r + 1) * 4 * u];
        for j in 0..u {
            let k = r * u + j;
            let (f, i, o, cand) = (g[j], g[u + j], g[2 * u + j], g[3 * u + j]);
            let tc = cache.tanh_c.data()[k];
            let da = grad_a.data()[k];
            let dc = grad_c.data()[k] + da * o * (1.0 - tc * tc);
            d[GATE_FORGET * u + j] = dc * cache.c_prev.data()[k] * f * (1.0 - f);
            d[GATE_INPUT * u + j] = dc * cand * i * (1.0 - i);
            d[GATE_OUTPUT * u + j] = da * tc * o * (1.0 - o);
            d[GATE_CANDIDATE * u + j] = dc * i * (1.0 - cand * cand);
            dc_prev.data_mut()[k] = dc * f;
        }
    }
    gemm(4 * u, batch, width, dz.data(), true, cache.concat.data(), false, 1.0, grad_w.data_mut());
    for row in dz.data().chunks(4 * u) {
        for (acc, v) in grad_b.data_mut().iter_mut().zip(row) {
            *acc += v;
        }
    }
    let mut dconcat = Tensor::zeros(&[batch, width]);
    gemm(batch, 4 * u, width, dz.data(), false, w.data(), false, 0.0, dconcat.data_mut());
    let mut da_prev = Tensor::zeros(&[batch, u]);
    let mut dx = Tensor::zeros(&[batch, n_x]);
    for r in 0..batch {
        let row = &dconcat.data()[r * width..(r + 1) * width];
        da_prev.data_mut()[r * u..(r + 1) * u].copy_from_slice(&row[..u]);
        dx.data_mut()[r * n_x..(r + 1) * n_x].copy_from_slice(&row[u..]);
    }
    Ok(LstmStepGrads { x: dx, a_prev: da_prev, c_prev: dc_prev })
}
