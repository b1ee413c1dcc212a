//! Stateful layer wrappers around the raw operators. Each layer caches what its
//! backward pass needs and accumulates parameter gradients in place.

use rand::SeedableRng;

use super::conv::{conv1d, conv1d_backward, ConvMode};
use super::dense::{dense_backward, dense_forward};
use super::lstm::{lstm_cell_backward, lstm_cell_step, LstmStepCache, GATE_FORGET};
use super::norm::{batch_norm, batch_norm_backward, dropout, relu, relu_backward, BatchNormCache, Mode, RunningStats};
use super::tensor::{Parameter, Tensor};
use crate::error::{Error, Result};
use crate::rng::StreamRng;

/// A differentiable block with its own parameters.
pub trait Layer: Send {
    fn forward(&mut self, input: &Tensor, mode: Mode) -> Result<Tensor>;
    /// Consumes the gradient of the output, accumulates parameter gradients and
    /// returns the gradient of the input of the most recent `forward`.
    fn backward(&mut self, grad_out: &Tensor) -> Result<Tensor>;
    fn parameters(&self) -> Vec<&Parameter> {
        Vec::new()
    }
    fn parameters_mut(&mut self) -> Vec<&mut Parameter> {
        Vec::new()
    }
    /// False when a train-mode forward would draw fresh random numbers.
    fn is_deterministic(&self) -> bool {
        true
    }
}

fn missing_forward() -> Error {
    Error::ShapeMismatch("backward called before forward".into())
}

/// Glorot-uniform bound.
pub fn glorot(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

pub struct Dense {
    pub weights: Parameter,
    pub bias: Parameter,
    input: Option<Tensor>,
}

impl Dense {
    pub fn new(prefix: &str, n_in: usize, n_out: usize, rng: &mut StreamRng) -> Self {
        Dense {
            weights: Parameter::new(
                format!("{prefix}.weights"),
                Tensor::uniform(&[n_out, n_in], glorot(n_in, n_out), rng),
            ),
            bias: Parameter::new(format!("{prefix}.bias"), Tensor::zeros(&[n_out])),
            input: None,
        }
    }
}

impl Layer for Dense {
    fn forward(&mut self, input: &Tensor, _mode: Mode) -> Result<Tensor> {
        let out = dense_forward(input, &self.weights.value, &self.bias.value)?;
        self.input = Some(input.clone());
        Ok(out)
    }

    fn backward(&mut self, grad_out: &Tensor) -> Result<Tensor> {
        let input = self.input.as_ref().ok_or_else(missing_forward)?;
        let g = dense_backward(input, &self.weights.value, grad_out)?;
        self.weights.grad.add_assign(&g.weights);
        self.bias.grad.add_assign(&g.bias);
        Ok(g.input)
    }

    fn parameters(&self) -> Vec<&Parameter> {
        vec![&self.weights, &self.bias]
    }

    fn parameters_mut(&mut self) -> Vec<&mut Parameter> {
        vec![&mut self.weights, &mut self.bias]
    }
}

/// LSTM over a `[batch × time × features]` sequence, starting from zero state.
pub struct Lstm {
    pub units: usize,
    pub n_in: usize,
    pub weights: Parameter,
    pub bias: Parameter,
    pub return_sequences: bool,
    caches: Vec<LstmStepCache>,
}

impl Lstm {
    pub fn new(prefix: &str, n_in: usize, units: usize, return_sequences: bool, rng: &mut StreamRng) -> Self {
        let bound = 1.0 / (units as f64).sqrt();
        let mut bias = Tensor::zeros(&[4 * units]);
        bias.data_mut()[GATE_FORGET * units..(GATE_FORGET + 1) * units].fill(1.0);
        Lstm {
            units,
            n_in,
            weights: Parameter::new(
                format!("{prefix}.weights"),
                Tensor::uniform(&[4 * units, units + n_in], bound, rng),
            ),
            bias: Parameter::new(format!("{prefix}.bias"), bias),
            return_sequences,
            caches: Vec::new(),
        }
    }

    /// One step from an explicit state; the cache is kept for `backward_step`.
    pub fn step(&mut self, x: &Tensor, a: &Tensor, c: &Tensor) -> Result<(Tensor, Tensor)> {
        let out = lstm_cell_step(x, a, c, &self.weights.value, &self.bias.value)?;
        self.caches.push(out.cache);
        Ok((out.a, out.c))
    }

    /// Backward through the most recent un-popped step. Returns (dx, da_prev, dc_prev).
    pub fn backward_step(&mut self, grad_a: &Tensor, grad_c: &Tensor) -> Result<(Tensor, Tensor, Tensor)> {
        let cache = self.caches.pop().ok_or_else(missing_forward)?;
        let g = lstm_cell_backward(
            &cache,
            &self.weights.value,
            grad_a,
            grad_c,
            &mut self.weights.grad,
            &mut self.bias.grad,
        )?;
        Ok((g.x, g.a_prev, g.c_prev))
    }

    pub fn clear(&mut self) {
        self.caches.clear();
    }
}

fn time_slice(x: &Tensor, t: usize) -> Tensor {
    let (b, len, n) = (x.dim(0), x.dim(1), x.dim(2));
    let mut out = Tensor::zeros(&[b, n]);
    for r in 0..b {
        let src = &x.data()[(r * len + t) * n..(r * len + t + 1) * n];
        out.data_mut()[r * n..(r + 1) * n].copy_from_slice(src);
    }
    out
}

fn put_time_slice(dst: &mut Tensor, t: usize, v: &Tensor) {
    let (b, len, n) = (dst.dim(0), dst.dim(1), dst.dim(2));
    for r in 0..b {
        dst.data_mut()[(r * len + t) * n..(r * len + t + 1) * n].copy_from_slice(&v.data()[r * n..(r + 1) * n]);
    }
}

impl Layer for Lstm {
    fn forward(&mut self, input: &Tensor, _mode: Mode) -> Result<Tensor> {
        input.expect_rank(3, "lstm input")?;
        let (b, len, n) = (input.dim(0), input.dim(1), input.dim(2));
        if n != self.n_in {
            return Err(Error::ShapeMismatch(format!("lstm expects {} features, got {n}", self.n_in)));
        }
        self.caches.clear();
        let u = self.units;
        let mut a = Tensor::zeros(&[b, u]);
        let mut c = Tensor::zeros(&[b, u]);
        let mut seq = if self.return_sequences { Tensor::zeros(&[b, len, u]) } else { Tensor::zeros(&[0]) };
        for t in 0..len {
            let x = time_slice(input, t);
            let (na, nc) = self.step(&x, &a, &c)?;
            a = na;
            c = nc;
            if self.return_sequences {
                put_time_slice(&mut seq, t, &a);
            }
        }
        Ok(if self.return_sequences { seq } else { a })
    }

    fn backward(&mut self, grad_out: &Tensor) -> Result<Tensor> {
        let len = self.caches.len();
        let first = self.caches.first().ok_or_else(missing_forward)?;
        let b = first.c.dim(0);
        let u = self.units;
        let n = self.n_in;
        let mut dx = Tensor::zeros(&[b, len, n]);
        let mut da = Tensor::zeros(&[b, u]);
        let mut dc = Tensor::zeros(&[b, u]);
        for t in (0..len).rev() {
            if self.return_sequences {
                da.add_assign(&time_slice(grad_out, t));
            } else if t == len - 1 {
                da.add_assign(grad_out);
            }
            let (gx, ga, gc) = self.backward_step(&da, &dc)?;
            put_time_slice(&mut dx, t, &gx);
            da = ga;
            dc = gc;
        }
        Ok(dx)
    }

    fn parameters(&self) -> Vec<&Parameter> {
        vec![&self.weights, &self.bias]
    }

    fn parameters_mut(&mut self) -> Vec<&mut Parameter> {
        vec![&mut self.weights, &mut self.bias]
    }
}

pub struct Conv1d {
    pub filters: Parameter,
    pub bias: Option<Parameter>,
    pub mode: ConvMode,
    input: Option<Tensor>,
}

impl Conv1d {
    pub fn new(
        prefix: &str,
        n_in: usize,
        k: usize,
        n_filters: usize,
        mode: ConvMode,
        with_bias: bool,
        rng: &mut StreamRng,
    ) -> Self {
        let bound = glorot(k * n_in, k * n_filters);
        Conv1d {
            filters: Parameter::new(format!("{prefix}.filters"), Tensor::uniform(&[n_filters, k, n_in], bound, rng)),
            bias: with_bias.then(|| Parameter::new(format!("{prefix}.bias"), Tensor::zeros(&[n_filters]))),
            mode,
            input: None,
        }
    }
}

impl Layer for Conv1d {
    fn forward(&mut self, input: &Tensor, _mode: Mode) -> Result<Tensor> {
        let out = conv1d(input, &self.filters.value, self.bias.as_ref().map(|b| &b.value), self.mode, 1)?;
        self.input = Some(input.clone());
        Ok(out)
    }

    fn backward(&mut self, grad_out: &Tensor) -> Result<Tensor> {
        let input = self.input.as_ref().ok_or_else(missing_forward)?;
        let g = conv1d_backward(input, &self.filters.value, self.mode, 1, grad_out)?;
        self.filters.grad.add_assign(&g.filters);
        if let Some(b) = self.bias.as_mut() {
            b.grad.add_assign(&g.bias);
        }
        Ok(g.input)
    }

    fn parameters(&self) -> Vec<&Parameter> {
        std::iter::once(&self.filters).chain(self.bias.as_ref()).collect()
    }

    fn parameters_mut(&mut self) -> Vec<&mut Parameter> {
        std::iter::once(&mut self.filters).chain(self.bias.as_mut()).collect()
    }
}

pub struct BatchNorm {
    pub gamma: Parameter,
    pub beta: Parameter,
    pub running: RunningStats,
    cache: Option<BatchNormCache>,
}

impl BatchNorm {
    pub fn new(prefix: &str, features: usize) -> Self {
        BatchNorm {
            gamma: Parameter::new(format!("{prefix}.gamma"), Tensor::filled(&[features], 1.0)),
            beta: Parameter::new(format!("{prefix}.beta"), Tensor::zeros(&[features])),
            running: RunningStats::new(features),
            cache: None,
        }
    }
}

impl Layer for BatchNorm {
    fn forward(&mut self, input: &Tensor, mode: Mode) -> Result<Tensor> {
        let (out, cache) = batch_norm(input, &self.gamma.value, &self.beta.value, mode, &mut self.running)?;
        self.cache = Some(cache);
        Ok(out)
    }

    fn backward(&mut self, grad_out: &Tensor) -> Result<Tensor> {
        let cache = self.cache.as_ref().ok_or_else(missing_forward)?;
        let g = batch_norm_backward(cache, &self.gamma.value, grad_out)?;
        self.gamma.grad.add_assign(&g.gamma);
        self.beta.grad.add_assign(&g.beta);
        Ok(g.input)
    }

    fn parameters(&self) -> Vec<&Parameter> {
        vec![&self.gamma, &self.beta]
    }

    fn parameters_mut(&mut self) -> Vec<&mut Parameter> {
        vec![&mut self.gamma, &mut self.beta]
    }
}

#[derive(Default)]
pub struct Relu {
    input: Option<Tensor>,
}

impl Layer for Relu {
    fn forward(&mut self, input: &Tensor, _mode: Mode) -> Result<Tensor> {
        self.input = Some(input.clone());
        Ok(relu(input))
    }

    fn backward(&mut self, grad_out: &Tensor) -> Result<Tensor> {
        let input = self.input.as_ref().ok_or_else(missing_forward)?;
        Ok(relu_backward(input, grad_out))
    }
}

/// Inverted dropout with its own random stream. `pin` makes every train-mode
/// forward reuse the same mask (needed for finite-difference checks).
pub struct Dropout {
    pub rate: f64,
    rng: StreamRng,
    pinned: Option<u64>,
    mask: Option<Vec<f64>>,
}

impl Dropout {
    pub fn new(rate: f64, seed: u64) -> Result<Self> {
        if !(0.0..1.0).contains(&rate) {
            return Err(Error::BadRate(rate));
        }
        Ok(Dropout { rate, rng: StreamRng::seed_from_u64(seed), pinned: None, mask: None })
    }

    pub fn pin(&mut self, seed: u64) {
        self.pinned = Some(seed);
    }

    pub fn reseed(&mut self, seed: u64) {
        self.rng = StreamRng::seed_from_u64(seed);
    }
}

impl Layer for Dropout {
    fn forward(&mut self, input: &Tensor, mode: Mode) -> Result<Tensor> {
        if let Some(seed) = self.pinned {
            self.rng = StreamRng::seed_from_u64(seed);
        }
        let (out, mask) = dropout(input, self.rate, mode, &mut self.rng)?;
        self.mask = mask;
        Ok(out)
    }

    fn backward(&mut self, grad_out: &Tensor) -> Result<Tensor> {
        let mut g = grad_out.clone();
        if let Some(mask) = &self.mask {
            for (d, s) in g.data_mut().iter_mut().zip(mask) {
                *d *= s;
            }
        }
        Ok(g)
    }

    fn is_deterministic(&self) -> bool {
        self.rate == 0.0 || self.pinned.is_some()
    }
}
