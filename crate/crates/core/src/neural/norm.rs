//! Batch normalisation, dropout and ReLU.

use rand::Rng;

use super::tensor::Tensor;
use crate::error::{Error, Result};

pub const BN_EPS: f64 = 1e-9;
pub const BN_MOMENTUM: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Infer,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunningStats {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
}

impl RunningStats {
    pub fn new(features: usize) -> Self {
        RunningStats { mean: vec![0.0; features], var: vec![1.0; features] }
    }
}

#[derive(Debug, Clone)]
pub struct BatchNormCache {
    pub x_hat: Vec<f64>,
    pub inv_std: Vec<f64>,
    pub train: bool,
}

/// Normalises each feature (last axis) over every other axis, then applies `gamma`/`beta`.
pub fn batch_norm(
    input: &Tensor,
    gamma: &Tensor,
    beta: &Tensor,
    mode: Mode,
    running: &mut RunningStats,
) -> Result<(Tensor, BatchNormCache)> {
    let f = *input.shape().last().ok_or_else(|| Error::ShapeMismatch("batch norm on scalar".into()))?;
    if gamma.len() != f || beta.len() != f || running.mean.len() != f {
        return Err(Error::ShapeMismatch(format!("batch norm features {f}")));
    }
    let m = input.len() / f;
    let x = input.data();
    let (mean, var) = match mode {
        Mode::Train => {
            if m <= 1 {
                return Err(Error::DegenerateBatch);
            }
            let mut mean = vec![0.0; f];
            for row in x.chunks(f) {
                for (a, v) in mean.iter_mut().zip(row) {
                    *a += v;
                }
            }
            mean.iter_mut().for_each(|a| *a /= m as f64);
            let mut var = vec![0.0; f];
            for row in x.chunks(f) {
                for j in 0..f {
                    var[j] += (row[j] - mean[j]).powi(2);
                }
            }
            var.iter_mut().for_each(|a| *a /= m as f64);
            for j in 0..f {
                running.mean[j] = BN_MOMENTUM * running.mean[j] + (1.0 - BN_MOMENTUM) * mean[j];
                running.var[j] = BN_MOMENTUM * running.var[j] + (1.0 - BN_MOMENTUM) * var[j];
            }
            (mean, var)
        }
        Mode::Infer => (running.mean.clone(), running.var.clone()),
    };
    let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + BN_EPS).sqrt()).collect();
    let mut x_hat = vec![0.0; x.len()];
    let mut out = Tensor::zeros(input.shape());
    for (r, (row, hrow)) in x.chunks(f).zip(x_hat.chunks_mut(f)).enumerate() {
        let orow = &mut out.data_mut()[r * f..(r + 1) * f];
        for j in 0..f {
            hrow[j] = (row[j] - mean[j]) * inv_std[j];
            orow[j] = gamma.data()[j] * hrow[j] + beta.data()[j];
        }
    }
    Ok((out, BatchNormCache { x_hat, inv_std, train: mode == Mode::Train }))
}

pub struct BatchNormGrads {
    pub input: Tensor,
    pub gamma: Tensor,
    pub beta: Tensor,
}

pub fn batch_norm_backward(cache: &BatchNormCache, gamma: &Tensor, grad_out: &Tensor) -> Result<BatchNormGrads> {
    let f = gamma.len();
    if grad_out.len() != cache.x_hat.len() {
        return Err(Error::ShapeMismatch("batch norm grad".into()));
    }
    let m = grad_out.len() / f;
    let dy = grad_out.data();
    let mut dgamma = vec![0.0; f];
    let mut dbeta = vec![0.0; f];
    for (row, hrow) in dy.chunks(f).zip(cache.x_hat.chunks(f)) {
        for j in 0..f {
            dgamma[j] += row[j] * hrow[j];
            dbeta[j] += row[j];
        }
    }
    let mut dx = Tensor::zeros(grad_out.shape());
    let mf = m as f64;
    for (r, (row, hrow)) in dy.chunks(f).zip(cache.x_hat.chunks(f)).enumerate() {
        let drow = &mut dx.data_mut()[r * f..(r + 1) * f];
        for j in 0..f {
            let g = gamma.data()[j];
            drow[j] = if cache.train {
                // Σ dx̂ = γ·Σdy and Σ dx̂·x̂ = γ·Σ dy·x̂
                g * cache.inv_std[j] * (row[j] - dbeta[j] / mf - hrow[j] * dgamma[j] / mf)
            } else {
                g * cache.inv_std[j] * row[j]
            };
        }
    }
    Ok(BatchNormGrads { input: dx, gamma: Tensor::from_vec(&[f], dgamma)?, beta: Tensor::from_vec(&[f], dbeta)? })
}

/// Inverted dropout. Returns the output and the per-element scale mask
/// (0 or `1/(1−rate)`), which is also the backward multiplier.
pub fn dropout<R: Rng>(input: &Tensor, rate: f64, mode: Mode, rng: &mut R) -> Result<(Tensor, Option<Vec<f64>>)> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::BadRate(rate));
    }
    if mode == Mode::Infer || rate == 0.0 {
        return Ok((input.clone(), None));
    }
    let keep = 1.0 / (1.0 - rate);
    let mask: Vec<f64> = (0..input.len()).map(|_| if rng.gen::<f64>() < rate { 0.0 } else { keep }).collect();
    let mut out = input.clone();
    for (o, s) in out.data_mut().iter_mut().zip(&mask) {
        *o *= s;
    }
    Ok((out, Some(mask)))
}

pub fn relu(input: &Tensor) -> Tensor {
    let mut out = input.clone();
    out.data_mut().iter_mut().for_each(|v| *v = v.max(0.0));
    out
}

/// Gradient of ReLU given its forward input.
pub fn relu_backward(input: &Tensor, grad_out: &Tensor) -> Tensor {
    let mut g = grad_out.clone();
    for (d, x) in g.data_mut().iter_mut().zip(input.data()) {
        if *x <= 0.0 {
            *d = 0.0;
        }
    }
    g
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    #[test]
    fn batch_norm_standardises() {
        let data: Vec<f64> = (0..24).map(|i| ((i * 7) % 11) as f64 * 0.3 + i as f64 * 0.01).collect();
        let x = Tensor::from_vec(&[2, 4, 3], data).unwrap();
        let mut rs = RunningStats::new(3);
        let (y, _) = batch_norm(&x, &Tensor::filled(&[3], 1.0), &Tensor::zeros(&[3]), Mode::Train, &mut rs).unwrap();
        for j in 0..3 {
            let col: Vec<f64> = y.data().chunks(3).map(|r| r[j]).collect();
            let mean = col.iter().sum::<f64>() / 8.0;
            let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 8.0;
            assert!(mean.abs() < 1e-6 && (var - 1.0).abs() < 1e-6, "mean {mean} var {var}");
        }
        let beta = Tensor::from_vec(&[3], vec![0.5, -1.0, 2.0]).unwrap();
        let (y, _) = batch_norm(&x, &Tensor::zeros(&[3]), &beta, Mode::Train, &mut rs).unwrap();
        for row in y.data().chunks(3) {
            assert_eq!(row, beta.data());
        }
    }

    #[test]
    fn running_stats_and_infer() {
        let x = Tensor::from_vec(&[1, 2, 1], vec![1.0, 3.0]).unwrap();
        let mut rs = RunningStats::new(1);
        batch_norm(&x, &Tensor::filled(&[1], 1.0), &Tensor::zeros(&[1]), Mode::Train, &mut rs).unwrap();
        assert!((rs.mean[0] - 0.2).abs() < 1e-12);
        assert!((rs.var[0] - (0.9 + 0.1)).abs() < 1e-12);
        let (y, _) = batch_norm(&x, &Tensor::filled(&[1], 1.0), &Tensor::zeros(&[1]), Mode::Infer, &mut rs).unwrap();
        assert!((y.data()[0] - (1.0 - 0.2) / (1.0 + BN_EPS).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn degenerate_batch() {
        let x = Tensor::zeros(&[1, 1, 4]);
        let mut rs = RunningStats::new(4);
        let r = batch_norm(&x, &Tensor::filled(&[4], 1.0), &Tensor::zeros(&[4]), Mode::Train, &mut rs);
        assert!(matches!(r, Err(Error::DegenerateBatch)));
    }

    #[test]
    fn dropout_semantics() {
        let mut rng = stream(3, "dropout");
        let x = Tensor::filled(&[100_000], 1.0);
        let (y, _) = dropout(&x, 0.0, Mode::Train, &mut rng).unwrap();
        assert_eq!(y, x);
        let (y, _) = dropout(&x, 0.2, Mode::Infer, &mut rng).unwrap();
        assert_eq!(y, x);
        let (y, mask) = dropout(&x, 0.5, Mode::Train, &mut rng).unwrap();
        let survivors = mask.unwrap().iter().filter(|s| **s > 0.0).count() as f64 / 1e5;
        assert!((survivors - 0.5).abs() < 0.01);
        let mean = y.data().iter().sum::<f64>() / 1e5;
        assert!((mean - 1.0).abs() < 0.02);
        assert!(matches!(dropout(&x, 1.0, Mode::Train, &mut rng), Err(Error::BadRate(_))));
        assert!(matches!(dropout(&x, -0.1, Mode::Train, &mut rng), Err(Error::BadRate(_))));
    }

    #[test]
    fn dropout_is_seeded() {
        let x = Tensor::filled(&[64], 1.0);
        let (a, _) = dropout(&x, 0.3, Mode::Train, &mut stream(9, "d")).unwrap();
        let (b, _) = dropout(&x, 0.3, Mode::Train, &mut stream(9, "d")).unwrap();
        assert_eq!(a, b);
    }
}
