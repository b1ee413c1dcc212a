use super::tensor::Tensor;
use crate::error::{Error, Result};

fn check(pred: &Tensor, target: &Tensor, mask: &[usize]) -> Result<usize> {
    if pred.shape() != target.shape() {
        return Err(Error::ShapeMismatch(format!("pred {:?} vs target {:?}", pred.shape(), target.shape())));
    }
    if mask.is_empty() {
        return Err(Error::EmptyMask);
    }
    let c = *pred.shape().last().unwrap_or(&0);
    if let Some(bad) = mask.iter().find(|&&m| m >= c) {
        return Err(Error::ShapeMismatch(format!("mask channel {bad} out of {c}")));
    }
    Ok(c)
}

/// Mean squared error over the masked channels of `[S × w_out × C]` tensors,
/// with its gradient with respect to `pred`.
pub fn mse_loss(pred: &Tensor, target: &Tensor, mask: &[usize]) -> Result<(f64, Tensor)> {
    let c = check(pred, target, mask)?;
    let rows = pred.len() / c;
    let denom = (rows * mask.len()) as f64;
    let mut loss = 0.0;
    let mut grad = Tensor::zeros(pred.shape());
    for r in 0..rows {
        for &ch in mask {
            let i = r * c + ch;
            let e = pred.data()[i] - target.data()[i];
            loss += e * e;
            grad.data_mut()[i] = 2.0 * e / denom;
        }
    }
    Ok((loss / denom, grad))
}

/// Mean absolute error over the masked channels.
pub fn mae_metric(pred: &Tensor, target: &Tensor, mask: &[usize]) -> Result<f64> {
    let c = check(pred, target, mask)?;
    let rows = pred.len() / c;
    let mut acc = 0.0;
    for r in 0..rows {
        for &ch in mask {
            let i = r * c + ch;
            acc += (pred.data()[i] - target.data()[i]).abs();
        }
    }
    Ok(acc / (rows * mask.len()) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(v: Vec<f64>) -> Tensor {
        Tensor::from_vec(&[2, 2, 1], v).unwrap()
    }

    #[test]
    fn hand_sums() {
        let target = t(vec![0.0; 4]);
        let (l, g) = mse_loss(&t(vec![1.0, 2.0, 3.0, 4.0]), &target, &[0]).unwrap();
        assert!((l - 7.5).abs() < 1e-12);
        assert_eq!(g.data(), &[0.5, 1.0, 1.5, 2.0]);
        let mae = mae_metric(&t(vec![1.0, -2.0, 3.0, -4.0]), &target, &[0]).unwrap();
        assert!((mae - 2.5).abs() < 1e-12);
        let (l, _) = mse_loss(&t(vec![0.3; 4]), &target, &[0]).unwrap();
        assert!((l - 0.09).abs() < 1e-12);
        assert!((mae_metric(&t(vec![-0.3; 4]), &target, &[0]).unwrap() - 0.3).abs() < 1e-12);
        assert_eq!(mse_loss(&target, &target, &[0]).unwrap().0, 0.0);
        assert_eq!(mae_metric(&target, &target, &[0]).unwrap(), 0.0);
    }

    #[test]
    fn mask_selects_channels() {
        let pred = Tensor::from_vec(&[1, 2, 2], vec![1.0, 10.0, 2.0, 20.0]).unwrap();
        let zero = Tensor::zeros(&[1, 2, 2]);
        assert!((mae_metric(&pred, &zero, &[0]).unwrap() - 1.5).abs() < 1e-12);
        assert!((mae_metric(&pred, &zero, &[0, 1]).unwrap() - 8.25).abs() < 1e-12);
        assert!(matches!(mse_loss(&pred, &zero, &[]), Err(Error::EmptyMask)));
        assert!(matches!(mae_metric(&pred, &zero, &[]), Err(Error::EmptyMask)));
    }
}
