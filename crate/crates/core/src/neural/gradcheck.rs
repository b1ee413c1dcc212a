//! Central-difference verification of backward passes.

use rand::Rng;

use super::layers::Layer;
use super::norm::Mode;
use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::rng::stream;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// Where the maximum occurred, e.g. `lstm.weights[17]` or `input[3]`.
    pub worst: String,
    pub checked: usize,
}

/// Relative error with the 1e-8 floor on the denominator.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8)
}

/// Objective used for checking: a fixed random weighting of the output.
fn objective(layer: &mut dyn Layer, input: &Tensor, weights: &Tensor) -> Result<f64> {
    let out = layer.forward(input, Mode::Train)?;
    Ok(out.data().iter().zip(weights.data()).map(|(a, b)| a * b).sum())
}

/// Compares backward gradients of every parameter element and every input
/// element against central differences of step `eps`, in train mode.
pub fn gradient_check(layer: &mut dyn Layer, input: &Tensor, eps: f64) -> Result<GradCheckReport> {
    if !layer.is_deterministic() {
        return Err(Error::NonDeterministic);
    }
    let out = layer.forward(input, Mode::Train)?;
    let mut rng = stream(0x6772_6164, "gradcheck-projection");
    let weights = Tensor::from_vec(out.shape(), (0..out.len()).map(|_| rng.gen_range(-1.0..1.0)).collect())?;
    for p in layer.parameters_mut() {
        p.zero_grad();
    }
    let dx = layer.backward(&weights)?;
    let analytic: Vec<(String, Vec<f64>)> =
        layer.parameters().iter().map(|p| (p.name.clone(), p.grad.data().to_vec())).collect();
    for (name, g) in &analytic {
        if g.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteGradient(name.clone()));
        }
    }
    if !dx.all_finite() {
        return Err(Error::NonFiniteGradient("input".into()));
    }

    let mut report = GradCheckReport { max_rel_error: 0.0, worst: String::new(), checked: 0 };
    let note = |report: &mut GradCheckReport, name: String, a: f64, n: f64| {
        let e = relative_error(a, n);
        report.checked += 1;
        if e > report.max_rel_error || report.worst.is_empty() {
            report.max_rel_error = e.max(report.max_rel_error);
            report.worst = name;
        }
    };

    for (pi, (name, grads)) in analytic.iter().enumerate() {
        for (e, &g) in grads.iter().enumerate() {
            let orig = layer.parameters()[pi].value.data()[e];
            layer.parameters_mut()[pi].value.data_mut()[e] = orig + eps;
            let plus = objective(layer, input, &weights)?;
            layer.parameters_mut()[pi].value.data_mut()[e] = orig - eps;
            let minus = objective(layer, input, &weights)?;
            layer.parameters_mut()[pi].value.data_mut()[e] = orig;
            note(&mut report, format!("{name}[{e}]"), g, (plus - minus) / (2.0 * eps));
        }
    }
    let mut x = input.clone();
    for e in 0..x.len() {
        let orig = x.data()[e];
        x.data_mut()[e] = orig + eps;
        let plus = objective(layer, &x, &weights)?;
        x.data_mut()[e] = orig - eps;
        let minus = objective(layer, &x, &weights)?;
        x.data_mut()[e] = orig;
        note(&mut report, format!("input[{e}]"), dx.data()[e], (plus - minus) / (2.0 * eps));
    }
    Ok(report)
}
