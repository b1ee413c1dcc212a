use super::{check_input, check_window, BindShape, Family, Forecaster, ModelConfig};
use crate::error::{Error, Result};
use crate::neural::{Dense, Dropout, Layer, Lstm, Mode, Parameter, Tensor};
use crate::rng::{derive_seed, stream};

/// One (`ss`) or two (`ss2`) LSTM layers, last hidden state → dropout → dense
/// head of size `w_out · n_out`, reshaped to the forecast window.
pub struct SingleShotModel {
    cfg: ModelConfig,
    shape: BindShape,
    lower: Lstm,
    upper: Option<Lstm>,
    dropout: Dropout,
    head: Dense,
}

impl SingleShotModel {
    pub fn new(cfg: &ModelConfig, shape: BindShape, seed: u64) -> Result<Self> {
        if !matches!(cfg.family, Family::Ss | Family::Ss2) {
            return Err(Error::ConfigMismatch(format!("{cfg} is not a single-shot family")));
        }
        cfg.validate()?;
        check_window(cfg, &shape)?;
        let super::Architecture::Lstm { units, .. } = cfg.arch else { unreachable!("validated") };
        let mut rng = stream(seed, "init");
        let stacked = cfg.family == Family::Ss2;
        let lower = Lstm::new("lstm1", shape.n_in, units, stacked, &mut rng);
        let upper = stacked.then(|| Lstm::new("lstm2", units, units, false, &mut rng));
        let head = Dense::new("head", units, shape.w_out * shape.n_out, &mut rng);
        Ok(SingleShotModel {
            cfg: *cfg,
            shape,
            lower,
            upper,
            dropout: Dropout::new(cfg.dropout_rate(), derive_seed(seed, "dropout"))?,
            head,
        })
    }
}

impl Layer for SingleShotModel {
    fn forward(&mut self, input: &Tensor, mode: Mode) -> Result<Tensor> {
        let batch = check_input(input, &self.shape)?;
        let mut h = self.lower.forward(input, mode)?;
        if let Some(upper) = self.upper.as_mut() {
            h = upper.forward(&h, mode)?;
        }
        let h = self.dropout.forward(&h, mode)?;
        self.head.forward(&h, mode)?.reshaped(&[batch, self.shape.w_out, self.shape.n_out])
    }

    fn backward(&mut self, grad_out: &Tensor) -> Result<Tensor> {
        let batch = grad_out.dim(0);
        let g = grad_out.clone().reshaped(&[batch, self.shape.w_out * self.shape.n_out])?;
        let g = self.head.backward(&g)?;
        let mut g = self.dropout.backward(&g)?;
        if let Some(upper) = self.upper.as_mut() {
            g = upper.backward(&g)?;
        }
        self.lower.backward(&g)
    }

    fn parameters(&self) -> Vec<&Parameter> {
        let mut p = self.lower.parameters();
        if let Some(u) = &self.upper {
            p.extend(u.parameters());
        }
        p.extend(self.head.parameters());
        p
    }

    fn parameters_mut(&mut self) -> Vec<&mut Parameter> {
        let mut p = self.lower.parameters_mut();
        if let Some(u) = self.upper.as_mut() {
            p.extend(u.parameters_mut());
        }
        p.extend(self.head.parameters_mut());
        p
    }

    fn is_deterministic(&self) -> bool {
        self.dropout.is_deterministic()
    }
}

impl Forecaster for SingleShotModel {
    fn config(&self) -> &ModelConfig {
        &self.cfg
    }

    fn bind_shape(&self) -> BindShape {
        self.shape
    }

    fn dropout_layers_mut(&mut self) -> Vec<&mut Dropout> {
        vec![&mut self.dropout]
    }
}
