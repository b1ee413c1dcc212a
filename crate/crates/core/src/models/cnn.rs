//! Two stacked convolution blocks, flatten, dropout and a dense head.
//!
//! | family | block                          | modes                    |
//! |--------|--------------------------------|--------------------------|
//! | vcn    | conv → ReLU                    | vanilla, vanilla         |
//! | fcn    | conv → batch norm → ReLU       | padded, padded           |
//! | dcn    | conv → batch norm → ReLU       | dilated causal d=1, d=2  |

use super::{check_input, check_window, Architecture, BindShape, Family, Forecaster, ModelConfig};
use crate::error::{Error, Result};
use crate::neural::{BatchNorm, Conv1d, ConvMode, Dense, Dropout, Layer, Mode, Parameter, Relu, Tensor};
use crate::rng::{derive_seed, stream};

struct Block {
    conv: Conv1d,
    norm: Option<BatchNorm>,
    act: Relu,
}

impl Block {
    fn forward(&mut self, x: &Tensor, mode: Mode) -> Result<Tensor> {
        let mut h = self.conv.forward(x, mode)?;
        if let Some(n) = self.norm.as_mut() {
            h = n.forward(&h, mode)?;
        }
        self.act.forward(&h, mode)
    }

    fn backward(&mut self, g: &Tensor) -> Result<Tensor> {
        let mut g = self.act.backward(g)?;
        if let Some(n) = self.norm.as_mut() {
            g = n.backward(&g)?;
        }
        self.conv.backward(&g)
    }

    fn parameters(&self) -> Vec<&Parameter> {
        let mut p = self.conv.parameters();
        if let Some(n) = &self.norm {
            p.extend(n.parameters());
        }
        p
    }

    fn parameters_mut(&mut self) -> Vec<&mut Parameter> {
        let mut p = self.conv.parameters_mut();
        if let Some(n) = self.norm.as_mut() {
            p.extend(n.parameters_mut());
        }
        p
    }
}

pub struct CnnModel {
    cfg: ModelConfig,
    shape: BindShape,
    blocks: [Block; 2],
    /// Sequence length after each block.
    lengths: [usize; 2],
    dropout: Dropout,
    head: Dense,
}

impl CnnModel {
    pub fn new(cfg: &ModelConfig, shape: BindShape, seed: u64) -> Result<Self> {
        cfg.validate()?;
        check_window(cfg, &shape)?;
        let Architecture::Cnn { k1, f1, k2, f2 } = cfg.arch else {
            return Err(Error::ConfigMismatch(format!("{cfg} is not a convolutional family")));
        };
        let (modes, with_norm) = match cfg.family {
            Family::Vcn => ([ConvMode::Vanilla, ConvMode::Vanilla], false),
            Family::Fcn => ([ConvMode::Padded, ConvMode::Padded], true),
            Family::Dcn => ([ConvMode::DilatedCausal(1), ConvMode::DilatedCausal(2)], true),
            _ => return Err(Error::ConfigMismatch(format!("{cfg} is not a convolutional family"))),
        };
        if cfg.family == Family::Vcn && shape.w_in < k1 + k2 - 1 {
            return Err(Error::FilterTooLong { k: k1 + k2 - 1, l: shape.w_in });
        }
        let l1 = modes[0].output_len(shape.w_in, k1, 1)?;
        let l2 = modes[1].output_len(l1, k2, 1)?;
        let mut rng = stream(seed, "init");
        // a bias in front of batch norm is cancelled by the mean subtraction
        let block = |name: &str, n_in: usize, k: usize, f: usize, mode: ConvMode, rng: &mut _| Block {
            conv: Conv1d::new(&format!("{name}.conv"), n_in, k, f, mode, !with_norm, rng),
            norm: with_norm.then(|| BatchNorm::new(&format!("{name}.bn"), f)),
            act: Relu::default(),
        };
        let b1 = block("block1", shape.n_in, k1, f1, modes[0], &mut rng);
        let b2 = block("block2", f1, k2, f2, modes[1], &mut rng);
        let head = Dense::new("head", l2 * f2, shape.w_out * shape.n_out, &mut rng);
        Ok(CnnModel {
            cfg: *cfg,
            shape,
            blocks: [b1, b2],
            lengths: [l1, l2],
            dropout: Dropout::new(cfg.dropout_rate(), derive_seed(seed, "dropout"))?,
            head,
        })
    }

    pub fn block_lengths(&self) -> [usize; 2] {
        self.lengths
    }

    /// Output of both blocks for inspection (infer mode).
    pub fn block_outputs(&mut self, input: &Tensor) -> Result<[Tensor; 2]> {
        check_input(input, &self.shape)?;
        let h1 = self.blocks[0].forward(input, Mode::Infer)?;
        let h2 = self.blocks[1].forward(&h1, Mode::Infer)?;
        Ok([h1, h2])
    }
}

impl Layer for CnnModel {
    fn forward(&mut self, input: &Tensor, mode: Mode) -> Result<Tensor> {
        let batch = check_input(input, &self.shape)?;
        let h = self.blocks[0].forward(input, mode)?;
        let h = self.blocks[1].forward(&h, mode)?;
        let flat_len = h.len() / batch;
        let h = h.reshaped(&[batch, flat_len])?;
        let h = self.dropout.forward(&h, mode)?;
        self.head.forward(&h, mode)?.reshaped(&[batch, self.shape.w_out, self.shape.n_out])
    }

    fn backward(&mut self, grad_out: &Tensor) -> Result<Tensor> {
        let batch = grad_out.dim(0);
        let g = grad_out.clone().reshaped(&[batch, self.shape.w_out * self.shape.n_out])?;
        let g = self.head.backward(&g)?;
        let g = self.dropout.backward(&g)?;
        let f2 = g.len() / batch / self.lengths[1];
        let g = g.reshaped(&[batch, self.lengths[1], f2])?;
        let g = self.blocks[1].backward(&g)?;
        self.blocks[0].backward(&g)
    }

    fn parameters(&self) -> Vec<&Parameter> {
        let mut p = self.blocks[0].parameters();
        p.extend(self.blocks[1].parameters());
        p.extend(self.head.parameters());
        p
    }

    fn parameters_mut(&mut self) -> Vec<&mut Parameter> {
        let [b1, b2] = &mut self.blocks;
        let mut p = b1.parameters_mut();
        p.extend(b2.parameters_mut());
        p.extend(self.head.parameters_mut());
        p
    }

    fn is_deterministic(&self) -> bool {
        self.dropout.is_deterministic()
    }
}

impl Forecaster for CnnModel {
    fn config(&self) -> &ModelConfig {
        &self.cfg
    }

    fn bind_shape(&self) -> BindShape {
        self.shape
    }

    fn buffers(&self) -> Vec<(String, Tensor)> {
        let mut out = Vec::new();
        for (i, b) in self.blocks.iter().enumerate() {
            if let Some(n) = &b.norm {
                let f = n.running.mean.len();
                out.push((
                    format!("block{}.bn.running_mean", i + 1),
                    Tensor::from_vec(&[f], n.running.mean.clone()).expect("len"),
                ));
                out.push((
                    format!("block{}.bn.running_var", i + 1),
                    Tensor::from_vec(&[f], n.running.var.clone()).expect("len"),
                ));
            }
        }
        out
    }

    fn load_buffer(&mut self, name: &str, value: &Tensor) -> Result<()> {
        let bad = || Error::Checkpoint(format!("unknown buffer `{name}`"));
        let (block, field) = name.split_once(".bn.").ok_or_else(bad)?;
        let idx = match block {
            "block1" => 0,
            "block2" => 1,
            _ => return Err(bad()),
        };
        let norm = self.blocks[idx].norm.as_mut().ok_or_else(bad)?;
        let dst = match field {
            "running_mean" => &mut norm.running.mean,
            "running_var" => &mut norm.running.var,
            _ => return Err(bad()),
        };
        if dst.len() != value.len() {
            return Err(Error::Checkpoint(format!("buffer `{name}` has wrong length")));
        }
        dst.copy_from_slice(value.data());
        Ok(())
    }

    fn dropout_layers_mut(&mut self) -> Vec<&mut Dropout> {
        vec![&mut self.dropout]
    }
}
