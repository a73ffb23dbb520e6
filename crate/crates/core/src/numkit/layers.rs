//! Multilayer perceptrons with cached activations and analytic backward.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::ops::{affine_backward, affine_forward};
use super::{DenseMatrix, ParamTensor};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Linear {
    pub weight: ParamTensor,
    pub bias: ParamTensor,
    #[serde(skip)]
    input: Option<DenseMatrix>,
}

impl Linear {
    /// He-style Gaussian init (`gain² / fan_in` variance), zero bias.
    pub fn new(fan_in: usize, fan_out: usize, gain: f64, rng: &mut impl Rng) -> Self {
        let std = gain / (fan_in as f64).sqrt();
        Self {
            weight: ParamTensor::gaussian(fan_in, fan_out, std, rng),
            bias: ParamTensor::zeros(1, fan_out),
            input: None,
        }
    }

    pub fn in_dim(&self) -> usize {
        self.weight.value.rows()
    }

    pub fn out_dim(&self) -> usize {
        self.weight.value.cols()
    }

    pub fn forward(&mut self, x: &DenseMatrix) -> Result<DenseMatrix> {
        let out = affine_forward(x, &self.weight, &self.bias)?;
        self.input = Some(x.clone());
        Ok(out)
    }

    pub fn infer(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        affine_forward(x, &self.weight, &self.bias)
    }

    pub fn backward(&mut self, grad_out: &DenseMatrix) -> Result<DenseMatrix> {
        let input = self.input.take().ok_or_else(|| Error::Parameter("linear backward without forward".into()))?;
        affine_backward(&input, &mut self.weight, &mut self.bias, grad_out)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[allow(clippy::large_enum_variant)]
pub enum Layer {
    Linear(Linear),
    Relu {
        #[serde(skip)]
        mask: Option<Vec<bool>>,
    },
}

impl Layer {
    fn forward(&mut self, x: &DenseMatrix) -> Result<DenseMatrix> {
        match self {
            Layer::Linear(l) => l.forward(x),
            Layer::Relu { mask } => {
                let mut out = x.clone();
                let mut m = Vec::with_capacity(out.data().len());
                for v in out.data_mut() {
                    let keep = *v > 0.0;
                    if !keep {
                        *v = 0.0;
                    }
                    m.push(keep);
                }
                *mask = Some(m);
                Ok(out)
            }
        }
    }

    fn infer(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        match self {
            Layer::Linear(l) => l.infer(x),
            Layer::Relu { .. } => {
                let mut out = x.clone();
                out.data_mut().iter_mut().for_each(|v| *v = v.max(0.0));
                Ok(out)
            }
        }
    }

    fn backward(&mut self, grad: &DenseMatrix) -> Result<DenseMatrix> {
        match self {
            Layer::Linear(l) => l.backward(grad),
            Layer::Relu { mask } => {
                let m = mask.take().ok_or_else(|| Error::Parameter("relu backward without forward".into()))?;
                let mut out = grad.clone();
                for (g, keep) in out.data_mut().iter_mut().zip(m) {
                    if !keep {
                        *g = 0.0;
                    }
                }
                Ok(out)
            }
        }
    }
}

/// Alternating linear / ReLU stack.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    layers: Vec<Layer>,
}

impl Mlp {
    /// `dims = [in, h1, ..., out]`; ReLU after every linear layer except the
    /// last, plus one after the last when `relu_output` is set.
    pub fn new(dims: &[usize], relu_output: bool, rng: &mut impl Rng) -> Self {
        assert!(dims.len() >= 2, "an MLP needs at least input and output dims");
        let mut layers = Vec::new();
        let n = dims.len() - 1;
        for i in 0..n {
            let followed_by_relu = i + 1 < n || relu_output;
            let gain = if followed_by_relu { 2f64.sqrt() } else { 1.0 };
            layers.push(Layer::Linear(Linear::new(dims[i], dims[i + 1], gain, rng)));
            if followed_by_relu {
                layers.push(Layer::Relu { mask: None });
            }
        }
        Self { layers }
    }

    pub fn in_dim(&self) -> usize {
        self.linears().next().map_or(0, Linear::in_dim)
    }

    pub fn out_dim(&self) -> usize {
        self.linears().last().map_or(0, Linear::out_dim)
    }

    pub fn linears(&self) -> impl Iterator<Item = &Linear> {
        self.layers.iter().filter_map(|l| match l {
            Layer::Linear(l) => Some(l),
            _ => None,
        })
    }

    pub fn num_linear(&self) -> usize {
        self.linears().count()
    }

    pub fn forward(&mut self, x: &DenseMatrix) -> Result<DenseMatrix> {
        let mut h = x.clone();
        for l in &mut self.layers {
            h = l.forward(&h)?;
        }
        Ok(h)
    }

    /// Forward pass without caching; leaves the parameters untouched.
    pub fn infer(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        let mut h = x.clone();
        for l in &self.layers {
            h = l.infer(&h)?;
        }
        Ok(h)
    }

    pub fn backward(&mut self, grad: &DenseMatrix) -> Result<DenseMatrix> {
        let mut g = grad.clone();
        for l in self.layers.iter_mut().rev() {
            g = l.backward(&g)?;
        }
        Ok(g)
    }

    pub fn params(&self) -> Vec<&ParamTensor> {
        self.linears().flat_map(|l| [&l.weight, &l.bias]).collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut ParamTensor> {
        self.layers
            .iter_mut()
            .filter_map(|l| match l {
                Layer::Linear(l) => Some(l),
                _ => None,
            })
            .flat_map(|l| [&mut l.weight, &mut l.bias])
            .collect()
    }
}
