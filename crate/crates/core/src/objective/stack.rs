use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numkit::{DenseMatrix, Mlp, ParamTensor};
use crate::rng::stream;

/// Supervision regime.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ContrastiveMode {
    /// Image-only: the positive is a second augmented view.
    Simclr,
    /// Image-text: the positive is the example's first caption.
    Clip,
    /// Image-text with a fresh caption drawn from the first `K` at every visit.
    ClipS(usize),
}

impl ContrastiveMode {
    pub fn is_language(self) -> bool {
        !matches!(self, ContrastiveMode::Simclr)
    }

    pub fn head_kind(self) -> HeadKind {
        match self {
            ContrastiveMode::Simclr => HeadKind::MlpOneHidden,
            _ => HeadKind::Linear,
        }
    }

    /// Negatives seen by each anchor in a batch of `n` examples.
    pub fn negatives_per_anchor(self, n: usize) -> usize {
        match self {
            ContrastiveMode::Simclr => 2 * n - 2,
            _ => n - 1,
        }
    }

    pub fn validate(self) -> Result<()> {
        if let ContrastiveMode::ClipS(0) = self {
            return Err(Error::Parameter("clip_s needs K >= 1".into()));
        }
        Ok(())
    }
}

impl fmt::Display for ContrastiveMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ContrastiveMode::Simclr => f.write_str("simclr"),
            ContrastiveMode::Clip => f.write_str("clip"),
            ContrastiveMode::ClipS(k) => write!(f, "clip_s({k})"),
        }
    }
}

impl FromStr for ContrastiveMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim().to_ascii_lowercase();
        match t.as_str() {
            "simclr" => return Ok(ContrastiveMode::Simclr),
            "clip" => return Ok(ContrastiveMode::Clip),
            _ => {}
        }
        let k = t
            .strip_prefix("clip_s(")
            .and_then(|r| r.strip_suffix(')'))
            .or_else(|| t.strip_prefix("clip_s"))
            .ok_or_else(|| Error::Config(format!("unknown mode {s:?}")))?;
        let k: usize = k.parse().map_err(|_| Error::Config(format!("bad caption count in mode {s:?}")))?;
        let mode = ContrastiveMode::ClipS(k);
        mode.validate()?;
        Ok(mode)
    }
}

impl Serialize for ContrastiveMode {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ContrastiveMode {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeadKind {
    Linear,
    MlpOneHidden,
}

/// Projection from encoder features to the contrastive embedding space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProjectionHead {
    pub kind: HeadKind,
    pub net: Mlp,
}

impl ProjectionHead {
    /// Linear heads carry one weight matrix plus bias; MLP heads add a hidden
    /// layer as wide as the embedding.
    pub fn new(kind: HeadKind, feature_dim: usize, embed_dim: usize, rng: &mut impl rand::Rng) -> Self {
        let net = match kind {
            HeadKind::Linear => Mlp::new(&[feature_dim, embed_dim], false, rng),
            HeadKind::MlpOneHidden => Mlp::new(&[feature_dim, embed_dim, embed_dim], false, rng),
        };
        Self { kind, net }
    }
}

/// Encoder followed by its projection head.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tower {
    pub encoder: Mlp,
    pub head: ProjectionHead,
}

impl Tower {
    pub fn forward(&mut self, x: &DenseMatrix) -> Result<DenseMatrix> {
        let f = self.encoder.forward(x)?;
        self.head.net.forward(&f)
    }

    pub fn backward(&mut self, grad: &DenseMatrix) -> Result<()> {
        let g = self.head.net.backward(grad)?;
        self.encoder.backward(&g)?;
        Ok(())
    }

    /// Encoder output with no caching and no gradient flow.
    pub fn features(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        self.encoder.infer(x)
    }

    pub fn project(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        self.head.net.infer(&self.encoder.infer(x)?)
    }

    fn params_mut(&mut self) -> Vec<&mut ParamTensor> {
        let mut v = self.encoder.params_mut();
        v.extend(self.head.net.params_mut());
        v
    }

    fn params(&self) -> Vec<&ParamTensor> {
        let mut v = self.encoder.params();
        v.extend(self.head.net.params());
        v
    }
}

/// Encoder widths. Image input is the world's embedding dimension; text input
/// is the vocabulary size (bag-of-words). Each encoder is a ReLU MLP with a
/// linear output layer; the image features are what probes see.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EncoderConfig {
    pub image_input_dim: usize,
    pub text_input_dim: usize,
    pub hidden: Vec<usize>,
    pub feature_dim: usize,
    pub text_hidden: Vec<usize>,
    pub text_feature_dim: usize,
    pub embed_dim: usize,
    #[serde(default)]
    pub learnable_temperature: bool,
}

impl EncoderConfig {
    /// Image features narrower than the input, so training decides what the
    /// probe-visible representation keeps.
    pub fn desk(image_input_dim: usize, text_input_dim: usize) -> Self {
        Self {
            image_input_dim,
            text_input_dim,
            hidden: vec![64],
            feature_dim: 12,
            text_hidden: vec![64],
            text_feature_dim: 64,
            embed_dim: 32,
            learnable_temperature: false,
        }
    }

    fn image_dims(&self) -> Vec<usize> {
        let mut d = vec![self.image_input_dim];
        d.extend(&self.hidden);
        d.push(self.feature_dim);
        d
    }

    fn text_dims(&self) -> Vec<usize> {
        let mut d = vec![self.text_input_dim];
        d.extend(&self.text_hidden);
        d.push(self.text_feature_dim);
        d
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Temperature {
    Fixed(f64),
    /// Stored as `log τ`.
    Learnable(ParamTensor),
}

impl Temperature {
    pub fn value(&self) -> f64 {
        match self {
            Temperature::Fixed(t) => *t,
            Temperature::Learnable(p) => p.value.data()[0].exp(),
        }
    }

    /// Accumulate `dL/dτ` (converted to the log parameterization).
    pub fn accumulate(&mut self, grad_tau: f64) {
        if let Temperature::Learnable(p) = self {
            let tau = p.value.data()[0].exp();
            p.grad.data_mut()[0] += grad_tau * tau;
        }
    }
}

/// Image and text towers plus the temperature. A shared stack has no text
/// tower: both views go through the image tower.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EncoderStack {
    pub image: Tower,
    pub text: Option<Tower>,
    pub temperature: Temperature,
}

impl EncoderStack {
    pub fn new(mode: ContrastiveMode, arch: &EncoderConfig, tau: f64, seed: u64) -> Result<Self> {
        if !(tau > 0.0) {
            return Err(Error::Parameter(format!("temperature must be > 0, got {tau}")));
        }
        let mut rng = stream(seed, "stack/init", 0);
        let kind = mode.head_kind();
        let image = Tower {
            encoder: Mlp::new(&arch.image_dims(), false, &mut rng),
            head: ProjectionHead::new(kind, arch.feature_dim, arch.embed_dim, &mut rng),
        };
        let text = if mode.is_language() {
            let mut rng = stream(seed, "stack/init-text", 0);
            Some(Tower {
                encoder: Mlp::new(&arch.text_dims(), false, &mut rng),
                head: ProjectionHead::new(kind, arch.text_feature_dim, arch.embed_dim, &mut rng),
            })
        } else {
            None
        };
        let temperature = if arch.learnable_temperature {
            Temperature::Learnable(ParamTensor::new(DenseMatrix::from_vec(1, 1, vec![tau.ln()])?))
        } else {
            Temperature::Fixed(tau)
        };
        Ok(Self { image, text, temperature })
    }

    pub fn shared(&self) -> bool {
        self.text.is_none()
    }

    pub fn tau(&self) -> f64 {
        self.temperature.value()
    }

    pub fn text_tower(&self) -> &Tower {
        self.text.as_ref().unwrap_or(&self.image)
    }

    pub fn params_mut(&mut self) -> Vec<&mut ParamTensor> {
        let mut v = self.image.params_mut();
        if let Some(t) = &mut self.text {
            v.extend(t.params_mut());
        }
        if let Temperature::Learnable(p) = &mut self.temperature {
            v.push(p);
        }
        v
    }

    pub fn params(&self) -> Vec<&ParamTensor> {
        let mut v = self.image.params();
        if let Some(t) = &self.text {
            v.extend(t.params());
        }
        if let Temperature::Learnable(p) = &self.temperature {
            v.push(p);
        }
        v
    }

    pub fn zero_grad(&mut self) {
        for p in self.params_mut() {
            p.zero_grad();
        }
    }

    pub fn num_parameters(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.params().iter().all(|p| p.value.is_finite())
    }
}
