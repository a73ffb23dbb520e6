use std::io::{Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::hashing::{hash_ngrams, SparseCounts, DEFAULT_BUCKETS};
use crate::error::{Error, Result};
use crate::rng::stream;
use crate::synthworld::Example;

const MAGIC: &[u8; 4] = b"LSFM";
pub const FILTER_VERSION: u32 = 1;

/// Logistic regression over hashed unigram and bigram frequencies.
#[derive(Clone, Debug, PartialEq)]
pub struct NGramFilterModel {
    pub hash_buckets: usize,
    pub weights: Vec<f64>,
    pub bias: f64,
    pub threshold: f64,
}

impl NGramFilterModel {
    pub fn zeros(hash_buckets: usize) -> Self {
        Self { hash_buckets, weights: vec![0.0; hash_buckets], bias: 0.0, threshold: 0.5 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.hash_buckets < 2 || self.weights.len() != self.hash_buckets {
            return Err(Error::Parameter("filter weights must cover every bucket".into()));
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(Error::Parameter(format!("threshold must be in (0, 1), got {}", self.threshold)));
        }
        if !self.bias.is_finite() || self.weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::Parameter("filter weights are not finite".into()));
        }
        Ok(())
    }

    fn logit(&self, x: &SparseCounts) -> f64 {
        let scale = 1.0 / x.total().max(1.0);
        self.bias + x.entries.iter().map(|&(b, c)| self.weights[b] * c * scale).sum::<f64>()
    }

    /// Probability that a caption belongs to the positive corpus.
    pub fn score<S: AsRef<str>>(&self, caption: &[S]) -> f64 {
        let x = hash_ngrams(caption, self.hash_buckets).expect("bucket count validated");
        sigmoid(self.logit(&x))
    }

    pub fn accepts<S: AsRef<str>>(&self, caption: &[S]) -> bool {
        self.score(caption) >= self.threshold
    }

    pub fn write_to<W: Write>(&self, mut out: W) -> Result<()> {
        self.validate()?;
        let mut buf = Vec::with_capacity(32 + 8 * self.weights.len());
        buf.extend_from_slice(MAGIC);
        buf.extend_from_slice(&FILTER_VERSION.to_le_bytes());
        buf.extend_from_slice(&(self.hash_buckets as u64).to_le_bytes());
        buf.extend_from_slice(&self.bias.to_le_bytes());
        buf.extend_from_slice(&self.threshold.to_le_bytes());
        for w in &self.weights {
            buf.extend_from_slice(&w.to_le_bytes());
        }
        let digest = Sha256::digest(&buf);
        out.write_all(&buf)?;
        out.write_all(&digest)?;
        Ok(())
    }

    pub fn read_from<R: Read>(mut input: R) -> Result<Self> {
        let mut buf = Vec::new();
        input.read_to_end(&mut buf)?;
        if buf.len() < 32 + 32 {
            return Err(Error::format("filter model is truncated"));
        }
        let (body, digest) = buf.split_at(buf.len() - 32);
        if Sha256::digest(body).as_slice() != digest {
            return Err(Error::format("filter model checksum mismatch"));
        }
        if &body[..4] != MAGIC {
            return Err(Error::format("not a filter model"));
        }
        let u32_at = |i: usize| u32::from_le_bytes(body[i..i + 4].try_into().expect("4 bytes"));
        let u64_at = |i: usize| u64::from_le_bytes(body[i..i + 8].try_into().expect("8 bytes"));
        let version = u32_at(4);
        if version != FILTER_VERSION {
            return Err(Error::format(format!("unsupported filter model version {version}")));
        }
        let hash_buckets = u64_at(8) as usize;
        if body.len() != 32 + 8 * hash_buckets {
            return Err(Error::format("filter model length does not match its bucket count"));
        }
        let model = Self {
            hash_buckets,
            bias: f64::from_bits(u64_at(16)),
            threshold: f64::from_bits(u64_at(24)),
            weights: (0..hash_buckets).map(|i| f64::from_bits(u64_at(32 + 8 * i))).collect(),
        };
        model.validate().map_err(|e| Error::format(e.to_string()))?;
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut buf = Vec::new();
        self.write_to(&mut buf)?;
        std::fs::write(path, buf)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path)?;
        Self::read_from(std::io::BufReader::new(f)).map_err(|e| match e {
            Error::Format { message, .. } => Error::Format { path: Some(path.to_path_buf()), message },
            other => other,
        })
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterConfig {
    pub epochs: usize,
    pub lr: f64,
    pub l2: f64,
    pub holdout_fraction: f64,
    pub hash_buckets: usize,
    pub seed: u64,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self { epochs: 5, lr: 0.5, l2: 0.0, holdout_fraction: 0.2, hash_buckets: DEFAULT_BUCKETS, seed: 0 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FilterTraining {
    pub model: NGramFilterModel,
    pub heldout_accuracy: f64,
    pub train_size: usize,
    pub heldout_size: usize,
}

/// Fits the filter by SGD on a random 1 − `holdout_fraction` of the pooled
/// corpora and reports accuracy on the rest.
pub fn train_filter<S: AsRef<str>>(
    positive: &[Vec<S>],
    negative: &[Vec<S>],
    cfg: &FilterConfig,
) -> Result<FilterTraining> {
    if positive.is_empty() || negative.is_empty() {
        return Err(Error::Data("filter training needs non-empty positive and negative corpora".into()));
    }
    if !(cfg.holdout_fraction > 0.0 && cfg.holdout_fraction < 1.0) || cfg.epochs == 0 || !(cfg.lr > 0.0) {
        return Err(Error::Parameter("filter config out of range".into()));
    }
    let mut data: Vec<(SparseCounts, f64)> = Vec::with_capacity(positive.len() + negative.len());
    for c in positive {
        data.push((hash_ngrams(c, cfg.hash_buckets)?, 1.0));
    }
    for c in negative {
        data.push((hash_ngrams(c, cfg.hash_buckets)?, 0.0));
    }
    let mut order: Vec<usize> = (0..data.len()).collect();
    order.shuffle(&mut stream(cfg.seed, "filter/split", 0));
    let heldout_size = ((data.len() as f64 * cfg.holdout_fraction).round() as usize).clamp(1, data.len() - 1);
    let (held, mut train) = (order[..heldout_size].to_vec(), order[heldout_size..].to_vec());

    let mut model = NGramFilterModel::zeros(cfg.hash_buckets);
    for epoch in 0..cfg.epochs {
        train.sort_unstable();
        train.shuffle(&mut stream(cfg.seed, "filter/shuffle", epoch as u64));
        for &i in &train {
            let (x, y) = &data[i];
            let g = sigmoid(model.logit(x)) - y;
            let scale = 1.0 / x.total().max(1.0);
            for &(b, c) in &x.entries {
                let w = &mut model.weights[b];
                *w -= cfg.lr * (g * c * scale + cfg.l2 * *w);
            }
            model.bias -= cfg.lr * g;
        }
    }
    model.validate().map_err(|_| Error::Diverged("filter weights are not finite".into()))?;
    let correct =
        held.iter().filter(|&&i| (sigmoid(model.logit(&data[i].0)) >= model.threshold) == (data[i].1 == 1.0)).count();
    Ok(FilterTraining {
        model,
        heldout_accuracy: correct as f64 / held.len() as f64,
        train_size: train.len(),
        heldout_size: held.len(),
    })
}

/// Keeps examples whose first caption scores at or above the threshold, in
/// their original order.
pub fn filter_dataset(model: &NGramFilterModel, ds: &[Example]) -> Vec<Example> {
    ds.iter().filter(|e| e.captions.first().is_some_and(|c| model.accepts(c))).cloned().collect()
}
