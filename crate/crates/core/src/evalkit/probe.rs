use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::metrics::{class_balanced_accuracy, Labels, Predictions, TaskKind};
use crate::error::{Error, Result};
use crate::numkit::DenseMatrix;
use crate::rng::stream;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub weight_decay: f64,
    pub momentum: f64,
    pub lr_grid: Vec<f64>,
    pub seeds: usize,
    #[serde(default = "default_level")]
    pub ci_level: f64,
    #[serde(default = "default_resamples")]
    pub resamples: usize,
}

fn default_level() -> f64 {
    0.95
}

fn default_resamples() -> usize {
    1000
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self {
            epochs: 250,
            batch_size: 256,
            weight_decay: 1e-6,
            momentum: 0.9,
            lr_grid: vec![0.03, 0.1, 0.3, 1.0, 3.0, 10.0],
            seeds: 3,
            ci_level: default_level(),
            resamples: default_resamples(),
        }
    }
}

impl ProbeConfig {
    /// Short schedule sized for single-core runs.
    pub fn desk() -> Self {
        Self {
            epochs: 40,
            batch_size: 64,
            lr_grid: vec![0.03, 0.1, 0.3, 1.0],
            seeds: 2,
            resamples: 500,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::Config("probe epochs and batch size must be positive".into()));
        }
        if self.lr_grid.is_empty() {
            return Err(Error::Config("probe lr grid is empty".into()));
        }
        if self.lr_grid.windows(2).any(|w| w[0] > w[1]) || self.lr_grid.iter().any(|&lr| !(lr > 0.0)) {
            return Err(Error::Config("probe lr grid must be positive and sorted".into()));
        }
        if self.seeds == 0 {
            return Err(Error::Config("probe needs at least one seed".into()));
        }
        if !(0.0..1.0).contains(&self.momentum) || !(self.weight_decay >= 0.0) {
            return Err(Error::Config("probe momentum must be in [0, 1) and weight decay >= 0".into()));
        }
        if !(self.ci_level > 0.0 && self.ci_level < 1.0) || self.resamples < 100 {
            return Err(Error::Config("ci level must be in (0, 1) with >= 100 resamples".into()));
        }
        Ok(())
    }
}

/// Per-feature affine map fitted on training features.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    pub fn fit(x: &DenseMatrix) -> Self {
        let (n, d) = x.shape();
        let mut mean = vec![0.0; d];
        for r in x.iter_rows() {
            mean.iter_mut().zip(r).for_each(|(m, v)| *m += v);
        }
        mean.iter_mut().for_each(|m| *m /= n.max(1) as f64);
        let mut var = vec![0.0; d];
        for r in x.iter_rows() {
            for ((s, v), m) in var.iter_mut().zip(r).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let scale = var
            .into_iter()
            .map(|s| {
                let sd = (s / n.max(1) as f64).sqrt();
                if sd > 1e-8 {
                    1.0 / sd
                } else {
                    1.0
                }
            })
            .collect();
        Self { mean, scale }
    }

    pub fn apply(&self, x: &DenseMatrix) -> DenseMatrix {
        let mut out = x.clone();
        for r in 0..out.rows() {
            for ((v, m), s) in out.row_mut(r).iter_mut().zip(&self.mean).zip(&self.scale) {
                *v = (*v - m) * s;
            }
        }
        out
    }
}

/// Linear classifier over standardized features.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearProbe {
    pub kind: TaskKind,
    pub standardizer: Standardizer,
    /// `outputs × dim`, row-major.
    pub weights: DenseMatrix,
    pub bias: Vec<f64>,
    pub lr: f64,
    pub seed: u64,
}

impl LinearProbe {
    fn logits_row(&self, x: &[f64], out: &mut [f64]) {
        for (k, o) in out.iter_mut().enumerate() {
            *o = self.bias[k] + x.iter().zip(self.weights.row(k)).map(|(a, b)| a * b).sum::<f64>();
        }
    }

    pub fn predict(&self, features: &DenseMatrix) -> Predictions {
        let x = self.standardizer.apply(features);
        let k = self.bias.len();
        let mut logits = vec![0.0; k];
        match self.kind {
            TaskKind::Multiclass => Predictions::Multiclass(
                x.iter_rows()
                    .map(|r| {
                        self.logits_row(r, &mut logits);
                        argmax(&logits)
                    })
                    .collect(),
            ),
            TaskKind::Multilabel => {
                let mut y = Vec::with_capacity(x.rows() * k);
                for r in x.iter_rows() {
                    self.logits_row(r, &mut logits);
                    y.extend(logits.iter().map(|&l| l > 0.0));
                }
                Predictions::Multilabel { labels: k, y }
            }
        }
    }
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Fitted probes (one per seed) and the validation accuracy they reached.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeFit {
    pub probes: Vec<LinearProbe>,
    pub val_accuracy: f64,
}

/// Per-example loss weights that equalise each class (or each label polarity).
fn loss_weights(labels: &Labels) -> Result<Vec<f64>> {
    match labels {
        Labels::Multiclass { classes, y } => {
            let mut tot = vec![0usize; *classes];
            for &c in y {
                if c >= *classes {
                    return Err(Error::Data(format!("label {c} out of range for {classes} classes")));
                }
                tot[c] += 1;
            }
            let present = tot.iter().filter(|&&t| t > 0).count();
            if present < 2 {
                return Err(Error::DegenerateTask("training labels contain a single class".into()));
            }
            let n = y.len() as f64;
            Ok(y.iter().map(|&c| n / (present as f64 * tot[c] as f64)).collect())
        }
        Labels::Multilabel { labels: l, y } => {
            let n = y.len() / l;
            let mut pos = vec![0usize; *l];
            for row in y.chunks_exact(*l) {
                row.iter().zip(&mut pos).for_each(|(&b, p)| *p += b as usize);
            }
            if pos.iter().all(|&p| p == 0 || p == n) {
                return Err(Error::DegenerateTask("every label is constant".into()));
            }
            let mut w = Vec::with_capacity(y.len());
            for row in y.chunks_exact(*l) {
                for (j, &b) in row.iter().enumerate() {
                    let count = if b { pos[j] } else { n - pos[j] };
                    let polarities = if pos[j] == 0 || pos[j] == n { 1.0 } else { 2.0 };
                    w.push(n as f64 / (polarities * count as f64));
                }
            }
            Ok(w)
        }
    }
}

fn fit_one(
    x: &DenseMatrix,
    labels: &Labels,
    weights: &[f64],
    cfg: &ProbeConfig,
    lr: f64,
    seed: u64,
    standardizer: &Standardizer,
) -> Option<LinearProbe> {
    let (n, d) = x.shape();
    let k = labels.outputs();
    let mut w = DenseMatrix::zeros(k, d);
    let mut b = vec![0.0; k];
    let mut vw = DenseMatrix::zeros(k, d);
    let mut vb = vec![0.0; k];
    let mut gw = DenseMatrix::zeros(k, d);
    let mut gb = vec![0.0; k];
    let mut logits = vec![0.0; k];
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = stream(seed, "probe/shuffle", 0);
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(cfg.batch_size) {
            gw.fill(0.0);
            gb.iter_mut().for_each(|g| *g = 0.0);
            for &i in chunk {
                let xi = x.row(i);
                for (c, l) in logits.iter_mut().enumerate() {
                    *l = b[c] + xi.iter().zip(w.row(c)).map(|(a, b)| a * b).sum::<f64>();
                }
                // dL/dlogit, scaled by example weight
                match labels {
                    Labels::Multiclass { y, .. } => {
                        let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                        let z: f64 = logits.iter().map(|l| (l - m).exp()).sum();
                        for (c, l) in logits.iter_mut().enumerate() {
                            let p = (*l - m).exp() / z;
                            *l = weights[i] * (p - (c == y[i]) as u8 as f64);
                        }
                    }
                    Labels::Multilabel { y, .. } => {
                        for (c, l) in logits.iter_mut().enumerate() {
                            let p = 1.0 / (1.0 + (-*l).exp());
                            *l = weights[i * k + c] * (p - y[i * k + c] as u8 as f64);
                        }
                    }
                }
                for (c, &g) in logits.iter().enumerate() {
                    if g == 0.0 {
                        continue;
                    }
                    gb[c] += g;
                    gw.row_mut(c).iter_mut().zip(xi).for_each(|(acc, v)| *acc += g * v);
                }
            }
            let inv = 1.0 / chunk.len() as f64;
            for ((wv, vv), gv) in w.data_mut().iter_mut().zip(vw.data_mut()).zip(gw.data()) {
                let g = gv * inv + cfg.weight_decay * *wv;
                *vv = cfg.momentum * *vv + g;
                *wv -= lr * *vv;
            }
            for ((bv, vv), gv) in b.iter_mut().zip(&mut vb).zip(&gb) {
                *vv = cfg.momentum * *vv + gv * inv;
                *bv -= lr * *vv;
            }
        }
        if !w.is_finite() || b.iter().any(|v| !v.is_finite()) {
            return None;
        }
    }
    Some(LinearProbe { kind: labels.kind(), standardizer: standardizer.clone(), weights: w, bias: b, lr, seed })
}

/// Trains a linear probe for every learning rate in the grid, keeps the one
/// with the best validation accuracy (averaged over seeds), and returns the
/// per-seed probes at that rate.
pub fn train_probe(
    train_x: &DenseMatrix,
    train_y: &Labels,
    val_x: &DenseMatrix,
    val_y: &Labels,
    cfg: &ProbeConfig,
    seed: u64,
) -> Result<ProbeFit> {
    cfg.validate()?;
    if train_x.rows() != train_y.len() || val_x.rows() != val_y.len() {
        return Err(Error::Data("probe features and labels are misaligned".into()));
    }
    if train_x.cols() != val_x.cols() {
        return Err(Error::Dimension { op: "train_probe", left: train_x.shape(), right: val_x.shape() });
    }
    if train_y.kind() != val_y.kind() || train_y.outputs() != val_y.outputs() {
        return Err(Error::Data("train and validation label spaces differ".into()));
    }
    if val_y.is_empty() {
        return Err(Error::Data("empty validation split".into()));
    }
    let weights = loss_weights(train_y)?;
    let standardizer = Standardizer::fit(train_x);
    let x = standardizer.apply(train_x);
    let mut best: Option<ProbeFit> = None;
    for &lr in &cfg.lr_grid {
        let mut probes = Vec::with_capacity(cfg.seeds);
        let mut acc = 0.0;
        for s in 0..cfg.seeds {
            let probe_seed = crate::rng::derive_seed(seed, "probe/seed", s as u64);
            match fit_one(&x, train_y, &weights, cfg, lr, probe_seed, &standardizer) {
                Some(p) => {
                    acc += class_balanced_accuracy(&p.predict(val_x), val_y)?;
                    probes.push(p);
                }
                None => break,
            }
        }
        if probes.len() < cfg.seeds {
            log::debug!("probe lr {lr} diverged");
            continue;
        }
        let val_accuracy = acc / cfg.seeds as f64;
        if best.as_ref().is_none_or(|b| val_accuracy > b.val_accuracy) {
            best = Some(ProbeFit { probes, val_accuracy });
        }
    }
    best.ok_or_else(|| Error::Diverged("probe diverged at every learning rate".into()))
}
