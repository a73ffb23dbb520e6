use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::TrainConfig;
use crate::error::{Error, Result};
use crate::numkit::{adam_step, AdamConfig, ScheduleConfig};
use crate::objective::{clip_batch_loss, simclr_batch_loss, ClipOptions, ContrastiveMode, EncoderConfig, EncoderStack};
use crate::rng::stream;
use crate::synthworld::{hex, Example, Vocabulary};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub stack: EncoderStack,
    pub loss_curve: Vec<f64>,
    pub config: TrainConfig,
    pub arch: EncoderConfig,
    pub data_fingerprint: String,
}

/// Caption used for an example at one visit. CLIP always takes the first
/// caption; `ClipS(K)` draws uniformly from the first `K` on every visit.
pub fn select_caption(example: &Example, mode: ContrastiveMode, rng: &mut impl Rng) -> Result<usize> {
    match mode {
        ContrastiveMode::Simclr => Ok(0),
        ContrastiveMode::Clip => {
            if example.captions.is_empty() {
                return Err(Error::Data("example has no caption".into()));
            }
            Ok(0)
        }
        ContrastiveMode::ClipS(k) => {
            if k == 0 || k > example.captions.len() {
                return Err(Error::Data(format!(
                    "clip_s({k}) needs {k} captions, example has {}",
                    example.captions.len()
                )));
            }
            Ok(rng.random_range(0..k))
        }
    }
}

/// SHA-256 over image bits and caption text, in order.
pub fn data_fingerprint(ds: &[Example]) -> String {
    let mut h = Sha256::new();
    h.update((ds.len() as u64).to_le_bytes());
    for ex in ds {
        for v in &ex.image {
            h.update(v.to_le_bytes());
        }
        for cap in &ex.captions {
            for t in cap {
                h.update(t.as_bytes());
                h.update([0]);
            }
            h.update([1]);
        }
        h.update([2]);
    }
    hex(&h.finalize())
}

/// Contrastive pre-training. Shuffles every epoch from a per-epoch stream,
/// drops the last partial batch and follows Adam with a warmup-cosine
/// schedule. Deterministic in `(ds, config, arch)`.
pub fn train(ds: &[Example], config: &TrainConfig, arch: &EncoderConfig, vocab: &Vocabulary) -> Result<TrainedModel> {
    config.validate()?;
    if ds.len() < config.batch_size {
        return Err(Error::Data(format!(
            "dataset has {} examples, fewer than one batch of {}",
            ds.len(),
            config.batch_size
        )));
    }
    if config.mode.is_language() && arch.text_input_dim != vocab.len() {
        return Err(Error::Parameter(format!(
            "text encoder expects {} inputs, vocabulary has {}",
            arch.text_input_dim,
            vocab.len()
        )));
    }
    if let ContrastiveMode::ClipS(k) = config.mode {
        if let Some(bad) = ds.iter().position(|e| e.captions.len() < k) {
            return Err(Error::Data(format!(
                "clip_s({k}): example {bad} has only {} captions",
                ds[bad].captions.len()
            )));
        }
    }

    let mut stack = EncoderStack::new(config.mode, arch, config.temperature, config.seed)?;
    let steps_per_epoch = (ds.len() / config.batch_size) as u64;
    // unit schedule scaled by lr, so lr = 0 is a valid (null) run
    let shape = ScheduleConfig {
        base_lr: 1.0,
        warmup_epochs: config.warmup_epochs,
        total_epochs: config.epochs,
        steps_per_epoch,
    };
    let adam = AdamConfig::default();
    let augment = config.augment.params();
    let clip_opts = ClipOptions { augment, symmetric: config.symmetric };

    let mut loss_curve = Vec::with_capacity(config.epochs as usize);
    let mut order: Vec<usize> = (0..ds.len()).collect();
    let mut global_step = 0u64;
    for epoch in 0..config.epochs {
        let mut shuffle_rng = stream(config.seed, "train/shuffle", epoch);
        let mut aug_rng = stream(config.seed, "train/augment", epoch);
        let mut cap_rng = stream(config.seed, "train/captions", epoch);
        order.sort_unstable();
        order.shuffle(&mut shuffle_rng);

        let mut total = 0.0;
        for (b, chunk) in order.chunks_exact(config.batch_size).enumerate() {
            let batch: Vec<&Example> = chunk.iter().map(|&i| &ds[i]).collect();
            let result = match config.mode {
                ContrastiveMode::Simclr => simclr_batch_loss(&batch, &augment, &mut stack, &mut aug_rng),
                mode => {
                    let idx =
                        batch.iter().map(|e| select_caption(e, mode, &mut cap_rng)).collect::<Result<Vec<_>>>()?;
                    clip_batch_loss(&batch, &idx, &clip_opts, vocab, &mut stack, &mut aug_rng)
                }
            }
            .map_err(|e| match e {
                Error::DegenerateVector { norm } if !norm.is_finite() => {
                    Error::Diverged(format!("non-finite embeddings at epoch {epoch}, step {b}"))
                }
                other => other,
            })?;
            if !result.loss.is_finite() {
                return Err(Error::Diverged(format!("non-finite loss at epoch {epoch}, step {b}")));
            }
            total += result.loss;
            let lr = config.lr * shape.lr_at_position(global_step as f64);
            for p in stack.params_mut() {
                adam_step(p, lr, config.weight_decay, &adam).map_err(|e| match e {
                    Error::Diverged(m) => Error::Diverged(format!("{m} at epoch {epoch}, step {b}")),
                    other => other,
                })?;
            }
            global_step += 1;
        }
        let mean = total / steps_per_epoch as f64;
        log::debug!("epoch {epoch}: loss {mean:.5}");
        loss_curve.push(mean);
    }

    Ok(TrainedModel {
        stack,
        loss_curve,
        config: config.clone(),
        arch: arch.clone(),
        data_fingerprint: data_fingerprint(ds),
    })
}
