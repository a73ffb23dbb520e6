use rand::Rng;

use super::infonce::{clip_loss, simclr_loss};
use super::{EncoderStack, HeadKind};
use crate::error::{Error, Result};
use crate::numkit::{l2_normalize_rows, l2_normalize_rows_backward, DenseMatrix};
use crate::synthworld::{augment_in_place, AugmentParams, Example, Vocabulary};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BatchLossResult {
    /// Mean over anchors.
    pub loss: f64,
    pub per_anchor_negative_count: usize,
    pub anchors: usize,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClipOptions {
    pub augment: AugmentParams,
    /// Average image→text and text→image; otherwise image→text only.
    pub symmetric: bool,
}

/// One augmented view per example, in batch order.
pub fn augmented_images(batch: &[&Example], augment: &AugmentParams, rng: &mut impl Rng) -> Result<DenseMatrix> {
    let dim = batch.first().map_or(0, |e| e.image.len());
    let mut m = DenseMatrix::zeros(batch.len(), dim);
    for (i, ex) in batch.iter().enumerate() {
        if ex.image.len() != dim {
            return Err(Error::Dimension { op: "augmented_images", left: (1, dim), right: (1, ex.image.len()) });
        }
        let row = m.row_mut(i);
        row.copy_from_slice(&ex.image);
        augment_in_place(row, augment, rng);
    }
    Ok(m)
}

/// Bag-of-words rows for the selected caption of each example.
pub fn caption_bags(batch: &[&Example], caption_index: &[usize], vocab: &Vocabulary) -> Result<DenseMatrix> {
    if caption_index.len() != batch.len() {
        return Err(Error::Data(format!("{} caption indices for {} examples", caption_index.len(), batch.len())));
    }
    let mut m = DenseMatrix::zeros(batch.len(), vocab.len());
    for (i, (ex, &c)) in batch.iter().zip(caption_index).enumerate() {
        let cap = ex
            .captions
            .get(c)
            .ok_or_else(|| Error::Data(format!("example has {} captions, index {c} requested", ex.captions.len())))?;
        vocab.bag_into(cap, m.row_mut(i));
    }
    Ok(m)
}

/// Image-only contrastive loss. Draws two views per example; each of the `2N`
/// views is an anchor whose positive is its sibling and whose negatives are
/// the other `2N − 2` views. Gradients accumulate into `stack`.
pub fn simclr_batch_loss(
    batch: &[&Example],
    augment: &AugmentParams,
    stack: &mut EncoderStack,
    rng: &mut impl Rng,
) -> Result<BatchLossResult> {
    let n = batch.len();
    if n < 2 {
        return Err(Error::BatchTooSmall { size: n, min: 2 });
    }
    if !stack.shared() {
        return Err(Error::Parameter("simclr needs a shared encoder stack".into()));
    }
    if stack.image.head.kind != HeadKind::MlpOneHidden {
        return Err(Error::Parameter("simclr needs an MLP projection head".into()));
    }
    let dim = batch[0].image.len();
    let mut views = DenseMatrix::zeros(2 * n, dim);
    for (i, ex) in batch.iter().enumerate() {
        for row in [i, i + n] {
            let r = views.row_mut(row);
            r.copy_from_slice(&ex.image);
            augment_in_place(r, augment, rng);
        }
    }
    simclr_from_views(&views, stack)
}

/// Image-only loss for prepared views (`2N` rows, siblings `N` apart).
pub fn simclr_from_views(views: &DenseMatrix, stack: &mut EncoderStack) -> Result<BatchLossResult> {
    let n = views.rows() / 2;
    let tau = stack.tau();
    let proj = stack.image.forward(views)?;
    let (z, norms) = l2_normalize_rows(&proj)?;
    let eg = simclr_loss(&z, tau)?;
    let gp = l2_normalize_rows_backward(&z, &norms, &eg.grad[0]);
    stack.image.backward(&gp)?;
    stack.temperature.accumulate(eg.grad_tau);
    Ok(BatchLossResult { loss: eg.loss, per_anchor_negative_count: 2 * n - 2, anchors: 2 * n })
}

/// Image-text contrastive loss. Example `i` is paired with its caption
/// `caption_index[i]`; negatives are the other `N − 1` items of the opposite
/// modality.
pub fn clip_batch_loss(
    batch: &[&Example],
    caption_index: &[usize],
    opts: &ClipOptions,
    vocab: &Vocabulary,
    stack: &mut EncoderStack,
    rng: &mut impl Rng,
) -> Result<BatchLossResult> {
    let n = batch.len();
    if n < 2 {
        return Err(Error::BatchTooSmall { size: n, min: 2 });
    }
    if stack.shared() {
        return Err(Error::Parameter("clip needs separate image and text encoders".into()));
    }
    let texts = caption_bags(batch, caption_index, vocab)?;
    let images = augmented_images(batch, &opts.augment, rng)?;
    clip_from_inputs(&images, &texts, opts.symmetric, stack)
}

pub fn clip_from_inputs(
    images: &DenseMatrix,
    texts: &DenseMatrix,
    symmetric: bool,
    stack: &mut EncoderStack,
) -> Result<BatchLossResult> {
    let n = images.rows();
    let tau = stack.tau();
    let pi = stack.image.forward(images)?;
    let text = stack.text.as_mut().ok_or_else(|| Error::Parameter("clip needs a text tower".into()))?;
    let pt = text.forward(texts)?;
    let (zi, ni) = l2_normalize_rows(&pi)?;
    let (zt, nt) = l2_normalize_rows(&pt)?;
    let eg = clip_loss(&zi, &zt, tau, symmetric)?;
    let gi = l2_normalize_rows_backward(&zi, &ni, &eg.grad[0]);
    let gt = l2_normalize_rows_backward(&zt, &nt, &eg.grad[1]);
    text.backward(&gt)?;
    stack.image.backward(&gi)?;
    stack.temperature.accumulate(eg.grad_tau);
    Ok(BatchLossResult { loss: eg.loss, per_anchor_negative_count: n - 1, anchors: if symmetric { 2 * n } else { n } })
}
