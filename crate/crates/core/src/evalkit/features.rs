use crate::error::{Error, Result};
use crate::numkit::DenseMatrix;
use crate::synthworld::Example;
use crate::trainer::TrainedModel;

const CHUNK: usize = 1024;

/// Frozen image-encoder outputs (before the projection head) for a matrix
/// of images, one row per image.
pub fn encode_images(model: &TrainedModel, images: &DenseMatrix) -> Result<DenseMatrix> {
    if !model.stack.is_finite() {
        return Err(Error::Diverged("model parameters are not finite".into()));
    }
    let tower = &model.stack.image;
    let width = tower.encoder.out_dim();
    let mut data = Vec::with_capacity(images.rows() * width);
    let mut start = 0;
    while start < images.rows() {
        let end = (start + CHUNK).min(images.rows());
        let idx: Vec<usize> = (start..end).collect();
        data.extend(tower.features(&images.select_rows(&idx))?.into_vec());
        start = end;
    }
    DenseMatrix::from_vec(images.rows(), width, data)
}

/// Frozen features for a list of examples.
pub fn extract_features(model: &TrainedModel, ds: &[Example]) -> Result<DenseMatrix> {
    let rows: Vec<&[f64]> = ds.iter().map(|e| e.image.as_slice()).collect();
    if rows.is_empty() {
        return Ok(DenseMatrix::zeros(0, model.stack.image.encoder.out_dim()));
    }
    encode_images(model, &DenseMatrix::from_rows(&rows)?)
}
