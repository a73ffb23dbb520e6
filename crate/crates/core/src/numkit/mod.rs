//! Dense tensor math, analytic backpropagation for small MLPs, Adam and the
//! warmup-cosine learning-rate schedule. Everything is `f64`.

mod adam;
mod dense;
mod layers;
mod ops;
mod param;
mod schedule;

pub use adam::{adam_step, AdamConfig};
pub use dense::{dot, norm, DenseMatrix};
pub use layers::{Layer, Linear, Mlp};
pub use ops::{
    affine_backward, affine_forward, l2_normalize, l2_normalize_backward, l2_normalize_rows,
    l2_normalize_rows_backward, NORM_FLOOR,
};
pub use param::ParamTensor;
pub use schedule::{lr_at, ScheduleConfig};
