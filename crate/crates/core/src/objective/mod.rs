//! The shared contrastive primitive and its two matched specializations.
//!
//! Both regimes score cosine similarities (dot products of unit embeddings)
//! through the same InfoNCE form. They differ in where the positive comes
//! from, which negatives each anchor sees, whether the encoders are shared,
//! and the projection head:
//!
//! | regime | positive | negatives / anchor | encoders | head |
//! |---|---|---|---|---|
//! | SimCLR | second augmented view | `2N − 2` | shared | MLP |
//! | CLIP | caption | `N − 1` | separate | linear |

mod batch;
mod infonce;
mod stack;

pub use batch::{
    augmented_images, caption_bags, clip_batch_loss, clip_from_inputs, simclr_batch_loss, simclr_from_views,
    BatchLossResult, ClipOptions,
};
pub use infonce::{clip_loss, info_nce, simclr_loss, EmbeddingGrads, InfoNce};
pub use stack::{ContrastiveMode, EncoderConfig, EncoderStack, HeadKind, ProjectionHead, Temperature, Tower};
