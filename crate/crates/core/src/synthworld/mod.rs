//! The controllable multimodal world: latent scenes, feature-space images,
//! image augmentations and captions with independent quality knobs.

mod augment;
mod caption;
mod dataset;
mod io;
mod scene;
mod universe;

pub use augment::{augment_image, augment_in_place, AugmentParams, AugmentPolicy};
pub use caption::{generate_caption, render_caption, Caption, CaptionKnobs};
pub use dataset::{build_dataset, build_example, recaption, DatasetSpec, Example};
pub use io::{load_dataset, read_dataset, save_dataset, write_dataset, DatasetHeader};
pub use scene::{render_image, LatentScene, SceneSampler};
pub(crate) use universe::hex;
pub use universe::{ObjectUniverse, Template, TokenKind, UniverseConfig, Vocabulary, MAX_TEMPLATES};
