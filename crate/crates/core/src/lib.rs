//! Matched image-only and image-language contrastive pre-training over a
//! controllable synthetic world, with caption interventions and a
//! linear-probe transfer harness.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod captionops;
pub mod error;
pub mod evalkit;
pub mod experiment;
pub mod numkit;
pub mod objective;
pub mod rng;
pub mod synthworld;
pub mod trainer;

pub use error::{Error, Result};
pub use objective::{ContrastiveMode, EncoderConfig, EncoderStack};
pub use synthworld::{CaptionKnobs, DatasetSpec, Example, ObjectUniverse, UniverseConfig};
