//! The pre-training loop: batching, caption selection, optimizer and
//! schedule, plus checkpoint files.

mod checkpoint;
mod config;
mod train;

pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, CHECKPOINT_VERSION};
pub use config::{default_config, desk_config, scaled_epochs, TrainConfig};
pub use train::{data_fingerprint, select_caption, train, TrainedModel};
