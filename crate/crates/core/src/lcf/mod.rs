//! Link speed estimation from network attributes and the mean-speed history.
//!
//! A spatial branch (graph attention or a dense layer) embeds every link, an
//! optional GRU embeds the recent network mean speed, and a fully connected
//! head maps the joined embedding to one output per link.

mod arch;
mod checkpoint;
mod gat;
mod gru;
mod head;
mod model;
mod train;

pub use arch::{decode_output, ArchConfig, OutputType, Variant};
pub use checkpoint::{checkpoint_text, load_checkpoint, parse_checkpoint, save_checkpoint};
pub use gat::{attention_mask, gat_layer, GatHead, GatLayerParams};
pub use gru::{gru_encode, GruParams};
pub use head::{fuse_and_estimate, Dense, FcHead};
pub use model::{history_window, BatchItem, LcfModel, NetworkInput, Normalization, Spatial};
pub use train::{evaluate_loss, fit_normalization, train, Corpus, TrainConfig, TrainReport, TrainingData};
