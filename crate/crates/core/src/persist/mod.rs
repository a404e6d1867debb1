//! Bit-exact file formats: datasets ("MTMD") and checkpoints ("MTCK").

pub mod bytes;
pub mod checkpoint;
pub mod crc32;
pub mod dataset_file;

pub use checkpoint::{Checkpoint, NamedTensor};
pub use crc32::crc32;
pub use dataset_file::{decode_dataset, encode_dataset, load_dataset, save_dataset};
