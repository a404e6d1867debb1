//! Multi-task learning stack for planar manipulation.
//!
//! A 64-bit reverse-mode tensor engine, a shared-trunk convolutional network
//! with grasp/push/poke heads, joint RMSProp training, a deterministic
//! synthetic 2D world that produces oracle-labeled samples, bit-exact dataset
//! and checkpoint formats, and experiment drivers that compare multi-task
//! against task-specific training.

pub mod data;
pub mod error;
pub mod experiment;
pub mod gradcheck;
pub mod graph;
pub mod loss;
pub mod net;
pub mod ops;
pub mod optim;
pub mod persist;
pub mod rng;
pub mod tensor;
pub mod train;
pub mod world;

pub use error::{Error, Result};
pub use graph::Graph;
pub use ops::Mode;
pub use rng::Rng;
pub use tensor::Tensor;
