//! Neural instruction followers (CGA, CGAE, CGAEW) built on a small
//! reverse-mode autodiff kernel.

pub mod autodiff;
pub mod beam;
pub mod checkpoint;
pub mod follower;
pub mod gradcheck;
pub mod model;
pub mod train;

pub use beam::{beam_search, greedy, Decoded, SearchConfig};
pub use follower::{NeuralFactory, NeuralFollower};
pub use model::{Architecture, Model, ModelConfig, Variant};
pub use train::{fit, train, TrainError, TrainLog};
