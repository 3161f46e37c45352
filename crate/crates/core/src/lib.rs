//! Active-learning scene selection for class-imbalanced 3D detection pools.
//!
//! The crate covers the full query loop at desk scale: a synthetic scene generator, a
//! linear surrogate detector head with MC-dropout predictions, class-balanced gradient
//! embeddings, submodular subset selection, label-entropy balancing and baseline
//! strategies, plus a self-check battery over the numerical invariants.

pub mod balance;
pub mod config;
pub mod error;
pub mod math;
pub mod oracle;
pub mod pipeline;
pub mod pool;
pub mod reweigh;
pub mod rng;
pub mod submodular;
pub mod synth;
pub mod types;
pub mod verify;

pub use config::{AlConfig, StageFlags, SubmodularKind};
pub use error::{Result, StoneError};
pub use pipeline::{run_experiment, RoundRecord, Strategy};
pub use pool::PoolState;
pub use types::{BoxAnnotation, ClassId, Difficulty, Scene, SceneCatalog, SceneId};
