//! Relational Q-network over ground atoms.
//!
//! The state, the applicable actions and the goal are encoded as one set of
//! atoms over an extended vocabulary (one extra object per applicable
//! action). Message passing produces an embedding per object; the Q-value of
//! an action is read out from its object's embedding together with the sum of
//! the embeddings of the problem's own objects.

mod checkpoint;
mod encode;
mod network;
mod vocab;

use thiserror::Error;

pub use checkpoint::{
    load_checkpoint, read_header, save_checkpoint, sidecar_path, CheckpointHeader, CHECKPOINT_MAGIC,
    CHECKPOINT_VERSION,
};
pub use encode::{encode, EncodedAtom, EncodedInput};
pub use network::{QBatch, QNetwork, LAYER_NORM_EPS};
pub use vocab::Vocabulary;

/// Floating-point types the network can run in.
pub trait Scalar:
    ndarray::LinalgScalar
    + ndarray::ScalarOperand
    + num_traits::Float
    + num_traits::FromPrimitive
    + std::ops::AddAssign
    + std::ops::SubAssign
    + std::ops::MulAssign
    + std::iter::Sum
    + std::fmt::Debug
    + std::fmt::Display
    + Send
    + Sync
    + 'static
{
    fn of(x: f64) -> Self {
        <Self as num_traits::FromPrimitive>::from_f64(x).expect("representable")
    }

    fn as_f64(self) -> f64 {
        num_traits::ToPrimitive::to_f64(&self).expect("finite")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

#[derive(Debug, Error)]
pub enum QNetError {
    #[error("predicate `{0}` is not part of the network vocabulary")]
    UnknownPredicate(String),
    #[error("input was encoded for vocabulary {found:016x}, network expects {expected:016x}")]
    VocabularyMismatch { expected: u64, found: u64 },
    #[error("backward called without a recorded forward pass")]
    NoRecordedForward,
    #[error("gradient has {found} entries, forward pass produced {expected} outputs")]
    GradientShape { expected: usize, found: usize },
    #[error("checkpoint i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("not a checkpoint file (bad magic)")]
    BadMagic,
    #[error("unsupported checkpoint version {0}")]
    BadVersion(u32),
    #[error("checkpoint has {found} parameters, expected {expected}")]
    ParameterCount { expected: usize, found: usize },
    #[error("checkpoint sidecar: {0}")]
    Sidecar(#[from] serde_json::Error),
}
