//! Zero-shot covariate likelihood-ratio estimation from context features.
//!
//! A single scalar network `g(x, c)` is trained, over many context pairs, to
//! classify which context produced a covariate. Ratios are then read off as
//! `exp(g(x, c1) - g(x, c2))` for a context pair, or with the mean potential
//! of a context set in the second slot for mixture calibration. The
//! exponential-of-difference form makes the reciprocal symmetry
//! `ratio(x, c1, c2) * ratio(x, c2, c1) = 1` hold by construction, and the
//! mean over the set makes the mixture form permutation invariant.

mod checkpoint;
mod error;
mod loss;
mod model;
mod optim;
mod train;

pub use checkpoint::{load_checkpoint, save_checkpoint, CHECKPOINT_FORMAT_VERSION};
pub use error::RatioMetaError;
pub use loss::{mixture_loss, mixture_loss_and_grad, pairwise_loss, pairwise_loss_and_grad, LabeledPairBatch};
pub use model::{ArchMeta, FeatureNorm, RatioModel, RATIO_EXPONENT_CLAMP};
pub use optim::{adam_step, AdamState, EstimatorMode, TrainConfig};
pub use train::meta_train;

pub type Result<T> = std::result::Result<T, RatioMetaError>;
