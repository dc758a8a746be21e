//! Two-stream discrepancy network.
//!
//! Both the original image and its inpainted counterpart go through a
//! shared-weight convolutional backbone. At every pyramid level the two
//! feature maps are fused by a 1×1 convolution over their concatenation,
//! and their per-pixel cosine similarity is appended as one more channel.
//! A transposed-convolution decoder with SeLU activations and skip
//! connections turns the fused pyramid into two logits per pixel; the
//! softmax obstacle probability, multiplied by the drivable-area mask, is
//! the output heatmap.
//!
//! The crate carries its own small CPU engine (im2col convolutions on top
//! of `matrixmultiply`) with hand-written backward passes, plus the Adam
//! training loop with a reduce-on-plateau schedule and JSON checkpoints.

pub mod checkpoint;
pub mod error;
pub mod layers;
pub mod loss;
pub mod model;
pub mod optim;
pub mod tensor;
pub mod train;

pub use checkpoint::{load_backbone, Checkpoint, NamedTensor, CHECKPOINT_FORMAT};
pub use error::{NetError, Result};
pub use layers::pointwise_correlation;
pub use loss::{weighted_bce, weighted_bce_logits, BceOutput};
pub use model::{sigmoid, DiscrepancyNet, ForwardCache, ModelConfig, Sample};
pub use optim::{Adam, AdamParams, PlateauScheduler};
pub use tensor::Tensor;
pub use train::{mean_loss, train, HistoryRow, TrainConfig, TrainOutcome};
