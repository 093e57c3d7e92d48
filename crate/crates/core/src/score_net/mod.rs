//! Feed-forward score network `NN(t, x)` with hand-written backpropagation,
//! and the denoising score-matching trainer.

mod embed;
mod mlp;
mod net;
mod train;

pub use embed::TimeEmbedding;
pub use mlp::{Activation, MlpParams};
pub use net::{gradient_check, Batch, LossWeighting, ScoreNet};
pub use train::{train_from, train_score, Adam, ScoreTarget, TrainConfig, TrainOutput};
