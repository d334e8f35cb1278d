//! Loss, optimizers, learning-rate schedule, batching, and the training loop.

mod batching;
mod fit;
mod loss;
mod optim;

pub use batching::{cluster_batches, make_segments, segment_batches, TrainExample};
pub use fit::{
    evaluate_corpus, fit, lr_at_epoch, train_step_single, train_step_two_opt, Batching,
    EpochLog, FitResult, Regime, TrainConfig,
};
pub use loss::{
    backward_only_loss, batch_loss, l2_penalty, loss_and_gradients, sequence_loss, Objective,
};
pub use optim::{adam_update, sgd_momentum_update, Adam, Optimizer, OptimizerKind, SgdMomentum};
