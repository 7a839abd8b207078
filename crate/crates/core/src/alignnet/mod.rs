//! The mapping network: two ReLU hidden layers with an L2-normalized
//! output, trained with a triplet hinge loss and weight decay by plain
//! (optionally momentum) SGD, re-mining triplets and hubs every epoch.

mod loss;
mod mlp;
mod train;

pub use loss::{backward, batch_gradient, objective, triplet_loss, triplet_output_grads, TripletGradient};
pub use mlp::{backward_into, forward, ForwardCache, MlpParams, MlpShape};
pub use train::{
    map_embeddings, train, train_with_hook, EpochHook, EpochRecord, StopReason, TrainConfig,
    TrainReport,
};
