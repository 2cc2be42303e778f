//! The dropout network: masked forward pass, losses, the weight-decayed cost,
//! exact gradients and a momentum SGD trainer.

mod cost;
mod grad;
mod network;
mod train;

pub use cost::{
    dropout_cost, euclidean_loss, predict_with_masks, sample_masks_per_point, softmax_loss,
    HyperParams, WeightDecay,
};
pub use grad::gradients;
pub use network::{
    forward, forward_unmasked, mask_weight_rows, sample_multiplicative_gaussian_mask,
    validate_keep_probs, MaskSet, NetworkSpec, Nonlinearity, ParamSet,
};
pub use train::{learning_rate, sgd_train, minibatch_cost, Schedule, TrainOutput};
