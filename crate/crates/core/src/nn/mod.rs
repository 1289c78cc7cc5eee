//! Small fully-connected networks: forward pass, reverse-mode gradients, Adam, checkpoints.

mod adam;
mod batch;
mod checkpoint;
mod mlp;

pub use adam::{adam_update, AdamState};
pub use batch::{mlp_backward_batch_into, mlp_forward_batch, mlp_predict_batch, BatchCache};
pub use checkpoint::{decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint};
pub use mlp::{
    mlp_backward, mlp_backward_into, mlp_forward, mlp_predict, softplus, Activation, Dense, ForwardCache, Mlp,
    MlpParams, MlpSpec, OutputTransform,
};
