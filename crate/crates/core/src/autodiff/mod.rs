//! Reverse-mode differentiation over dense matrices, plus the optimizer,
//! initializer and checkpoint format used to train models on top of it.

mod adam;
mod checkpoint;
pub mod gradcheck;
mod init;
mod tape;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use checkpoint::{decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint};
pub use init::{glorot_init, glorot_uniform};
pub use tape::{Gradients, Tape, Var};
