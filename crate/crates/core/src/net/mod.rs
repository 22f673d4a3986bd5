//! Auto-encoder with a trainable complex measurement matrix.
//!
//! The encoder computes `Y = AX + Z` with `A = Re(A) + i·Im(A)` as weights.
//! The decoder has an approximation part of `U` unrolled PCD-MMV iterations
//! (sharing `A` with the encoder) followed by a correction part of `V` dense
//! layers applied row by row: each row of the PCD estimate becomes the
//! 2M-vector `[Re row ‖ Im row]`, and two separate branches map it to the real
//! and imaginary parts of that output row.
//!
//! Samples are batched side by side: a batch of `B` samples is an
//! `N × (B·M)` complex matrix whose columns `b·M..(b+1)·M` hold sample `b`.

mod forward;
mod params;

pub use forward::{
    approximation_forward, autoencoder_forward, correction_forward, encoder_forward,
    forward_batch, pcd_layer_forward, BranchTrace, ForwardTrace, LayerState, LayerTrace,
};
pub(crate) use forward::{stack_rows, unstack_rows};
pub use params::{DenseLayer, NetArch, NetworkParams};
