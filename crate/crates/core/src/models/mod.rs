//! Model zoo: bias-free NTP ReLU networks and the two-layer linear `uv`
//! model.

mod checkpoint;
mod fcn;
mod uv;

pub use checkpoint::{read_params, write_params, CheckpointHeader};
pub use fcn::{
    forward_batch, forward_fcn, init_fcn, Activation, ArchConfig, NetworkParams, PrefactorMode,
};
pub use uv::{init_uv, uv_hessian, uv_reduce, uv_top_eigenvalue, UvReduced, UvState};
