//! Reverse-mode differentiation for the small networks used by the agents.

mod adam;
pub mod gradcheck;
mod layers;
mod params;
mod sampling;
pub mod special;
mod tape;

pub use adam::AdamState;
pub use layers::{Dense, ElmanCell};
pub use params::{ParamId, Parameter, ParameterStore};
pub use sampling::{beta_sample, categorical_sample};
pub use tape::{
    beta_entropy, beta_log_density, softmax_values, softplus, Bound, Gradients, Tape, Var,
    BETA_CLAMP,
};
