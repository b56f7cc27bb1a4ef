//! Deterministic differentiable numeric core: tensors, a reverse-mode
//! tape, the layer primitives the bridge model needs, Adam, a
//! finite-difference gradient checker, and bit-exact model persistence.

pub mod adam;
pub mod gradcheck;
pub mod io;
pub mod nn;
pub mod ops;
pub mod rng;
pub mod tape;
pub mod tensor;

pub use adam::{Adam, AdamConfig};
pub use gradcheck::{grad_check, GradCheckReport};
pub use nn::{encoder_forward, gru_step, Encoder, EncoderConfig, GruCell, Params};
pub use ops::{argmax, cross_entropy, dropout, sample_categorical, softmax};
pub use rng::Rng;
pub use tape::{Tape, VarId};
pub use tensor::Tensor;
