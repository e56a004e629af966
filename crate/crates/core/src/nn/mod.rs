//! Dense networks with batch normalisation and dropout, trained by
//! hand-derived backpropagation.

pub mod gradcheck;
pub mod layers;
pub mod network;
pub mod spec;

pub use gradcheck::{grad_check, GradCheckReport};
pub use network::{Block, DropoutMasks, ForwardCache, Gradients, Mode, Network};
pub use spec::{Activation, HiddenStyle, LayerSpec, NetworkSpec};
