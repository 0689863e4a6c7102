//! Invertible emission maps built from affine coupling and Householder
//! orthogonal layers.

mod coupling;
mod mlp;
mod orthogonal;
mod stack;

pub use coupling::{CouplingCache, CouplingLayer, SCALE_BOUND};
pub use mlp::{param_count, Mlp, MlpCache};
pub use orthogonal::{OrthogonalCache, OrthogonalLayer};
pub use stack::{FlowConfig, FlowStack, InverseCache, Layer, LayerSpec};
