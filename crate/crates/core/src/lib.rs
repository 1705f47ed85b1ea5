//! Symmetry-adapted sampled moment relaxations bounding quantum correlations
//! under Hilbert-space dimension constraints.

pub mod blockdiag;
pub mod linalg;
pub mod permgroup;
pub mod pipeline;
pub mod problems;
pub mod reynolds;
pub mod rng;
pub mod sampler;
pub mod scenario;
pub mod sdp;
