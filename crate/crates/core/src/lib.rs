//! Exact-arithmetic analysis of half-DoF-per-user interference alignment for
//! constant single-antenna interference channels.

pub mod channel;
pub mod codebook;
pub mod diagnostics;
pub mod dofengine;
pub mod exactnum;
pub mod separability;
pub mod serial;
