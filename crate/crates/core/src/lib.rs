//! Frame-based erasure codes for distributed matrix-vector multiplication.
//!
//! * [`frames`] builds polynomial codes (USPC, NUSPC, NCP), random and
//!   harmonic frames, and difference sets, and checks tightness and
//!   equiangularity.
//! * [`spectra`] analyses sub-frames left after erasures: eigenvalues, noise
//!   amplification, condition numbers, and the Marchenko-Pastur and MANOVA
//!   reference laws.
//! * [`montecarlo`] estimates noise amplification over random erasure
//!   patterns, searches code families and runs redundancy sweeps.
//! * [`distsim`] simulates a full coded round: partition, encode, noisy
//!   workers, stragglers and least-squares decoding.
//! * [`cli`] drives the experiments from the command line.
//!
//! Monte-Carlo loops run on rayon when the `parallel` feature is enabled
//! (the default). Results do not depend on the thread count.

pub mod cli;
pub mod distsim;
pub mod error;
pub mod exec;
pub mod frames;
pub mod matrix;
pub mod montecarlo;
pub mod spectra;

pub use error::{Error, Result};
pub use exec::Execution;
pub use frames::{Frame, FrameKind, PolynomialCodeSpec};
pub use matrix::ComplexMatrix;
pub use spectra::{RetainedSet, SpectrumReport};
