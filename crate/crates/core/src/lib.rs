//! Nonnegative CP decomposition of dense tensors.
//!
//! The crate is organized bottom-up:
//!
//! * [`tensor`], [`matrix`], [`kruskal`], [`io`]: dense storage, the small
//!   linear-algebra kernels, CP models and the binary file formats.
//! * [`mttkrp`], [`dimtree`]: the MTTKRP family and the dimension-tree
//!   scheduler that shares partial results across modes.
//! * [`nls`]: nonnegative least squares updates (block principal pivoting,
//!   HALS) for the per-mode subproblem.
//! * [`nncp`]: the sequential block coordinate descent driver.
//! * [`par`]: a virtual processor grid with collectives, communication
//!   accounting and an alpha-beta cost model.
//! * [`par_nncp`]: the distributed driver, processor-grid selection and
//!   leading-order cost estimates.
//! * [`cli`]: the commands behind the `nncp` binary.

pub mod cli;
pub mod dimtree;
pub mod error;
pub mod io;
pub mod kruskal;
pub mod matrix;
pub mod mttkrp;
pub mod nls;
pub mod nncp;
pub mod par;
pub mod par_nncp;
pub mod tensor;

pub use error::{Error, Result};
pub use kruskal::KruskalModel;
pub use matrix::{FactorMatrix, Matrix};
pub use tensor::DenseTensor;
