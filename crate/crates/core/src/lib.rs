//! Numerical workbench for coding over compound quantum channels.
//!
//! The crate is organized around the building blocks of the compound-channel
//! direct coding theorem at small Hilbert-space dimension:
//!
//! - [`qmat`] — dense complex linear algebra (states, purifications, Haar
//!   sampling, norms),
//! - [`channels`] — quantum channels in Kraus form, complementary channels,
//!   averaged channels and diamond-norm distance estimation,
//! - [`information`] — entropic quantities, entanglement fidelity and
//!   recovery-map optimization,
//! - [`typicality`] — frequency-typical projections and typical Kraus
//!   reductions with measured certificates,
//! - [`coding`] — the randomized one-shot coding bound and its Monte Carlo
//!   verification,
//! - [`compound`] — channel nets, discrimination, code conversion and
//!   capacity lower-bound estimation.
//!
//! All randomized routines take explicit seeds and are reproducible bit for
//! bit at a fixed crate version.

// Index loops are the clearer idiom for the matrix kernels in this crate.
#![allow(clippy::needless_range_loop)]

pub mod channels;
pub mod coding;
pub mod compound;
pub mod error;
pub mod information;
pub mod qmat;
pub mod tol;
pub mod typicality;

pub use channels::{AveragedChannel, ChannelFamily, KrausChannel};
pub use error::{Error, Result};
pub use qmat::{CMatrix, DensityOperator, PureState};
