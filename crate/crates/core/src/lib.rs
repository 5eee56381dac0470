//! Gaussian unitaries on the metaplectic and spin double covers.

pub mod cartan;
pub mod circle_cocycle;
pub mod complexify;
pub mod double_cover;
pub mod error;
pub mod expectation;
pub mod io;
pub mod linalg;
pub mod normal_form;
pub mod oracle;
pub mod phase_space;
pub mod selftest;
pub mod superposition;
pub mod wick;

pub use error::{Error, Result};
pub use phase_space::{GroupElement, KahlerStructure, LieGenerator, Statistics};
