//! Hyperspectral cube processing: I/O, calibration, restoration, fusion,
//! dimensionality reduction, classification and spectral unmixing.

// range checks are written `!(x > 0.0)` so that NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod calib;
pub mod classify;
pub mod cube;
pub mod dimred;
pub mod enhance;
pub mod envi;
pub mod error;
pub mod linalg;
pub mod ops;
pub mod quicklook;
pub mod restore;
pub mod solver;
pub mod synth;
pub mod textio;
pub mod unmix;

pub use cube::{HyperCube, Interleave, MaskPlane, MetadataRecord, Quantity, SpectralAxis};
pub use error::{ErrorCategory, HsiError, Result};
