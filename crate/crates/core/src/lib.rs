//! Time-domain electro-sensing in two dimensions.
//!
//! The crate simulates pulse-type multi-static response data produced by a
//! conductive and permittive target, reconstructs the filtered first-order
//! polarization tensor from limited-view noisy data, turns it into a
//! multi-scale descriptor invariant under rigid motions and dilations, and
//! identifies the target against a dictionary of reference shapes.
//!
//! Module overview:
//!
//! * [`geometry`]: shape parameterizations, panel meshes, rigid motions.
//! * [`potentials`]: single layer and Neumann–Poincaré matrices, spectral data.
//! * [`pulse`]: the causal band-pass pulse and its dyadic dilations.
//! * [`gpt`]: frequency-domain and filtered polarization tensors.
//! * [`acquisition`]: source/receiver arrays and the linear forward operator.
//! * [`forward`]: time-stepping solver and noise model.
//! * [`inversion`]: least-squares reconstruction of the filtered tensor.
//! * [`descriptors`]: invariant descriptors, dictionaries and matching.
//! * [`experiments`]: identification runs and Monte Carlo studies.

pub mod acquisition;
pub mod descriptors;
pub mod error;
pub mod exec;
pub mod experiments;
pub mod forward;
pub mod fourier;
pub mod geometry;
pub mod gpt;
pub mod inversion;
pub mod io;
pub mod linalg;
pub mod potentials;
pub mod pulse;

pub use error::{Error, Result};
pub use geometry::{apply_motion, make_shape, BoundaryMesh, Material, RigidMotion, ShapeId, Vec2};
