//! Numerical core for thin nematic films in the Landau–de Gennes Q-tensor model.
//!
//! The crate is `no_std` (with `alloc`) and contains only pure computation:
//!
//! - [`qtensor`]: symmetric traceless 3×3 tensors, spectra, z-rotations and loop degree.
//! - [`potential`]: bulk and surface densities, the normalized potential `W`, its wells,
//!   the equilibrium order parameter and the eigenvector analysis of the minimizers.
//! - [`metric`]: the degenerate distance with conformal factor `√W`, geodesic relaxation,
//!   the boundary-layer profile and one-dimensional layer energies.
//! - [`domain`]: masked planar grids (disk, strip, dumbbell), signed distance, projection
//!   onto the boundary and Dirichlet data.
//! - [`solver`]: discrete 2D and thin-3D energies, gradient-flow minimization, the `Λ`
//!   pseudo-distance and defect detection.
//! - [`gamma`]: the limit partition functional on polygonal partitions and the dumbbell
//!   local-minimality experiment.
//!
//! File formats, configuration and the command line live in the companion `nemfilm` crate.
#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod domain;
pub mod error;
pub mod gamma;
pub mod math;
pub mod metric;
pub mod optim;
pub mod potential;
pub mod qtensor;
pub mod solver;

pub use error::{Error, Result};
pub use qtensor::{Degree, QTensor};
