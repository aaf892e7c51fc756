//! Numerical laboratory for the Loewner energy of Jordan curves and for
//! Brownian loop-measure quantities on lattice approximations.
//!
//! The crate is organised by subsystem:
//!
//! * [`geometry`]: closed polylines, winding numbers, Hausdorff distance and
//!   membership in annular neighbourhoods.
//! * [`maps`]: closed-form conformal test maps (Möbius, `z + c z²`, compositions).
//! * [`loewner`]: zipper numerics, driving functions, the rooted loop energy and
//!   the universal Liouville action.
//! * [`lattice`]: random-walk loop masses, normalized hitting masses, loop-soup
//!   sampling, outer boundaries and Werner-mass estimates.
//! * [`identities`]: the experiment harness comparing both sides of each
//!   identity, including the Onsager–Machlup checks.

pub mod error;
pub mod geometry;
pub mod identities;
pub mod lattice;
pub mod loewner;
pub mod maps;
pub mod quad;
pub mod stats;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
