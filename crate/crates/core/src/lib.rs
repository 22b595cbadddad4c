//! Simulation and estimation for two-crystal induced-coherence interferometry
//! with polarization.
//!
//! The engine evolves a sparse biphoton state through wave plates,
//! beamsplitters, dichroic mirrors and phase shifters, then reads out
//! polarization-resolved counts on a detection path. Source tags track
//! which-crystal information; only modes whose tags have been merged can
//! interfere.

pub mod angle;
pub mod circuit;
pub mod elements;
pub mod error;
pub mod estimation;
pub mod jones;
pub mod observables;
pub mod reference;
pub mod state;
pub mod table;

pub use num_complex::Complex64;
