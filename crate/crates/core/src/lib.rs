//! Networks of one-dimensional port-Hamiltonian PDEs coupled through
//! boundary ports and finite-dimensional linear controllers.
//!
//! The crate certifies well-posedness of a network through algebraic
//! dissipativity tests on boundary flux forms, discretizes it with an
//! energy-consistent collocation scheme, and checks stability numerically
//! through spectra, resolvent scans and contractive time stepping.

pub mod analysis;
pub mod discretize;
pub mod io;
pub mod linalg;
pub mod model;
pub mod network;
pub mod passivity;
pub mod scenarios;
pub mod simulate;
