//! Optimisation-based domain decomposition for the transient incompressible
//! Navier–Stokes equations, with POD–Galerkin and POD–NN reduced models.

pub mod dd;
pub mod error;
pub mod fem;
pub mod harness;
pub mod linalg;
pub mod mesh;
pub mod ns;
pub mod par;
pub mod pod;
pub mod podnn;
pub mod rom;

pub use error::{Error, Result};
