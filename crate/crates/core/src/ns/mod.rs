//! Transient incompressible Navier–Stokes solves.

mod config;
mod monolithic;
mod operator;
mod stokes;

pub use config::{inlet_profile, ramp, unit_dirichlet, Geometry, TransientConfig};
pub use monolithic::{implicit_euler_step, monolithic_solve, zero_mean, Trajectory};
pub use operator::{JacobianCache, NewtonOptions, NewtonStats, NsOperator};
pub use stokes::{lifting_solve, needs_pressure_pin, supremiser_solve, SupremiserSolver};
