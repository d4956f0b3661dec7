//! Per-step interface optimal control between two subdomains.

mod optim;
mod problem;
mod time_loop;

pub use optim::{lbfgs_minimize, InnerProduct, LbfgsOptions, OptimReport, Termination};
pub use problem::{eval_functional, monolithic_space, subdomain_spaces, DdConfig, DdProblem, Subdomain};
pub use time_loop::{
    dd_time_loop, monolithic_restriction_run, normalize_pressures, write_step_csv, DdRun, PressureGauge, Restriction,
};
