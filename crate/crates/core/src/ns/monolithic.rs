use log::debug;
use serde::{Deserialize, Serialize};

use super::config::{unit_dirichlet, TransientConfig};
use super::operator::{JacobianCache, NewtonOptions, NewtonStats, NsOperator};
use super::stokes::needs_pressure_pin;
use crate::error::{Error, Result};
use crate::fem::{assemble_pressure_mass, dirichlet_values, TaylorHoodSpace};
use crate::linalg::SparseMatrix;

/// Velocity and pressure coefficients at `t_n = n·Δt`, `n = 0..=M`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub u: Vec<Vec<f64>>,
    pub p: Vec<Vec<f64>>,
}

impl Trajectory {
    /// Trajectory holding only the zero initial condition.
    pub fn zero(n_velocity: usize, n_pressure: usize) -> Self {
        Self {
            times: vec![0.0],
            u: vec![vec![0.0; n_velocity]],
            p: vec![vec![0.0; n_pressure]],
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn push(&mut self, t: f64, u: Vec<f64>, p: Vec<f64>) {
        self.times.push(t);
        self.u.push(u);
        self.p.push(p);
    }
}

/// Removes the mean of `p` with respect to the pressure mass matrix.
pub fn zero_mean(p: &mut [f64], pressure_mass: &SparseMatrix) {
    let one = vec![1.0; p.len()];
    let m1 = pressure_mass.matvec(&one);
    let area: f64 = m1.iter().sum();
    let mean: f64 = m1.iter().zip(p.iter()).map(|(a, b)| a * b).sum::<f64>() / area;
    p.iter_mut().for_each(|v| *v -= mean);
}

/// One implicit Euler step on a single space. `x` holds the initial guess on
/// entry and the solution on exit; `load` is an extra velocity load.
#[allow(clippy::too_many_arguments)]
pub fn implicit_euler_step(
    op: &NsOperator,
    u_prev: &[f64],
    load: Option<&[f64]>,
    dirichlet: &[f64],
    x: &mut [f64],
    opts: &NewtonOptions,
    cache: &mut JacobianCache,
) -> Result<NewtonStats> {
    op.impose(x, dirichlet);
    let rhs = op.rhs(Some(u_prev), load);
    op.newton(x, &rhs, opts, cache)
}

/// Full-domain reference trajectory with zero initial velocity.
pub fn monolithic_solve(space: &TaylorHoodSpace, cfg: &TransientConfig) -> Result<Trajectory> {
    cfg.validate()?;
    let pin = needs_pressure_pin(space);
    let op = NsOperator::new(space.clone(), cfg.nu, Some(cfg.dt), cfg.skew, pin)?;
    let unit = dirichlet_values(space, unit_dirichlet(cfg.geometry))?;
    let mp = assemble_pressure_mass(space);
    let nv = space.n_velocity();
    let opts = NewtonOptions {
        tol: cfg.newton_tol,
        max_iter: cfg.newton_max,
        reuse_jacobian: true,
    };
    let mut cache = JacobianCache::default();
    let mut traj = Trajectory::zero(nv, space.n_pressure());
    let mut x = vec![0.0; op.n_total()];
    for n in 1..=cfg.n_steps() {
        let t = cfg.time(n);
        let alpha = cfg.amplitude(t);
        let values: Vec<f64> = unit.iter().map(|v| alpha * v).collect();
        let u_prev = traj.u[n - 1].clone();
        let stats = implicit_euler_step(&op, &u_prev, None, &values, &mut x, &opts, &mut cache)
            .map_err(|e| match e {
                Error::NewtonDiverged { .. } => Error::Invalid(format!("monolithic step {n}: {e}")),
                e => e,
            })?;
        debug!("monolithic step {n}: {} Newton iterations", stats.iterations);
        let mut p = x[nv..].to_vec();
        if pin {
            zero_mean(&mut p, &mp);
        }
        traj.push(t, x[..nv].to_vec(), p);
    }
    Ok(traj)
}
