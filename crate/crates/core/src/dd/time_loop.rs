use std::io::Write;

use log::{info, warn};
use serde::{Deserialize, Serialize};

use super::optim::{OptimReport, Termination};
use super::problem::DdProblem;
use crate::error::{check_len, Error, Result};
use crate::fem::{assemble_divergence, assemble_interface_coupling, assemble_pressure_mass, TaylorHoodSpace};
use crate::linalg::SparseMatrix;
use crate::ns::{Geometry, Trajectory};

/// Output of a DD-FOM time loop. `controls[n−1]` and `reports[n−1]` belong
/// to step `n`. For the cavity the recorded pressures and controls are
/// gauge-normalised (see [`PressureGauge`]).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DdRun {
    pub trajectories: [Trajectory; 2],
    pub reports: Vec<OptimReport>,
    pub controls: Vec<Vec<f64>>,
}

impl DdRun {
    pub fn iterations(&self) -> Vec<usize> {
        self.reports.iter().map(|r| r.iterations).collect()
    }

    pub fn mean_iterations(&self) -> f64 {
        if self.reports.is_empty() {
            return 0.0;
        }
        self.reports.iter().map(|r| r.iterations as f64).sum::<f64>() / self.reports.len() as f64
    }
}

/// Shifts both subdomain pressures by one constant so that the combined
/// field has zero mean over Ω. Returns the constant that was subtracted.
pub fn normalize_pressures(p1: &mut [f64], p2: &mut [f64], mp1: &SparseMatrix, mp2: &SparseMatrix) -> f64 {
    let w1 = mp1.matvec(&vec![1.0; p1.len()]);
    let w2 = mp2.matvec(&vec![1.0; p2.len()]);
    let area: f64 = w1.iter().sum::<f64>() + w2.iter().sum::<f64>();
    let dot = |w: &[f64], p: &[f64]| w.iter().zip(p).map(|(a, b)| a * b).sum::<f64>();
    let c = (dot(&w1, p1) + dot(&w2, p2)) / area;
    p1.iter_mut().chain(p2.iter_mut()).for_each(|v| *v -= c);
    c
}

/// Pressure normaliser used for the cavity, where the pressure is only
/// determined up to a constant.
///
/// Shifting both pressures by `c` changes nothing in the coupled problem
/// once the control is shifted by `c·n`, with `n` the outward normal of Ω₁
/// on Γ₀; [`PressureGauge::apply`] does both so that the recorded
/// `(u, p, g)` still solve the subdomain equations.
#[derive(Debug, Clone)]
pub struct PressureGauge {
    masses: Option<[SparseMatrix; 2]>,
    normal: Vec<f64>,
}

impl PressureGauge {
    pub fn new(geometry: Geometry, s1: &TaylorHoodSpace, s2: &TaylorHoodSpace) -> Result<Self> {
        if geometry != Geometry::Cavity {
            return Ok(Self {
                masses: None,
                normal: Vec::new(),
            });
        }
        Ok(Self {
            masses: Some([assemble_pressure_mass(s1), assemble_pressure_mass(s2)]),
            normal: interface_normal(s1)?,
        })
    }

    /// Normalises the pressures and shifts the control accordingly.
    pub fn apply(&self, p1: &mut [f64], p2: &mut [f64], g: &mut [f64]) {
        if let Some([m1, m2]) = &self.masses {
            let c = normalize_pressures(p1, p2, m1, m2);
            for (gi, ni) in g.iter_mut().zip(&self.normal) {
                *gi -= c * ni;
            }
        }
    }
}

/// Constant trace vector `n` with `Mγ n = Bᵀ1` on the free interface dofs
/// (least squares over the two components), i.e. the outward normal of the
/// subdomain on a straight interface.
fn interface_normal(space: &TaylorHoodSpace) -> Result<Vec<f64>> {
    let div = assemble_divergence(space);
    let h = div.tr_matvec(&vec![1.0; space.n_pressure()]);
    let (_, mg) = assemble_interface_coupling(space)?;
    let nt = space.trace_dim() / 2;
    let ex: Vec<f64> = (0..2 * nt).map(|k| if k < nt { 1.0 } else { 0.0 }).collect();
    let ey: Vec<f64> = ex.iter().map(|v| 1.0 - v).collect();
    let (ax, ay) = (mg.matvec(&ex), mg.matvec(&ey));
    let dirichlet = space.dirichlet_mask();
    let (mut a, mut r) = ([[0.0; 2]; 2], [0.0; 2]);
    for (k, &d) in space.interface_dofs().iter().enumerate() {
        if dirichlet[d] {
            continue;
        }
        let row = [ax[k], ay[k]];
        for i in 0..2 {
            r[i] += row[i] * h[d];
            for j in 0..2 {
                a[i][j] += row[i] * row[j];
            }
        }
    }
    let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
    if det.abs() <= 1e-300 {
        return Err(Error::Mesh("interface has no free dofs".into()));
    }
    let nx = (r[0] * a[1][1] - r[1] * a[0][1]) / det;
    let ny = (a[0][0] * r[1] - a[1][0] * r[0]) / det;
    Ok(ex.iter().map(|&x| if x == 1.0 { nx } else { ny }).collect())
}

/// Runs the optimisation-based DD time loop from zero initial velocity,
/// warm-starting each step's control from the previous optimum.
pub fn dd_time_loop(problem: &mut DdProblem) -> Result<DdRun> {
    let cfg = problem.config().transient;
    let s1 = problem.subdomain(0).space().clone();
    let s2 = problem.subdomain(1).space().clone();
    let gauge = PressureGauge::new(cfg.geometry, &s1, &s2)?;
    let mut trajectories = [
        Trajectory::zero(s1.n_velocity(), s1.n_pressure()),
        Trajectory::zero(s2.n_velocity(), s2.n_pressure()),
    ];
    let mut reports = Vec::with_capacity(cfg.n_steps());
    let mut controls = Vec::with_capacity(cfg.n_steps());
    let mut g = vec![0.0; problem.trace_dim()];
    for n in 1..=cfg.n_steps() {
        let t = cfg.time(n);
        problem.begin_step(&trajectories[0].u[n - 1], &trajectories[1].u[n - 1], t)?;
        let (g_star, report) = problem
            .optimize_step(g)
            .map_err(|e| Error::Invalid(format!("DD step {n}: {e}")))?;
        if report.termination == Termination::MaxIter {
            warn!("DD step {n}: optimizer hit the iteration limit (J = {:e})", report.final_value());
        }
        info!(
            "DD step {n}: {} iterations, J = {:e}, |grad| = {:e}, {}",
            report.iterations,
            report.final_value(),
            report.final_gradient_norm(),
            report.termination
        );
        let a = problem.subdomain(0);
        let b = problem.subdomain(1);
        let (mut p1, mut p2) = (a.pressure().to_vec(), b.pressure().to_vec());
        let mut g_rec = g_star.clone();
        gauge.apply(&mut p1, &mut p2, &mut g_rec);
        trajectories[0].push(t, a.velocity().to_vec(), p1);
        trajectories[1].push(t, b.velocity().to_vec(), p2);
        g = g_star;
        controls.push(g_rec);
        reports.push(report);
    }
    Ok(DdRun {
        trajectories,
        reports,
        controls,
    })
}

/// Writes one CSV row per step: step, time, iterations, final J, gradient
/// norm, termination reason.
pub fn write_step_csv<W: Write>(mut w: W, times: &[f64], reports: &[OptimReport]) -> Result<()> {
    check_len("step CSV times", reports.len(), times.len())?;
    writeln!(w, "step,time,iterations,functional,gradient_norm,termination")?;
    for (n, (t, r)) in times.iter().zip(reports).enumerate() {
        writeln!(
            w,
            "{},{},{},{:.17e},{:.17e},{}",
            n + 1,
            t,
            r.iterations,
            r.final_value(),
            r.final_gradient_norm(),
            r.termination
        )?;
    }
    Ok(())
}

/// Index maps from a subdomain space into the monolithic space.
#[derive(Debug, Clone, PartialEq)]
pub struct Restriction {
    velocity: Vec<usize>,
    pressure: Vec<usize>,
}

impl Restriction {
    pub fn new(sub: &TaylorHoodSpace, mono: &TaylorHoodSpace) -> Result<Self> {
        let map = sub.node_map_to(mono);
        let mut nodes = Vec::with_capacity(map.len());
        for (k, m) in map.iter().enumerate() {
            nodes.push(m.ok_or_else(|| Error::Mesh(format!("subdomain node {k} has no monolithic partner")))?);
        }
        let (n, nm) = (sub.n_nodes(), mono.n_nodes());
        let velocity = (0..2 * n).map(|d| (d / n) * nm + nodes[d % n]).collect();
        let pressure: Vec<usize> = nodes[..sub.n_vertices()].to_vec();
        if pressure.iter().any(|&v| v >= mono.n_vertices()) {
            return Err(Error::Mesh("subdomain vertex mapped to a monolithic midpoint".into()));
        }
        Ok(Self { velocity, pressure })
    }

    pub fn velocity(&self, u: &[f64]) -> Vec<f64> {
        self.velocity.iter().map(|&d| u[d]).collect()
    }

    pub fn pressure(&self, p: &[f64]) -> Vec<f64> {
        self.pressure.iter().map(|&d| p[d]).collect()
    }

    /// Restricted trajectory on the subdomain.
    pub fn trajectory(&self, t: &Trajectory) -> Trajectory {
        Trajectory {
            times: t.times.clone(),
            u: t.u.iter().map(|u| self.velocity(u)).collect(),
            p: t.p.iter().map(|p| self.pressure(p)).collect(),
        }
    }
}

/// DD run obtained by restricting a monolithic trajectory to the two
/// subdomains, with the monolithic interface control at every step. The
/// reports are empty: nothing is optimised.
pub fn monolithic_restriction_run(problem: &DdProblem, mono: &TaylorHoodSpace, traj: &Trajectory) -> Result<DdRun> {
    let s1 = problem.subdomain(0).space();
    let s2 = problem.subdomain(1).space();
    let r1 = Restriction::new(s1, mono)?;
    let r2 = Restriction::new(s2, mono)?;
    let mut t1 = r1.trajectory(traj);
    let mut t2 = r2.trajectory(traj);
    let gauge = PressureGauge::new(problem.config().transient.geometry, s1, s2)?;
    let mut controls = Vec::with_capacity(traj.len().saturating_sub(1));
    for n in 1..traj.len() {
        let mut x1 = t1.u[n].clone();
        x1.extend_from_slice(&t1.p[n]);
        let mut g = problem.monolithic_control(&x1, &t1.u[n - 1], traj.times[n])?;
        gauge.apply(&mut t1.p[n], &mut t2.p[n], &mut g);
        controls.push(g);
    }
    Ok(DdRun {
        trajectories: [t1, t2],
        reports: Vec::new(),
        controls,
    })
}
