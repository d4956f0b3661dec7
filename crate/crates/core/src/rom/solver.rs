use log::{debug, warn};
use serde::{Deserialize, Serialize};

use super::operators::{ReducedOperators, SubdomainOperators};
use crate::dd::{lbfgs_minimize, DdConfig, DdRun, InnerProduct, LbfgsOptions, OptimReport, PressureGauge, Termination};
use crate::error::{check_len, Error, Result};
use crate::linalg::{norm_inf, Cholesky, DenseLu, DenseMatrix};
use crate::ns::{Geometry, TransientConfig, Trajectory};
use crate::pod::PodBases;

/// Problem settings for the reduced model: the full-order defaults, with a
/// looser gradient tolerance for the cavity.
pub fn rom_config(transient: TransientConfig) -> DdConfig {
    let mut cfg = DdConfig::new(transient);
    if transient.geometry == Geometry::Cavity {
        cfg.optim = LbfgsOptions::with_limits(300, 1e-6);
    }
    cfg
}

/// Reduced coefficients of one time step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReducedState {
    /// Homogeneous velocity coefficients `a` per subdomain.
    pub u: [Vec<f64>; 2],
    pub p: [Vec<f64>; 2],
    /// Control coefficients `ĝ`.
    pub g: Vec<f64>,
    /// Lifting amplitude `α(tⁿ)`.
    pub alpha: f64,
}

/// `[α; a]`.
pub fn augment(alpha: f64, a: &[f64]) -> Vec<f64> {
    let mut z = Vec::with_capacity(a.len() + 1);
    z.push(alpha);
    z.extend_from_slice(a);
    z
}

#[derive(Debug, Clone)]
struct ReducedSubdomain {
    /// `[a; b]`.
    x: Vec<f64>,
    z_prev: Vec<f64>,
    lu: Option<DenseLu>,
}

/// The reduced interface control problem at one time step.
#[derive(Debug, Clone)]
pub struct RomProblem<'a> {
    ops: &'a ReducedOperators,
    cfg: DdConfig,
    mg_hat: Cholesky,
    sub: [ReducedSubdomain; 2],
    alpha: f64,
    newton_tol: f64,
}

impl<'a> RomProblem<'a> {
    pub fn new(ops: &'a ReducedOperators, cfg: DdConfig) -> Result<Self> {
        cfg.validate()?;
        ops.validate()?;
        if ops.skew != cfg.transient.skew {
            return Err(Error::Invalid("reduced operators were projected with a different trilinear form".into()));
        }
        let mg_hat = Cholesky::factor(&ops.mgamma_hat)?;
        let sub = std::array::from_fn(|i| {
            let s = &ops.sub[i];
            ReducedSubdomain {
                x: vec![0.0; s.n_u() + s.n_p()],
                z_prev: vec![0.0; s.n_u() + 1],
                lu: None,
            }
        });
        Ok(Self {
            ops,
            cfg,
            mg_hat,
            sub,
            alpha: 0.0,
            newton_tol: (1e-2 * cfg.transient.newton_tol).max(1e-14),
        })
    }

    pub fn config(&self) -> &DdConfig {
        &self.cfg
    }

    pub fn operators(&self) -> &ReducedOperators {
        self.ops
    }

    pub fn set_gamma(&mut self, gamma: f64) -> Result<()> {
        if !(gamma >= 0.0) {
            return Err(Error::Invalid(format!("gamma must be ≥ 0, got {gamma}")));
        }
        self.cfg.gamma = gamma;
        Ok(())
    }

    pub fn n_g(&self) -> usize {
        self.ops.n_g()
    }

    /// Current `[a; b]` of subdomain `i`.
    pub fn state(&self, i: usize) -> &[f64] {
        &self.sub[i].x
    }

    pub fn velocity(&self, i: usize) -> &[f64] {
        &self.sub[i].x[..self.ops.sub[i].n_u()]
    }

    pub fn pressure(&self, i: usize) -> &[f64] {
        &self.sub[i].x[self.ops.sub[i].n_u()..]
    }

    pub fn amplitude(&self) -> f64 {
        self.alpha
    }

    /// Previous augmented velocities `[α; a]` (zero for the initial
    /// condition) and the step time `t`.
    pub fn begin_step(&mut self, z1_prev: &[f64], z2_prev: &[f64], t: f64) -> Result<()> {
        for (s, z) in self.sub.iter_mut().zip([z1_prev, z2_prev]) {
            check_len("previous reduced velocity", s.z_prev.len(), z.len())?;
            s.z_prev = z.to_vec();
        }
        self.alpha = self.cfg.transient.amplitude(t);
        Ok(())
    }

    /// Replaces the Newton initial guesses.
    pub fn set_states(&mut self, x1: &[f64], x2: &[f64]) -> Result<()> {
        for (s, x) in self.sub.iter_mut().zip([x1, x2]) {
            check_len("reduced state", s.x.len(), x.len())?;
            s.x = x.to_vec();
            s.lu = None;
        }
        Ok(())
    }

    /// Reduced residual of subdomain `i` at `x = [a; b]` for the control `g`.
    pub fn residual(&self, i: usize, x: &[f64], g: &[f64]) -> Result<Vec<f64>> {
        let s = &self.ops.sub[i];
        let (n, np) = (s.n_u(), s.n_p());
        check_len("reduced state", n + np, x.len())?;
        check_len("reduced control", s.n_g(), g.len())?;
        let t = &self.cfg.transient;
        let z = augment(self.alpha, &x[..n]);
        let b = &x[n..];
        let dz: Vec<f64> = z.iter().zip(&self.sub[i].z_prev).map(|(a, p)| a - p).collect();
        let md = s.mass.matvec(&dz);
        let lz = s.laplace.matvec(&z);
        let cz = s.convect(&z);
        let cg = s.coupling.matvec(g);
        let mut r = vec![0.0; n + np];
        for k in 0..n {
            let bt: f64 = (0..np).map(|q| s.div[(q, k + 1)] * b[q]).sum();
            r[k] = md[k] / t.dt + t.nu * lz[k] + cz[k] + bt - s.sign * cg[k];
        }
        r[n..].copy_from_slice(&s.div.matvec(&z));
        Ok(r)
    }

    /// Jacobian of [`residual`](Self::residual) with respect to `[a; b]`.
    pub fn jacobian(&self, i: usize, x: &[f64]) -> DenseMatrix {
        let s = &self.ops.sub[i];
        let (n, np) = (s.n_u(), s.n_p());
        let t = &self.cfg.transient;
        let z = augment(self.alpha, &x[..n]);
        let cj = s.convect_jacobian(&z);
        let mut j = DenseMatrix::zeros(n + np, n + np);
        for k in 0..n {
            for l in 0..n {
                j[(k, l)] = s.mass[(k, l + 1)] / t.dt + t.nu * s.laplace[(k, l + 1)] + cj[(k, l)];
            }
        }
        for q in 0..np {
            for l in 0..n {
                let d = s.div[(q, l + 1)];
                j[(n + q, l)] = d;
                j[(l, n + q)] = d;
            }
        }
        j
    }

    fn solve_one(&mut self, i: usize, g: &[f64]) -> Result<usize> {
        let mut x = self.sub[i].x.clone();
        let max_iter = self.cfg.transient.newton_max;
        let mut it = 0;
        loop {
            let r = self.residual(i, &x, g)?;
            let nr = norm_inf(&r);
            if !nr.is_finite() {
                return Err(Error::NewtonDiverged {
                    iterations: it,
                    residual: nr,
                });
            }
            if nr <= self.newton_tol {
                break;
            }
            if it >= max_iter {
                return Err(Error::NewtonDiverged {
                    iterations: it,
                    residual: nr,
                });
            }
            let lu = DenseLu::factor(&self.jacobian(i, &x))?;
            let d = lu.solve(&r)?;
            for (xi, di) in x.iter_mut().zip(&d) {
                *xi -= di;
            }
            it += 1;
            if norm_inf(&d) <= 1e-14 * norm_inf(&x).max(1.0) {
                break;
            }
        }
        let lu = DenseLu::factor(&self.jacobian(i, &x))?;
        self.sub[i].x = x;
        self.sub[i].lu = Some(lu);
        Ok(it)
    }

    /// Newton solves of both reduced state problems for the control
    /// coefficients `g`; returns the iteration counts.
    pub fn solve_states(&mut self, g: &[f64]) -> Result<[usize; 2]> {
        check_len("reduced control", self.n_g(), g.len())?;
        Ok([self.solve_one(0, g)?, self.solve_one(1, g)?])
    }

    fn trace(&self, i: usize) -> Vec<f64> {
        let s = &self.ops.sub[i];
        s.trace.matvec(&augment(self.alpha, self.velocity(i)))
    }

    /// Full trace-space jump `u₁|Γ₀ − u₂|Γ₀` of the current states.
    pub fn jump(&self) -> Vec<f64> {
        let (a, b) = (self.trace(0), self.trace(1));
        a.iter().zip(&b).map(|(x, y)| x - y).collect()
    }

    pub fn jump_norm(&self) -> f64 {
        let e = self.jump();
        let me = self.ops.mgamma.matvec(&e);
        e.iter().zip(&me).map(|(a, b)| a * b).sum::<f64>().max(0.0).sqrt()
    }

    /// `½ eᵀMγe + (γ/2) ĝᵀM̂γĝ` at the current states.
    pub fn functional(&self, g: &[f64]) -> Result<f64> {
        check_len("reduced control", self.n_g(), g.len())?;
        let mut j = 0.5 * self.jump_norm().powi(2);
        if self.cfg.gamma != 0.0 {
            let mg = self.ops.mgamma_hat.matvec(g);
            j += 0.5 * self.cfg.gamma * g.iter().zip(&mg).map(|(a, b)| a * b).sum::<f64>();
        }
        Ok(j)
    }

    /// Reduced adjoints `(ξ̂ᵢ; λ̂ᵢ)`: `Jᵢᵀ yᵢ = sᵢ (E Φᵢ)ᵀ Mγ e`.
    pub fn solve_adjoints(&self) -> Result<[Vec<f64>; 2]> {
        let w = self.ops.mgamma.matvec(&self.jump());
        let mut out: [Vec<f64>; 2] = Default::default();
        for (i, o) in out.iter_mut().enumerate() {
            let s = &self.ops.sub[i];
            let lu = self.sub[i]
                .lu
                .as_ref()
                .ok_or_else(|| Error::Invalid("reduced adjoint before a state solve".into()))?;
            let mut rhs = vec![0.0; s.n_u() + s.n_p()];
            let tw = s.trace.tr_matvec(&w);
            for k in 0..s.n_u() {
                rhs[k] = s.sign * tw[k + 1];
            }
            *o = lu.solve_transpose(&rhs)?;
        }
        Ok(out)
    }

    /// Derivative of the reduced functional in coefficient space,
    /// `γ M̂γ ĝ + Σᵢ sᵢ T̂ᵢᵀ ξ̂ᵢ`.
    pub fn euclidean_gradient(&self, g: &[f64], adjoints: &[Vec<f64>; 2]) -> Result<Vec<f64>> {
        check_len("reduced control", self.n_g(), g.len())?;
        let mut grad = self.ops.mgamma_hat.matvec(g);
        grad.iter_mut().for_each(|v| *v *= self.cfg.gamma);
        for (s, y) in self.ops.sub.iter().zip(adjoints) {
            check_len("reduced adjoint", s.n_u() + s.n_p(), y.len())?;
            let r = s.coupling.tr_matvec(&y[..s.n_u()]);
            grad.iter_mut().zip(&r).for_each(|(gi, ri)| *gi += s.sign * ri);
        }
        Ok(grad)
    }

    /// Representative of the gradient in the `M̂γ` inner product.
    pub fn gradient(&self, g: &[f64], adjoints: &[Vec<f64>; 2]) -> Result<Vec<f64>> {
        self.mg_hat.solve(&self.euclidean_gradient(g, adjoints)?)
    }

    pub fn value(&mut self, g: &[f64]) -> Result<f64> {
        self.solve_states(g)?;
        self.functional(g)
    }

    pub fn value_and_gradient(&mut self, g: &[f64]) -> Result<(f64, Vec<f64>)> {
        self.solve_states(g)?;
        let j = self.functional(g)?;
        let adj = self.solve_adjoints()?;
        Ok((j, self.gradient(g, &adj)?))
    }

    /// L-BFGS over the control coefficients from `g0`, in the `M̂γ` inner
    /// product. On return the states belong to the returned control.
    pub fn optimize_step(&mut self, g0: Vec<f64>) -> Result<(Vec<f64>, OptimReport)> {
        check_len("initial reduced control", self.n_g(), g0.len())?;
        let opts = self.cfg.optim;
        let mg = self.ops.mgamma_hat.clone();
        let (g, report) = lbfgs_minimize(|g| self.value_and_gradient(g), g0, InnerProduct::Dense(&mg), &opts)?;
        self.solve_states(&g)?;
        Ok((g, report))
    }

    /// Snapshot of the current states.
    pub fn reduced_state(&self, g: &[f64]) -> ReducedState {
        ReducedState {
            u: [self.velocity(0).to_vec(), self.velocity(1).to_vec()],
            p: [self.pressure(0).to_vec(), self.pressure(1).to_vec()],
            g: g.to_vec(),
            alpha: self.alpha,
        }
    }

    /// `‖B̂ ξ̂‖∞` of an adjoint of subdomain `i` (the reduced divergence
    /// acting on its velocity part).
    pub fn adjoint_divergence(&self, i: usize, y: &[f64]) -> f64 {
        let s: &SubdomainOperators = &self.ops.sub[i];
        let xi = augment(0.0, &y[..s.n_u()]);
        norm_inf(&s.div.matvec(&xi))
    }
}

/// Reduced trajectory: `states[n−1]` and `reports[n−1]` belong to step `n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RomRun {
    pub times: Vec<f64>,
    pub states: Vec<ReducedState>,
    pub reports: Vec<OptimReport>,
}

impl RomRun {
    pub fn mean_iterations(&self) -> f64 {
        if self.reports.is_empty() {
            return 0.0;
        }
        self.reports.iter().map(|r| r.iterations as f64).sum::<f64>() / self.reports.len() as f64
    }
}

/// Reduced time loop from the zero initial condition, warm-starting each
/// step's control from the previous optimum.
pub fn rom_time_loop(problem: &mut RomProblem) -> Result<RomRun> {
    let t = problem.config().transient;
    let ops = problem.operators();
    let mut z_prev = [vec![0.0; ops.sub[0].n_u() + 1], vec![0.0; ops.sub[1].n_u() + 1]];
    let mut g = vec![0.0; problem.n_g()];
    let mut run = RomRun {
        times: vec![0.0],
        states: Vec::with_capacity(t.n_steps()),
        reports: Vec::with_capacity(t.n_steps()),
    };
    for n in 1..=t.n_steps() {
        let time = t.time(n);
        problem.begin_step(&z_prev[0], &z_prev[1], time)?;
        let (g_star, report) = problem
            .optimize_step(g)
            .map_err(|e| Error::Invalid(format!("ROM step {n}: {e}")))?;
        if report.termination == Termination::MaxIter {
            warn!("ROM step {n}: optimizer hit the iteration limit");
        }
        debug!("ROM step {n}: {} iterations, J = {:e}", report.iterations, report.final_value());
        let alpha = problem.amplitude();
        for (i, z) in z_prev.iter_mut().enumerate() {
            *z = augment(alpha, problem.velocity(i));
        }
        run.states.push(problem.reduced_state(&g_star));
        run.times.push(time);
        run.reports.push(report);
        g = g_star;
    }
    Ok(run)
}

/// Full-order velocity `α l + Φ a` of subdomain `i`.
pub fn lift_velocity(bases: &PodBases, i: usize, alpha: f64, a: &[f64]) -> Result<Vec<f64>> {
    let mut u = bases.velocity[i].reconstruct(a)?;
    for (ui, li) in u.iter_mut().zip(&bases.liftings[i]) {
        *ui += alpha * li;
    }
    Ok(u)
}

/// Full-order fields `(u, p)` of subdomain `i` and the control of one
/// reduced state.
pub fn lift_to_fom(state: &ReducedState, bases: &PodBases) -> Result<([(Vec<f64>, Vec<f64>); 2], Vec<f64>)> {
    let mut out: [(Vec<f64>, Vec<f64>); 2] = Default::default();
    for (i, o) in out.iter_mut().enumerate() {
        *o = (
            lift_velocity(bases, i, state.alpha, &state.u[i])?,
            bases.pressure[i].reconstruct(&state.p[i])?,
        );
    }
    Ok((out, bases.control.reconstruct(&state.g)?))
}

/// Lifts a reduced run to full-order trajectories, normalising the
/// pressures with `gauge` when given. The zero initial condition is
/// prepended.
pub fn lift_run(run: &RomRun, bases: &PodBases, gauge: Option<&PressureGauge>) -> Result<DdRun> {
    let nv = [bases.velocity[0].full_dim(), bases.velocity[1].full_dim()];
    let np = [bases.pressure[0].full_dim(), bases.pressure[1].full_dim()];
    let mut traj = [Trajectory::zero(nv[0], np[0]), Trajectory::zero(nv[1], np[1])];
    let mut controls = Vec::with_capacity(run.states.len());
    for (state, &t) in run.states.iter().zip(&run.times[1..]) {
        let ([(u1, mut p1), (u2, mut p2)], mut g) = lift_to_fom(state, bases)?;
        if let Some(gauge) = gauge {
            gauge.apply(&mut p1, &mut p2, &mut g);
        }
        traj[0].push(t, u1, p1);
        traj[1].push(t, u2, p2);
        controls.push(g);
    }
    Ok(DdRun {
        trajectories: traj,
        reports: run.reports.clone(),
        controls,
    })
}
