use serde::{Deserialize, Serialize};

use super::optim::{lbfgs_minimize, InnerProduct, LbfgsOptions, OptimReport};
use crate::error::{check_len, Error, Result};
use crate::fem::{dirichlet_values, TaylorHoodSpace};
use crate::linalg::{Cholesky, DenseMatrix, SparseMatrix};
use crate::mesh::{build_cavity_meshes, build_cavity_monolithic, build_step_meshes, build_step_monolithic};
use crate::ns::{unit_dirichlet, Geometry, JacobianCache, NewtonOptions, NewtonStats, NsOperator, TransientConfig};
use crate::par;

/// Mesh resolution: elements per cm for the step, elements per side for
/// the cavity.
pub fn subdomain_spaces(geometry: Geometry, resolution: f64) -> Result<(TaylorHoodSpace, TaylorHoodSpace)> {
    let (m1, m2, map) = match geometry {
        Geometry::Step => build_step_meshes(resolution)?,
        Geometry::Cavity => build_cavity_meshes(cavity_cells(resolution)?)?,
    };
    TaylorHoodSpace::pair(m1, m2, &map)
}

pub fn monolithic_space(geometry: Geometry, resolution: f64) -> Result<TaylorHoodSpace> {
    let mesh = match geometry {
        Geometry::Step => build_step_monolithic(resolution)?,
        Geometry::Cavity => {
            let n = cavity_cells(resolution)?;
            build_cavity_monolithic(n, n / 2)?
        }
    };
    TaylorHoodSpace::new(mesh, None)
}

fn cavity_cells(resolution: f64) -> Result<usize> {
    if resolution.fract() != 0.0 || resolution < 2.0 {
        return Err(Error::Invalid(format!(
            "cavity resolution must be an integer ≥ 2, got {resolution}"
        )));
    }
    Ok(resolution as usize)
}

/// Settings of the per-step interface control problem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DdConfig {
    pub transient: TransientConfig,
    pub gamma: f64,
    pub optim: LbfgsOptions,
}

impl DdConfig {
    pub fn new(transient: TransientConfig) -> Self {
        let optim = match transient.geometry {
            Geometry::Step => LbfgsOptions::with_limits(1000, 1e-9),
            Geometry::Cavity => LbfgsOptions::with_limits(300, 1e-7),
        };
        Self {
            transient,
            gamma: 0.0,
            optim,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.transient.validate()?;
        if !(self.gamma >= 0.0) {
            return Err(Error::Invalid(format!("gamma must be ≥ 0, got {}", self.gamma)));
        }
        Ok(())
    }
}

/// `½ eᵀ Mγ e + (γ/2) gᵀ Mγ g` for the interface jump `e`.
pub fn eval_functional(g: &[f64], jump: &[f64], mgamma: &SparseMatrix, gamma: f64) -> Result<f64> {
    check_len("functional jump", mgamma.nrows(), jump.len())?;
    check_len("functional control", mgamma.nrows(), g.len())?;
    let mut j = 0.5 * mgamma.bilinear(jump, jump);
    if gamma != 0.0 {
        j += 0.5 * gamma * mgamma.bilinear(g, g);
    }
    Ok(j)
}

/// One subdomain: operator, Dirichlet data and warm-start state.
#[derive(Debug, Clone)]
pub struct Subdomain {
    op: NsOperator,
    unit_dirichlet: Vec<f64>,
    sign: f64,
    interface: Vec<usize>,
    x: Vec<f64>,
    cache: JacobianCache,
}

impl Subdomain {
    fn new(space: TaylorHoodSpace, transient: &TransientConfig, sign: f64) -> Result<Self> {
        let unit_dirichlet = dirichlet_values(&space, unit_dirichlet(transient.geometry))?;
        let interface = space.interface_dofs();
        let op = NsOperator::new(space, transient.nu, Some(transient.dt), transient.skew, false)?;
        let x = vec![0.0; op.n_total()];
        Ok(Self {
            op,
            unit_dirichlet,
            sign,
            interface,
            x,
            cache: JacobianCache::default(),
        })
    }

    pub fn space(&self) -> &TaylorHoodSpace {
        self.op.space()
    }

    pub fn operator(&self) -> &NsOperator {
        &self.op
    }

    /// `+1` on Ω₁, `−1` on Ω₂.
    pub fn sign(&self) -> f64 {
        self.sign
    }

    pub fn unit_dirichlet(&self) -> &[f64] {
        &self.unit_dirichlet
    }

    /// Current state `[u; p]`.
    pub fn state(&self) -> &[f64] {
        &self.x
    }

    pub fn velocity(&self) -> &[f64] {
        &self.x[..self.op.space().n_velocity()]
    }

    pub fn pressure(&self) -> &[f64] {
        &self.x[self.op.space().n_velocity()..]
    }

    pub fn factorizations(&self) -> usize {
        self.cache.factorizations
    }

    /// Velocity load `sign · T_int g`.
    pub fn control_load(&self, g: &[f64]) -> Vec<f64> {
        let (t, _) = self.op.coupling();
        let mut l = t.matvec(g);
        l.iter_mut().for_each(|v| *v *= self.sign);
        l
    }

    fn solve(&mut self, u_prev: &[f64], alpha: f64, g: &[f64], opts: &NewtonOptions) -> Result<NewtonStats> {
        let load = self.control_load(g);
        let rhs = self.op.rhs(Some(u_prev), Some(&load));
        let values: Vec<f64> = self.unit_dirichlet.iter().map(|v| alpha * v).collect();
        let backup = self.x.clone();
        self.op.impose(&mut self.x, &values);
        match self.op.newton(&mut self.x, &rhs, opts, &mut self.cache) {
            Ok(s) => Ok(s),
            Err(e) => {
                self.x = backup;
                self.cache.clear();
                Err(e)
            }
        }
    }

    /// Adjoint `(ξ; λ)` for the jump weight `w = Mγ e`:
    /// `J(x)ᵀ y = sign · Eᵀ w`.
    fn adjoint(&mut self, weighted_jump: &[f64]) -> Result<Vec<f64>> {
        let mut b = vec![0.0; self.op.n_total()];
        for (&d, &w) in self.interface.iter().zip(weighted_jump) {
            b[d] = self.sign * w;
        }
        self.op.solve_adjoint(&self.x, &b, &mut self.cache)
    }
}

/// The two-subdomain interface control problem at one time step.
#[derive(Debug, Clone)]
pub struct DdProblem {
    cfg: DdConfig,
    sub: [Subdomain; 2],
    mgamma: SparseMatrix,
    mgamma_chol: Cholesky,
    u_prev: [Vec<f64>; 2],
    alpha: f64,
}

impl DdProblem {
    pub fn new(space1: TaylorHoodSpace, space2: TaylorHoodSpace, cfg: DdConfig) -> Result<Self> {
        cfg.validate()?;
        if !space1.has_interface() || !space2.has_interface() {
            return Err(Error::Mesh("subdomain spaces need an interface".into()));
        }
        check_len("interface trace", space1.trace_dim(), space2.trace_dim())?;
        let s1 = Subdomain::new(space1, &cfg.transient, 1.0)?;
        let s2 = Subdomain::new(space2, &cfg.transient, -1.0)?;
        let m1 = s1.op.coupling().1.clone();
        let m2 = s2.op.coupling().1;
        let diff = m1.add_scaled(-1.0, m2)?.norm_inf();
        if diff > 1e-12 * m1.norm_inf() {
            return Err(Error::Mesh(format!("interface mass matrices differ by {diff:e}")));
        }
        let mgamma_chol = Cholesky::factor(&m1.to_dense())?;
        let u_prev = [
            vec![0.0; s1.space().n_velocity()],
            vec![0.0; s2.space().n_velocity()],
        ];
        Ok(Self {
            cfg,
            sub: [s1, s2],
            mgamma: m1,
            mgamma_chol,
            u_prev,
            alpha: 0.0,
        })
    }

    /// Builds both subdomain spaces from a resolution (see [`subdomain_spaces`]).
    pub fn build(cfg: DdConfig, resolution: f64) -> Result<Self> {
        let (s1, s2) = subdomain_spaces(cfg.transient.geometry, resolution)?;
        Self::new(s1, s2, cfg)
    }

    pub fn config(&self) -> &DdConfig {
        &self.cfg
    }

    pub fn set_gamma(&mut self, gamma: f64) -> Result<()> {
        if !(gamma >= 0.0) {
            return Err(Error::Invalid(format!("gamma must be ≥ 0, got {gamma}")));
        }
        self.cfg.gamma = gamma;
        Ok(())
    }

    pub fn subdomain(&self, i: usize) -> &Subdomain {
        &self.sub[i]
    }

    pub fn trace_dim(&self) -> usize {
        self.mgamma.nrows()
    }

    pub fn mgamma(&self) -> &SparseMatrix {
        &self.mgamma
    }

    /// Boundary amplitude of the current step.
    pub fn amplitude(&self) -> f64 {
        self.alpha
    }

    pub fn previous_velocity(&self, i: usize) -> &[f64] {
        &self.u_prev[i]
    }

    /// Sets the previous velocities and the boundary amplitude for the step
    /// ending at time `t`.
    pub fn begin_step(&mut self, u1_prev: &[f64], u2_prev: &[f64], t: f64) -> Result<()> {
        check_len("previous velocity Ω₁", self.u_prev[0].len(), u1_prev.len())?;
        check_len("previous velocity Ω₂", self.u_prev[1].len(), u2_prev.len())?;
        self.u_prev = [u1_prev.to_vec(), u2_prev.to_vec()];
        self.alpha = self.cfg.transient.amplitude(t);
        Ok(())
    }

    /// Replaces the warm-start states.
    pub fn set_states(&mut self, x1: &[f64], x2: &[f64]) -> Result<()> {
        check_len("state Ω₁", self.sub[0].x.len(), x1.len())?;
        check_len("state Ω₂", self.sub[1].x.len(), x2.len())?;
        self.sub[0].x.copy_from_slice(x1);
        self.sub[1].x.copy_from_slice(x2);
        Ok(())
    }

    fn newton_options(&self) -> NewtonOptions {
        NewtonOptions {
            tol: self.cfg.transient.newton_tol,
            max_iter: self.cfg.transient.newton_max,
            reuse_jacobian: true,
        }
    }

    /// State solves on both subdomains for the control `g`.
    pub fn solve_states(&mut self, g: &[f64]) -> Result<[NewtonStats; 2]> {
        check_len("control", self.trace_dim(), g.len())?;
        let opts = self.newton_options();
        let alpha = self.alpha;
        let [a, b] = &mut self.sub;
        let [p1, p2] = &self.u_prev;
        let (r1, r2) = par::join(|| a.solve(p1, alpha, g, &opts), || b.solve(p2, alpha, g, &opts));
        Ok([r1?, r2?])
    }

    /// Interface jump `u₁|Γ₀ − u₂|Γ₀` of the current states.
    pub fn jump(&self) -> Vec<f64> {
        let a = &self.sub[0];
        let b = &self.sub[1];
        a.interface
            .iter()
            .zip(&b.interface)
            .map(|(&i, &j)| a.x[i] - b.x[j])
            .collect()
    }

    /// `‖u₁ − u₂‖_{L²(Γ₀)}` of the current states.
    pub fn jump_norm(&self) -> f64 {
        let e = self.jump();
        self.mgamma.bilinear(&e, &e).max(0.0).sqrt()
    }

    pub fn functional(&self, g: &[f64]) -> Result<f64> {
        eval_functional(g, &self.jump(), &self.mgamma, self.cfg.gamma)
    }

    /// Adjoint pair `[(ξ₁; λ₁), (ξ₂; λ₂)]` at the current states.
    pub fn solve_adjoint_pair(&mut self) -> Result<[Vec<f64>; 2]> {
        let w = self.mgamma.matvec(&self.jump());
        let [a, b] = &mut self.sub;
        let (r1, r2) = par::join(|| a.adjoint(&w), || b.adjoint(&w));
        Ok([r1?, r2?])
    }

    /// L²(Γ₀) Riesz representative of the gradient, `γg + r₁ − r₂` with
    /// `Mγ rᵢ = T_intᵀ ξᵢ`.
    pub fn gradient(&self, g: &[f64], adjoints: &[Vec<f64>; 2]) -> Result<Vec<f64>> {
        check_len("control", self.trace_dim(), g.len())?;
        let mut grad: Vec<f64> = g.iter().map(|v| self.cfg.gamma * v).collect();
        for (s, y) in self.sub.iter().zip(adjoints) {
            let nv = s.space().n_velocity();
            check_len("adjoint", s.op.n_total(), y.len())?;
            let r = self.mgamma_chol.solve(&s.op.coupling().0.tr_matvec(&y[..nv]))?;
            grad.iter_mut().zip(&r).for_each(|(gi, ri)| *gi += s.sign * ri);
        }
        Ok(grad)
    }

    /// Solves the states at `g` and returns the functional and its gradient.
    pub fn value_and_gradient(&mut self, g: &[f64]) -> Result<(f64, Vec<f64>)> {
        self.solve_states(g)?;
        let j = self.functional(g)?;
        let adj = self.solve_adjoint_pair()?;
        let grad = self.gradient(g, &adj)?;
        Ok((j, grad))
    }

    /// Functional after solving the states at `g` (no adjoints).
    pub fn value(&mut self, g: &[f64]) -> Result<f64> {
        self.solve_states(g)?;
        self.functional(g)
    }

    /// Minimises the functional from `g0`. On return the subdomain states
    /// belong to the returned control.
    pub fn optimize_step(&mut self, g0: Vec<f64>) -> Result<(Vec<f64>, OptimReport)> {
        check_len("initial control", self.trace_dim(), g0.len())?;
        let opts = self.cfg.optim;
        let mgamma = self.mgamma.clone();
        let mut last: Option<(Vec<f64>, [Vec<f64>; 2])> = None;
        let mut best: Option<(f64, Vec<f64>, [Vec<f64>; 2])> = None;
        let (g, report) = lbfgs_minimize(
            |g| {
                let out = self.value_and_gradient(g)?;
                let states = [self.sub[0].x.clone(), self.sub[1].x.clone()];
                if best.as_ref().is_none_or(|b| out.0 < b.0) {
                    best = Some((out.0, g.to_vec(), states.clone()));
                }
                last = Some((g.to_vec(), states));
                Ok(out)
            },
            g0,
            InnerProduct::Sparse(&mgamma),
            &opts,
        )?;
        let restore = match (&best, &last) {
            (Some(b), _) if b.1 == g => Some(&b.2),
            (_, Some(l)) if l.0 == g => Some(&l.1),
            _ => None,
        };
        match restore {
            Some([x1, x2]) => {
                let (x1, x2) = (x1.clone(), x2.clone());
                self.set_states(&x1, &x2)?;
            }
            None => {
                self.solve_states(&g)?;
            }
        }
        Ok((g, report))
    }

    /// Interface control reproducing the monolithic solution: the Ω₁
    /// residual of the restricted monolithic state `x1` (previous velocity
    /// `u1_prev`), mapped to the trace space through `Mγ`. Endpoint rows carry
    /// Dirichlet constraints and are set to zero.
    pub fn monolithic_control(&self, x1: &[f64], u1_prev: &[f64], t: f64) -> Result<Vec<f64>> {
        let s = &self.sub[0];
        check_len("restricted state", s.op.n_total(), x1.len())?;
        let rhs = s.op.rhs(Some(u1_prev), None);
        let mut x = x1.to_vec();
        let values: Vec<f64> = s.unit_dirichlet.iter().map(|v| self.cfg.transient.amplitude(t) * v).collect();
        s.op.impose(&mut x, &values);
        let r = s.op.residual(&x, &rhs, true);
        let rt: Vec<f64> = s.interface.iter().map(|&d| r[d]).collect();
        let mut g = self.mgamma_chol.solve(&rt)?;
        g.iter_mut().for_each(|v| *v *= s.sign);
        Ok(g)
    }

    /// Dense copy of `Mγ`.
    pub fn mgamma_dense(&self) -> DenseMatrix {
        self.mgamma.to_dense()
    }
}
