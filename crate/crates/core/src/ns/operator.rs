use crate::error::{check_len, Error, Result};
use crate::fem::{
    assemble_divergence, assemble_interface_coupling, assemble_mass, assemble_stiffness, local,
    local_field, TaylorHoodSpace,
};
use crate::linalg::{minimum_degree, norm_inf, SparseLu, SparseMatrix};
use crate::par;

/// Newton solver settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Keep a factorised Jacobian across iterations (and across solves) while
    /// it still contracts the residual by at least a factor 10 per step.
    pub reuse_jacobian: bool,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 25,
            reuse_jacobian: true,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct NewtonStats {
    pub iterations: usize,
    pub residual: f64,
    pub history: Vec<f64>,
}

/// Factorised Jacobian kept between solves.
#[derive(Debug, Default, Clone)]
pub struct JacobianCache {
    lu: Option<SparseLu>,
    stale: bool,
    pub factorizations: usize,
}

impl JacobianCache {
    pub fn clear(&mut self) {
        self.lu = None;
    }

    fn factor(&mut self, j: &SparseMatrix, ordering: &[usize]) -> Result<&SparseLu> {
        self.lu = Some(SparseLu::factor_with_ordering(j, ordering)?);
        self.stale = false;
        self.factorizations += 1;
        Ok(self.lu.as_ref().unwrap())
    }
}

/// Discrete (Navier–)Stokes operator on one Taylor–Hood space.
///
/// Unknown `x = [u; p]`. Residual of the implicit Euler step
/// `(M/Δt + A) u + N(u) + Bᵀ p − rhs_u = 0`, `B u = 0`,
/// with constrained rows (Dirichlet velocity dofs and an optional pinned
/// pressure dof) removed.
#[derive(Debug, Clone)]
pub struct NsOperator {
    space: TaylorHoodSpace,
    nu: f64,
    dt: Option<f64>,
    skew: bool,
    mass: SparseMatrix,
    stiffness: SparseMatrix,
    div: SparseMatrix,
    /// System pattern with the constant part `M/Δt + A`, `Bᵀ`, `B` as values.
    sys: SparseMatrix,
    elem_pos: Vec<[u32; 144]>,
    constrained_dofs: Vec<usize>,
    zero_pos: Vec<usize>,
    diag_pos: Vec<usize>,
    ordering: Vec<usize>,
    coupling: Option<(SparseMatrix, SparseMatrix)>,
    pinned_pressure: Option<usize>,
}

impl NsOperator {
    /// `dt = None` drops the mass term (steady problem).
    pub fn new(
        space: TaylorHoodSpace,
        nu: f64,
        dt: Option<f64>,
        skew: bool,
        pin_pressure: bool,
    ) -> Result<Self> {
        if let Some(dt) = dt {
            if !(dt > 0.0) {
                return Err(Error::Invalid(format!("time step must be positive, got {dt}")));
            }
        }
        let mass = assemble_mass(&space);
        let stiffness = assemble_stiffness(&space, nu)?;
        let div = assemble_divergence(&space);
        let nv = space.n_velocity();
        let nt = space.n_total();

        let mut t = Vec::with_capacity(200 * space.n_elements());
        let velocity_block = match dt {
            Some(dt) => stiffness.add_scaled(1.0 / dt, &mass)?,
            None => stiffness.clone(),
        };
        t.extend(velocity_block.triplets());
        for (q, j, v) in div.triplets() {
            t.push((nv + q, j, v));
            t.push((j, nv + q, v));
        }
        for e in 0..space.n_elements() {
            let vd = space.elem_vel_dofs(e);
            for &i in &vd {
                for &j in &vd {
                    t.push((i, j, 0.0));
                }
            }
        }
        for i in 0..nt {
            t.push((i, i, 0.0));
        }
        let sys = SparseMatrix::from_triplets(nt, nt, &t)?;

        let elem_pos: Vec<[u32; 144]> = (0..space.n_elements())
            .map(|e| {
                let vd = space.elem_vel_dofs(e);
                let mut pos = [0u32; 144];
                for i in 0..12 {
                    for j in 0..12 {
                        pos[i * 12 + j] = sys.position(vd[i], vd[j]).expect("in pattern") as u32;
                    }
                }
                pos
            })
            .collect();

        let mut constrained = vec![false; nt];
        for &d in space.dirichlet_dofs() {
            constrained[d] = true;
        }
        let pinned_pressure = pin_pressure.then_some(nv);
        if let Some(p) = pinned_pressure {
            constrained[p] = true;
        }
        let constrained_dofs: Vec<usize> = (0..nt).filter(|&i| constrained[i]).collect();
        let mut zero_pos = Vec::new();
        let mut diag_pos = Vec::new();
        for i in 0..nt {
            let (s, e) = (sys.row_ptr()[i], sys.row_ptr()[i + 1]);
            for p in s..e {
                let j = sys.col_idx()[p];
                if constrained[i] || constrained[j] {
                    if i == j {
                        diag_pos.push(p);
                    } else {
                        zero_pos.push(p);
                    }
                }
            }
        }
        // Order on the structural pattern with eliminated couplings removed
        // and a zero pressure diagonal.
        let mut probe = vec![1.0; sys.nnz()];
        for i in nv..nt {
            probe[sys.position(i, i).expect("diagonal in pattern")] = 0.0;
        }
        for &p in &zero_pos {
            probe[p] = 0.0;
        }
        for &p in &diag_pos {
            probe[p] = 1.0;
        }
        let ordering = minimum_degree(&sys.with_values(probe));
        let coupling = if space.has_interface() {
            Some(assemble_interface_coupling(&space)?)
        } else {
            None
        };
        Ok(Self {
            space,
            nu,
            dt,
            skew,
            mass,
            stiffness,
            div,
            sys,
            elem_pos,
            constrained_dofs,
            zero_pos,
            diag_pos,
            ordering,
            coupling,
            pinned_pressure,
        })
    }

    pub fn space(&self) -> &TaylorHoodSpace {
        &self.space
    }
    pub fn nu(&self) -> f64 {
        self.nu
    }
    pub fn dt(&self) -> Option<f64> {
        self.dt
    }
    pub fn skew(&self) -> bool {
        self.skew
    }
    /// Velocity mass matrix.
    pub fn mass(&self) -> &SparseMatrix {
        &self.mass
    }
    /// Velocity stiffness scaled by ν.
    pub fn stiffness(&self) -> &SparseMatrix {
        &self.stiffness
    }
    pub fn divergence(&self) -> &SparseMatrix {
        &self.div
    }
    pub fn n_total(&self) -> usize {
        self.space.n_total()
    }
    pub fn constrained_dofs(&self) -> &[usize] {
        &self.constrained_dofs
    }
    pub fn pinned_pressure(&self) -> Option<usize> {
        self.pinned_pressure
    }

    /// `(T_int, Mγ)`; panics if the space has no interface.
    pub fn coupling(&self) -> (&SparseMatrix, &SparseMatrix) {
        let c = self.coupling.as_ref().expect("space has no interface");
        (&c.0, &c.1)
    }

    /// System-length right-hand side `[M u_prev/Δt + load; 0]`.
    pub fn rhs(&self, u_prev: Option<&[f64]>, load: Option<&[f64]>) -> Vec<f64> {
        let mut r = vec![0.0; self.n_total()];
        if let (Some(up), Some(dt)) = (u_prev, self.dt) {
            let mu = self.mass.matvec(up);
            for (ri, m) in r.iter_mut().zip(&mu) {
                *ri = m / dt;
            }
        }
        if let Some(l) = load {
            for (ri, li) in r.iter_mut().zip(l) {
                *ri += li;
            }
        }
        r
    }

    /// Sets the Dirichlet dofs of `x` to `values` (in `dirichlet_dofs()`
    /// order) and the pinned pressure to zero.
    pub fn impose(&self, x: &mut [f64], values: &[f64]) {
        for (&d, &v) in self.space.dirichlet_dofs().iter().zip(values) {
            x[d] = v;
        }
        if let Some(p) = self.pinned_pressure {
            x[p] = 0.0;
        }
    }

    fn local_velocity(&self, x: &[f64], e: usize) -> [[f64; 6]; 2] {
        local_field(&self.space, &x[..self.space.n_velocity()], e)
    }

    /// Nonlinear residual; constrained rows are zero.
    pub fn residual(&self, x: &[f64], rhs: &[f64], convect: bool) -> Vec<f64> {
        let mut r = self.sys.matvec(x);
        for (ri, b) in r.iter_mut().zip(rhs) {
            *ri -= b;
        }
        if convect {
            let skew = self.skew;
            let locals = par::map_range(self.space.n_elements(), |e| {
                let wl = self.local_velocity(x, e);
                let c1 = local::advection(&self.space.elem_geom()[e], &wl);
                let mut out = [[0.0; 6]; 2];
                for c in 0..2 {
                    for b in 0..6 {
                        let mut s = 0.0;
                        for a in 0..6 {
                            s += if skew {
                                0.5 * (c1[b][a] - c1[a][b]) * wl[c][a]
                            } else {
                                c1[b][a] * wl[c][a]
                            };
                        }
                        out[c][b] = s;
                    }
                }
                out
            });
            for (e, out) in locals.iter().enumerate() {
                let vd = self.space.elem_vel_dofs(e);
                for k in 0..12 {
                    r[vd[k]] += out[k / 6][k % 6];
                }
            }
        }
        for &d in &self.constrained_dofs {
            r[d] = 0.0;
        }
        r
    }

    fn eliminate(&self, vals: &mut [f64]) {
        for &p in &self.zero_pos {
            vals[p] = 0.0;
        }
        for &p in &self.diag_pos {
            vals[p] = 1.0;
        }
    }

    /// Constant (Stokes / linearised-at-zero) system with constraints
    /// eliminated.
    pub fn linear_matrix(&self) -> SparseMatrix {
        let mut vals = self.sys.values().to_vec();
        self.eliminate(&mut vals);
        self.sys.with_values(vals)
    }

    /// Jacobian of the residual at `x` with constraints eliminated.
    pub fn jacobian(&self, x: &[f64]) -> SparseMatrix {
        let mut vals = self.sys.values().to_vec();
        let skew = self.skew;
        let locals = par::map_range(self.space.n_elements(), |e| {
            let wl = self.local_velocity(x, e);
            local::convection_operator(&self.space.elem_geom()[e], &wl, skew).1
        });
        for (e, jac) in locals.iter().enumerate() {
            let pos = &self.elem_pos[e];
            for i in 0..12 {
                for j in 0..12 {
                    vals[pos[i * 12 + j] as usize] += jac[i][j];
                }
            }
        }
        self.eliminate(&mut vals);
        self.sys.with_values(vals)
    }

    pub fn factor(&self, m: &SparseMatrix) -> Result<SparseLu> {
        SparseLu::factor_with_ordering(m, &self.ordering)
    }

    /// Solves the linear problem (no convection) for `x` whose constrained
    /// entries already hold the prescribed values.
    pub fn solve_linear(&self, x: &mut [f64], rhs: &[f64], lu: Option<&SparseLu>) -> Result<()> {
        check_len("linear solve", self.n_total(), x.len())?;
        let r = self.residual(x, rhs, false);
        let d = match lu {
            Some(lu) => lu.solve(&r)?,
            None => self.factor(&self.linear_matrix())?.solve(&r)?,
        };
        for (xi, di) in x.iter_mut().zip(&d) {
            *xi -= di;
        }
        Ok(())
    }

    /// Newton iteration from `x` (constrained entries must already hold the
    /// prescribed values).
    pub fn newton(
        &self,
        x: &mut [f64],
        rhs: &[f64],
        opts: &NewtonOptions,
        cache: &mut JacobianCache,
    ) -> Result<NewtonStats> {
        check_len("Newton state", self.n_total(), x.len())?;
        let mut r = self.residual(x, rhs, true);
        let mut nr = norm_inf(&r);
        let mut history = vec![nr];
        let mut it = 0;
        while nr > opts.tol {
            if !nr.is_finite() || it >= opts.max_iter {
                return Err(Error::NewtonDiverged {
                    iterations: it,
                    residual: nr,
                });
            }
            let fresh = cache.lu.is_none() || cache.stale || !opts.reuse_jacobian;
            if fresh {
                cache.factor(&self.jacobian(x), &self.ordering)?;
            }
            let d = cache.lu.as_ref().unwrap().solve(&r)?;
            for (xi, di) in x.iter_mut().zip(&d) {
                *xi -= di;
            }
            let r_new = self.residual(x, rhs, true);
            let nr_new = norm_inf(&r_new);
            if !fresh && !(nr_new < nr) {
                // Stale Jacobian made things worse: undo and refactor.
                for (xi, di) in x.iter_mut().zip(&d) {
                    *xi += di;
                }
                cache.stale = true;
                continue;
            }
            it += 1;
            if nr_new > 0.1 * nr {
                cache.stale = true;
            }
            r = r_new;
            nr = nr_new;
            history.push(nr);
        }
        Ok(NewtonStats {
            iterations: it,
            residual: nr,
            history,
        })
    }

    /// Solves `J(x)ᵀ y = b` with the Jacobian at `x`, reusing the cached
    /// factorisation as a preconditioner for iterative refinement while it
    /// converges fast, refactorising otherwise. Constrained rows of `b` are
    /// ignored (homogeneous constraints).
    pub fn solve_adjoint(&self, x: &[f64], b: &[f64], cache: &mut JacobianCache) -> Result<Vec<f64>> {
        check_len("adjoint rhs", self.n_total(), b.len())?;
        let mut rhs = b.to_vec();
        for &d in &self.constrained_dofs {
            rhs[d] = 0.0;
        }
        let nb = norm_inf(&rhs);
        if nb == 0.0 {
            return Ok(vec![0.0; rhs.len()]);
        }
        let j = self.jacobian(x);
        let tol = 1e-13 * nb;
        if cache.lu.is_none() {
            cache.factor(&j, &self.ordering)?;
        }
        let mut y = cache.lu.as_ref().unwrap().solve_transpose(&rhs)?;
        let mut prev = f64::INFINITY;
        for _ in 0..50 {
            let jy = j.tr_matvec(&y);
            let res: Vec<f64> = rhs.iter().zip(&jy).map(|(a, b)| a - b).collect();
            let nres = norm_inf(&res);
            if nres <= tol {
                return Ok(y);
            }
            if nres > 0.2 * prev {
                // Slow refinement: the cached factorisation is too far off.
                let lu = cache.factor(&j, &self.ordering)?;
                let mut y2 = lu.solve_transpose(&rhs)?;
                let jy = j.tr_matvec(&y2);
                let res: Vec<f64> = rhs.iter().zip(&jy).map(|(a, b)| a - b).collect();
                let corr = lu.solve_transpose(&res)?;
                for (a, c) in y2.iter_mut().zip(&corr) {
                    *a += c;
                }
                return Ok(y2);
            }
            prev = nres;
            let corr = cache.lu.as_ref().unwrap().solve_transpose(&res)?;
            for (a, c) in y.iter_mut().zip(&corr) {
                *a += c;
            }
        }
        Ok(y)
    }

    /// `‖B u‖∞` of the velocity part of `x`.
    pub fn divergence_residual(&self, x: &[f64]) -> f64 {
        norm_inf(&self.div.matvec(&x[..self.space.n_velocity()]))
    }
}
