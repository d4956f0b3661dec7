use crate::error::{check_len, Error, Result};
use crate::fem::{
    assemble_convection, assemble_divergence, assemble_interface_coupling, assemble_mass,
    assemble_scalar_stiffness, block_diag2, TaylorHoodSpace,
};
use crate::linalg::{Cholesky, DenseMatrix, SparseMatrix};
use crate::par;
use crate::pod::{PodBases, ReducedBasis};

/// Galerkin-projected operators of one subdomain.
///
/// Velocity trial functions use the augmented basis `Ψ = [l, Φ₁ … Φ_N]`
/// with `l` the unit lifting, so that `u = α l + Φ a` has coefficients
/// `z = [α; a]`. Test functions are `Φ₁ … Φ_N`. Every lifting term of the
/// reduced equations is therefore the first column (or first slice) of an
/// array below.
#[derive(Debug, Clone, PartialEq)]
pub struct SubdomainOperators {
    /// `+1` on Ω₁, `−1` on Ω₂.
    pub sign: f64,
    /// `ΦᵀMΨ`, `N × (N+1)`.
    pub mass: DenseMatrix,
    /// `ΦᵀKΨ` with `K` the velocity Laplacian (ν = 1), `N × (N+1)`.
    pub laplace: DenseMatrix,
    /// `Φ_pᵀBΨ`, `N_p × (N+1)`.
    pub div: DenseMatrix,
    /// `conv[(k·(N+1) + i)·(N+1) + j] = c(Ψ_i, Ψ_j, Φ_k)`.
    pub conv: Vec<f64>,
    /// `ΦᵀT_int Φ_g`, `N × N_g`.
    pub coupling: DenseMatrix,
    /// Interface trace of `Ψ`, `n_Γ × (N+1)`.
    pub trace: DenseMatrix,
}

impl SubdomainOperators {
    /// Velocity dimension `N`.
    pub fn n_u(&self) -> usize {
        self.mass.rows()
    }

    pub fn n_p(&self) -> usize {
        self.div.rows()
    }

    pub fn n_g(&self) -> usize {
        self.coupling.cols()
    }

    /// `Σ_ij z_i z_j c(Ψ_i, Ψ_j, Φ_k)` for each `k`.
    pub fn convect(&self, z: &[f64]) -> Vec<f64> {
        let m = z.len();
        (0..self.n_u())
            .map(|k| {
                let slab = &self.conv[k * m * m..(k + 1) * m * m];
                let mut s = 0.0;
                for (i, zi) in z.iter().enumerate() {
                    if *zi == 0.0 {
                        continue;
                    }
                    let row = &slab[i * m..(i + 1) * m];
                    s += zi * row.iter().zip(z).map(|(c, zj)| c * zj).sum::<f64>();
                }
                s
            })
            .collect()
    }

    /// Derivative of [`convect`](Self::convect) with respect to `a = z[1..]`,
    /// `N × N`.
    pub fn convect_jacobian(&self, z: &[f64]) -> DenseMatrix {
        let m = z.len();
        let n = self.n_u();
        let mut jac = DenseMatrix::zeros(n, n);
        for k in 0..n {
            let slab = &self.conv[k * m * m..(k + 1) * m * m];
            let row = jac.row_mut(k);
            for (i, zi) in z.iter().enumerate() {
                let ci = &slab[i * m..(i + 1) * m];
                for j in 1..m {
                    // ∂/∂z_j of z_i z_j c_ij and of z_j z_i c_ji.
                    row[j - 1] += zi * (ci[j] + slab[j * m + i]);
                }
            }
        }
        jac
    }
}

/// Reduced operators of both subdomains plus the control inner products.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedOperators {
    pub sub: [SubdomainOperators; 2],
    /// Full trace mass `Mγ`.
    pub mgamma: DenseMatrix,
    /// `Φ_gᵀ Mγ Φ_g`.
    pub mgamma_hat: DenseMatrix,
    /// Projected with the skew-symmetric trilinear form.
    pub skew: bool,
}

impl ReducedOperators {
    pub fn n_g(&self) -> usize {
        self.mgamma_hat.rows()
    }

    pub fn trace_dim(&self) -> usize {
        self.mgamma.rows()
    }

    pub fn validate(&self) -> Result<()> {
        let ng = self.n_g();
        check_len("reduced Mγ (square)", ng, self.mgamma_hat.cols())?;
        check_len("trace Mγ (square)", self.mgamma.rows(), self.mgamma.cols())?;
        for s in &self.sub {
            let (n, m) = (s.n_u(), s.n_u() + 1);
            check_len("reduced mass columns", m, s.mass.cols())?;
            check_len("reduced Laplacian", n * m, s.laplace.rows() * s.laplace.cols())?;
            check_len("reduced divergence columns", m, s.div.cols())?;
            check_len("reduced trilinear form", n * m * m, s.conv.len())?;
            check_len("reduced coupling rows", n, s.coupling.rows())?;
            check_len("reduced coupling columns", ng, s.coupling.cols())?;
            check_len("reduced trace columns", m, s.trace.cols())?;
            check_len("reduced trace rows", self.trace_dim(), s.trace.rows())?;
        }
        Cholesky::factor(&self.mgamma_hat).map_err(|_| Error::Invalid("reduced Mγ is not SPD".into()))?;
        Ok(())
    }
}

/// `[l, Φ]` as one dense matrix.
pub fn augmented_basis(lifting: &[f64], phi: &DenseMatrix) -> Result<DenseMatrix> {
    check_len("lifting length", phi.rows(), lifting.len())?;
    let mut cols = Vec::with_capacity(phi.cols() + 1);
    cols.push(lifting.to_vec());
    cols.extend(phi.columns());
    DenseMatrix::from_columns(&cols)
}

fn project(test: &DenseMatrix, a: &SparseMatrix, trial: &DenseMatrix) -> Result<DenseMatrix> {
    test.tr_matmul(&a.mul_dense(trial))
}

fn project_subdomain(
    space: &TaylorHoodSpace,
    u: &ReducedBasis,
    p: &ReducedBasis,
    g: &ReducedBasis,
    lifting: &[f64],
    sign: f64,
    skew: bool,
) -> Result<SubdomainOperators> {
    check_len("velocity basis rows", space.n_velocity(), u.full_dim())?;
    check_len("pressure basis rows", space.n_pressure(), p.full_dim())?;
    let phi = &u.phi;
    let psi = augmented_basis(lifting, phi)?;
    let (n, m) = (phi.cols(), psi.cols());
    let mass = project(phi, &assemble_mass(space), &psi)?;
    let laplace = project(phi, &block_diag2(&assemble_scalar_stiffness(space)), &psi)?;
    let div = project(&p.phi, &assemble_divergence(space), &psi)?;
    let (t_int, _) = assemble_interface_coupling(space)?;
    check_len("control basis rows", t_int.ncols(), g.full_dim())?;
    let coupling = project(phi, &t_int, &g.phi)?;
    let slices: Vec<Result<DenseMatrix>> = par::map_range(m, |i| {
        let (c1, _) = assemble_convection(space, &psi.column(i), skew)?;
        project(phi, &c1, &psi)
    });
    let mut conv = vec![0.0; n * m * m];
    for (i, s) in slices.into_iter().enumerate() {
        let s = s?;
        for k in 0..n {
            conv[(k * m + i) * m..(k * m + i + 1) * m].copy_from_slice(s.row(k));
        }
    }
    let dofs = space.interface_dofs();
    let trace = DenseMatrix::from_fn(dofs.len(), m, |r, c| psi[(dofs[r], c)]);
    Ok(SubdomainOperators {
        sign,
        mass,
        laplace,
        div,
        conv,
        coupling,
        trace,
    })
}

/// Projects all operators onto the enriched velocity, pressure and control
/// bases.
pub fn project_operators(spaces: &[TaylorHoodSpace; 2], bases: &PodBases, skew: bool) -> Result<ReducedOperators> {
    let (_, mg) = assemble_interface_coupling(&spaces[0])?;
    let g = &bases.control;
    let s1 = project_subdomain(
        &spaces[0],
        &bases.velocity[0],
        &bases.pressure[0],
        g,
        &bases.liftings[0],
        1.0,
        skew,
    )?;
    let s2 = project_subdomain(
        &spaces[1],
        &bases.velocity[1],
        &bases.pressure[1],
        g,
        &bases.liftings[1],
        -1.0,
        skew,
    )?;
    let mut mgamma_hat = project(&g.phi, &mg, &g.phi)?;
    mgamma_hat.symmetrize();
    let ops = ReducedOperators {
        sub: [s1, s2],
        mgamma: mg.to_dense(),
        mgamma_hat,
        skew,
    };
    ops.validate()?;
    Ok(ops)
}
