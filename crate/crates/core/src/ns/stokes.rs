use super::operator::NsOperator;
use crate::error::{check_len, Result};
use crate::fem::{assemble_scalar_stiffness, block_diag2, TaylorHoodSpace};
use crate::linalg::{SparseLu, SparseMatrix};

/// True when every boundary edge carries a Dirichlet tag, so the pressure
/// is only defined up to a constant.
pub fn needs_pressure_pin(space: &TaylorHoodSpace) -> bool {
    space.mesh().boundary_edges.iter().all(|(_, t)| t.is_dirichlet())
}

/// Stokes lifting (ν = 1): velocity equal to `values` on the Dirichlet dofs,
/// homogeneous Neumann data elsewhere, discretely divergence free.
pub fn lifting_solve(space: &TaylorHoodSpace, values: &[f64]) -> Result<Vec<f64>> {
    check_len("lifting values", space.dirichlet_dofs().len(), values.len())?;
    if values.iter().all(|&v| v == 0.0) {
        return Ok(vec![0.0; space.n_velocity()]);
    }
    let op = NsOperator::new(space.clone(), 1.0, None, false, needs_pressure_pin(space))?;
    let mut x = vec![0.0; op.n_total()];
    op.impose(&mut x, values);
    let rhs = vec![0.0; op.n_total()];
    op.solve_linear(&mut x, &rhs, None)?;
    x.truncate(space.n_velocity());
    Ok(x)
}

/// Solver for supremisers `K s = Bᵀ p` on the free velocity dofs, with `K`
/// the velocity Laplacian. The factorisation is computed once.
#[derive(Debug, Clone)]
pub struct SupremiserSolver {
    free: Vec<usize>,
    n_velocity: usize,
    lu: SparseLu,
    div: SparseMatrix,
}

impl SupremiserSolver {
    pub fn new(space: &TaylorHoodSpace, div: &SparseMatrix) -> Result<Self> {
        let k = block_diag2(&assemble_scalar_stiffness(space));
        let free = space.free_velocity_dofs();
        let kf = k.submatrix(&free, &free);
        let lu = SparseLu::factor(&kf)?;
        Ok(Self {
            free,
            n_velocity: space.n_velocity(),
            lu,
            div: div.clone(),
        })
    }

    pub fn solve(&self, p: &[f64]) -> Result<Vec<f64>> {
        check_len("supremiser pressure", self.div.nrows(), p.len())?;
        let btp = self.div.tr_matvec(p);
        let rhs: Vec<f64> = self.free.iter().map(|&i| btp[i]).collect();
        let sf = self.lu.solve(&rhs)?;
        let mut s = vec![0.0; self.n_velocity];
        for (&i, v) in self.free.iter().zip(sf) {
            s[i] = v;
        }
        Ok(s)
    }
}

/// One-off supremiser solve.
pub fn supremiser_solve(space: &TaylorHoodSpace, div: &SparseMatrix, p: &[f64]) -> Result<Vec<f64>> {
    SupremiserSolver::new(space, div)?.solve(p)
}
