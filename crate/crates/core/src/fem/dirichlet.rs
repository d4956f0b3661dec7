use super::space::TaylorHoodSpace;
use crate::error::{check_len, Error, Result};
use crate::linalg::SparseMatrix;
use crate::mesh::BoundaryTag;

/// Prescribed values at the space's Dirichlet dofs (in `dirichlet_dofs()`
/// order). `bc` returns `None` for tags it does not define, which is an
/// error if the tag occurs.
pub fn dirichlet_values(
    space: &TaylorHoodSpace,
    bc: impl Fn(BoundaryTag, f64, f64) -> Option<[f64; 2]>,
) -> Result<Vec<f64>> {
    let nn = space.n_nodes();
    let coords = space.node_coords();
    let tags = space.node_dirichlet();
    space
        .dirichlet_dofs()
        .iter()
        .map(|&d| {
            let (c, n) = (d / nn, d % nn);
            let tag = tags[n].expect("dirichlet dof has a tag");
            let p = coords[n];
            bc(tag, p[0], p[1])
                .map(|v| v[c])
                .ok_or_else(|| Error::Invalid(format!("no Dirichlet value for tag {tag}")))
        })
        .collect()
}

/// Symmetric elimination of prescribed dofs.
///
/// Returns the matrix with the constrained rows and columns replaced by the
/// identity and the right-hand side with the prescribed values lifted out.
pub fn apply_dirichlet(
    a: &SparseMatrix,
    rhs: &[f64],
    dofs: &[usize],
    values: &[f64],
) -> Result<(SparseMatrix, Vec<f64>)> {
    check_len("Dirichlet system (square)", a.nrows(), a.ncols())?;
    check_len("Dirichlet rhs", a.nrows(), rhs.len())?;
    check_len("Dirichlet values", dofs.len(), values.len())?;
    let n = a.nrows();
    let mut ud = vec![0.0; n];
    let mut mask = vec![false; n];
    for (&d, &v) in dofs.iter().zip(values) {
        if d >= n {
            return Err(Error::Invalid(format!("Dirichlet dof {d} out of range")));
        }
        ud[d] = v;
        mask[d] = true;
    }
    let lift = a.matvec(&ud);
    let mut b: Vec<f64> = rhs.iter().zip(&lift).map(|(r, l)| r - l).collect();
    let mut t = Vec::with_capacity(a.nnz());
    for i in 0..n {
        if mask[i] {
            t.push((i, i, 1.0));
            b[i] = ud[i];
            continue;
        }
        let (cols, vals) = a.row(i);
        for (&j, &v) in cols.iter().zip(vals) {
            if !mask[j] {
                t.push((i, j, v));
            }
        }
    }
    Ok((SparseMatrix::from_triplets(n, n, &t)?, b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::assemble_scalar_stiffness;
    use crate::linalg::SparseLu;
    use crate::mesh::build_cavity_meshes;

    #[test]
    fn harmonic_solution_reproduced() {
        // Laplace with u = x on the boundary of [0,1]×[0.5,1].
        let (m1, m2, map) = build_cavity_meshes(6).unwrap();
        let s = TaylorHoodSpace::pair(m1, m2, &map).unwrap().0;
        let k = assemble_scalar_stiffness(&s);
        let coords = s.node_coords();
        let bnd: Vec<usize> = (0..s.n_nodes())
            .filter(|&n| {
                let p = coords[n];
                p[0].abs() < 1e-14 || (p[0] - 1.0).abs() < 1e-14 || (p[1] - 0.5).abs() < 1e-14 || (p[1] - 1.0).abs() < 1e-14
            })
            .collect();
        let vals: Vec<f64> = bnd.iter().map(|&n| coords[n][0]).collect();
        let (a, b) = apply_dirichlet(&k, &vec![0.0; s.n_nodes()], &bnd, &vals).unwrap();
        let u = SparseLu::factor(&a).unwrap().solve(&b).unwrap();
        for n in 0..s.n_nodes() {
            assert!((u[n] - coords[n][0]).abs() < 1e-10);
        }
        for (&d, &v) in bnd.iter().zip(&vals) {
            assert_eq!(u[d], v);
        }
    }

    #[test]
    fn zero_values_leave_free_rhs() {
        let a = SparseMatrix::from_triplets(3, 3, &[(0, 0, 2.0), (0, 1, 1.0), (1, 0, 1.0), (1, 1, 2.0), (2, 2, 1.0)])
            .unwrap();
        let (_, b) = apply_dirichlet(&a, &[1.0, 2.0, 3.0], &[1], &[0.0]).unwrap();
        assert_eq!(b, vec![1.0, 0.0, 3.0]);
    }

    #[test]
    fn missing_tag_rejected() {
        let (m1, m2, map) = build_cavity_meshes(2).unwrap();
        let s = TaylorHoodSpace::pair(m1, m2, &map).unwrap().0;
        let r = dirichlet_values(&s, |t, _, _| (t == BoundaryTag::DirichletWall).then_some([0.0; 2]));
        assert!(r.is_err());
    }
}
