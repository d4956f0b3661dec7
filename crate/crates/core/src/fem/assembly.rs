use super::local;
use super::quadrature::{p2_edge_values, EDGE_QUAD};
use super::space::TaylorHoodSpace;
use crate::error::{check_len, Error, Result};
use crate::linalg::SparseMatrix;
use crate::par;

fn scalar_from_local(space: &TaylorHoodSpace, f: impl Fn(usize) -> local::Mat6 + Sync + Send) -> SparseMatrix {
    let locals = par::map_range(space.n_elements(), f);
    let mut t = Vec::with_capacity(36 * locals.len());
    for (e, m) in locals.iter().enumerate() {
        let nodes = &space.elem_nodes()[e];
        for b in 0..6 {
            for a in 0..6 {
                t.push((nodes[b], nodes[a], m[b][a]));
            }
        }
    }
    SparseMatrix::from_triplets(space.n_nodes(), space.n_nodes(), &t).expect("valid indices")
}

/// Two-component block-diagonal copy of a scalar P2 matrix.
pub fn block_diag2(s: &SparseMatrix) -> SparseMatrix {
    let n = s.nrows();
    let mut t = s.triplets();
    let extra: Vec<_> = t.iter().map(|&(i, j, v)| (i + n, j + n, v)).collect();
    t.extend(extra);
    SparseMatrix::from_triplets(2 * n, 2 * s.ncols(), &t).expect("valid indices")
}

/// Scalar P2 mass matrix (one component).
pub fn assemble_scalar_mass(space: &TaylorHoodSpace) -> SparseMatrix {
    scalar_from_local(space, |e| local::mass(&space.elem_geom()[e]))
}

/// Scalar P2 stiffness matrix `∫ ∇φ_a·∇φ_b` (one component, ν = 1).
pub fn assemble_scalar_stiffness(space: &TaylorHoodSpace) -> SparseMatrix {
    scalar_from_local(space, |e| local::stiffness(&space.elem_geom()[e]))
}

/// Velocity mass matrix `m(φ_k, φ_j)`.
pub fn assemble_mass(space: &TaylorHoodSpace) -> SparseMatrix {
    block_diag2(&assemble_scalar_mass(space))
}

/// Velocity stiffness `ν (∇φ_k, ∇φ_j)`.
pub fn assemble_stiffness(space: &TaylorHoodSpace, nu: f64) -> Result<SparseMatrix> {
    if !(nu > 0.0 && nu.is_finite()) {
        return Err(Error::Invalid(format!("viscosity must be positive, got {nu}")));
    }
    Ok(block_diag2(&assemble_scalar_stiffness(space)).scaled(nu))
}

/// Divergence coupling `B_{q,k} = -(div φ_k, ψ_q)`, pressure rows.
pub fn assemble_divergence(space: &TaylorHoodSpace) -> SparseMatrix {
    let locals = par::map_range(space.n_elements(), |e| local::divergence(&space.elem_geom()[e]));
    let mut t = Vec::with_capacity(36 * locals.len());
    for (e, d) in locals.iter().enumerate() {
        let vd = space.elem_vel_dofs(e);
        let tri = space.mesh().triangles[e];
        for r in 0..3 {
            for k in 0..12 {
                t.push((tri[r], vd[k], d[r][k]));
            }
        }
    }
    SparseMatrix::from_triplets(space.n_pressure(), space.n_velocity(), &t).expect("valid indices")
}

/// P1 pressure mass matrix.
pub fn assemble_pressure_mass(space: &TaylorHoodSpace) -> SparseMatrix {
    let mut t = Vec::with_capacity(9 * space.n_elements());
    for (e, g) in space.elem_geom().iter().enumerate() {
        let m = local::pressure_mass(g);
        let tri = space.mesh().triangles[e];
        for i in 0..3 {
            for j in 0..3 {
                t.push((tri[i], tri[j], m[i][j]));
            }
        }
    }
    SparseMatrix::from_triplets(space.n_pressure(), space.n_pressure(), &t).expect("valid indices")
}

pub(crate) fn local_field(space: &TaylorHoodSpace, w: &[f64], e: usize) -> [[f64; 6]; 2] {
    let n = &space.elem_nodes()[e];
    let nn = space.n_nodes();
    std::array::from_fn(|c| std::array::from_fn(|a| w[c * nn + n[a]]))
}

/// Convection matrices for the field `w`.
///
/// Standard form: `C₁(w)_{jk} = c(w, φ_k, φ_j)` and `C₂(w)_{jk} = c(φ_k, w, φ_j)`.
/// Skew form: `C̃₁ = ½(C₁ − C₁ᵀ)` and `C̃₂(w)_{jk} = c̃(φ_k, w, φ_j)`.
pub fn assemble_convection(
    space: &TaylorHoodSpace,
    w: &[f64],
    skew: bool,
) -> Result<(SparseMatrix, SparseMatrix)> {
    check_len("convection field", space.n_velocity(), w.len())?;
    let locals = par::map_range(space.n_elements(), |e| {
        let wl = local_field(space, w, e);
        local::convection(&space.elem_geom()[e], &wl, skew)
    });
    let mut t1 = Vec::with_capacity(144 * locals.len());
    let mut t2 = Vec::with_capacity(144 * locals.len());
    for (e, lc) in locals.iter().enumerate() {
        let vd = space.elem_vel_dofs(e);
        for c in 0..2 {
            for b in 0..6 {
                for a in 0..6 {
                    let v = lc.c1[b][a];
                    let (i, j) = (vd[c * 6 + b], vd[c * 6 + a]);
                    if skew {
                        t1.push((i, j, 0.5 * v));
                        t1.push((j, i, -0.5 * v));
                    } else {
                        t1.push((i, j, v));
                    }
                }
            }
        }
        for i in 0..12 {
            for j in 0..12 {
                let v = if skew {
                    0.5 * (lc.c2[i][j] - lc.c3[i][j])
                } else {
                    lc.c2[i][j]
                };
                t2.push((vd[i], vd[j], v));
            }
        }
    }
    let n = space.n_velocity();
    Ok((
        SparseMatrix::from_triplets(n, n, &t1)?,
        SparseMatrix::from_triplets(n, n, &t2)?,
    ))
}

/// Interface load matrix `T_int` (velocity × trace) with
/// `(T_int)_{jk} = ∫_{Γ₀} ψ_k · φ_j`, and the trace mass matrix `Mγ`.
pub fn assemble_interface_coupling(space: &TaylorHoodSpace) -> Result<(SparseMatrix, SparseMatrix)> {
    if !space.has_interface() {
        return Err(Error::Mesh("space has no interface".into()));
    }
    let tr = space.trace();
    let nt = tr.num_nodes();
    let nn = space.n_nodes();
    let coords = space.node_coords();
    let mut tm = Vec::new();
    let mut tt = Vec::new();
    for e in &tr.edges {
        let (pa, pb) = (coords[tr.nodes[e[0]]], coords[tr.nodes[e[2]]]);
        let h = ((pa[0] - pb[0]).powi(2) + (pa[1] - pb[1]).powi(2)).sqrt();
        let mut m = [[0.0; 3]; 3];
        for (t, w) in EDGE_QUAD {
            let psi = p2_edge_values(t);
            for i in 0..3 {
                for j in 0..3 {
                    m[i][j] += h * w * psi[i] * psi[j];
                }
            }
        }
        for c in 0..2 {
            for i in 0..3 {
                for j in 0..3 {
                    tm.push((c * nt + e[i], c * nt + e[j], m[i][j]));
                    tt.push((c * nn + tr.nodes[e[i]], c * nt + e[j], m[i][j]));
                }
            }
        }
    }
    Ok((
        SparseMatrix::from_triplets(space.n_velocity(), 2 * nt, &tt)?,
        SparseMatrix::from_triplets(2 * nt, 2 * nt, &tm)?,
    ))
}

/// Body-force load vector `(f, φ_j)`.
pub fn assemble_load(space: &TaylorHoodSpace, f: impl Fn(f64, f64) -> [f64; 2] + Sync) -> Vec<f64> {
    use super::quadrature::{p2_values, TRI_QUAD};
    let nn = space.n_nodes();
    let mut out = vec![0.0; space.n_velocity()];
    for (e, g) in space.elem_geom().iter().enumerate() {
        let nodes = space.elem_nodes()[e];
        let tri = space.mesh().triangles[e];
        let p = tri.map(|i| space.mesh().vertices[i]);
        for (l, w) in TRI_QUAD {
            let x = l[0] * p[0][0] + l[1] * p[1][0] + l[2] * p[2][0];
            let y = l[0] * p[0][1] + l[1] * p[1][1] + l[2] * p[2][1];
            let fv = f(x, y);
            let phi = p2_values(l);
            for a in 0..6 {
                for c in 0..2 {
                    out[c * nn + nodes[a]] += w * g.area * fv[c] * phi[a];
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_cavity_meshes, build_step_meshes};

    fn cavity(n: usize) -> TaylorHoodSpace {
        let (m1, m2, map) = build_cavity_meshes(n).unwrap();
        TaylorHoodSpace::pair(m1, m2, &map).unwrap().0
    }

    #[test]
    fn mass_partition_of_unity() {
        let s = cavity(4);
        let m = assemble_mass(&s);
        let one = vec![1.0; s.n_velocity()];
        assert!((m.bilinear(&one, &one) - 2.0 * 0.5).abs() < 1e-12);
        assert!(m.max_asymmetry() < 1e-15);
    }

    #[test]
    fn stiffness_kernel_and_linear_field() {
        let s = cavity(4);
        let a = assemble_stiffness(&s, 0.7).unwrap();
        let c = s.interpolate_velocity(|_, _| [1.0, -2.0]);
        assert!(a.matvec(&c).iter().all(|v| v.abs() < 1e-12));
        let u = s.interpolate_velocity(|x, _| [x, 0.0]);
        assert!((a.bilinear(&u, &u) - 0.7 * 0.5).abs() < 1e-12);
        assert!(assemble_stiffness(&s, 0.0).is_err());
    }

    #[test]
    fn divergence_of_linear_field() {
        let s = cavity(4);
        let b = assemble_divergence(&s);
        let u = s.interpolate_velocity(|x, y| [x, y]);
        let one = vec![1.0; s.n_pressure()];
        let v: f64 = b.matvec(&u).iter().zip(&one).map(|(a, b)| a * b).sum();
        assert!((v + 2.0 * 0.5).abs() < 1e-12);
        let c = s.interpolate_velocity(|_, _| [3.0, 1.0]);
        assert!(b.matvec(&c).iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn interface_mass_gives_length() {
        let (m1, m2, map) = build_step_meshes(1.0).unwrap();
        let (s1, _) = TaylorHoodSpace::pair(m1, m2, &map).unwrap();
        let (t, mg) = assemble_interface_coupling(&s1).unwrap();
        let nt = s1.trace().num_nodes();
        let mut g = vec![0.0; 2 * nt];
        g[..nt].fill(1.0);
        assert!((mg.bilinear(&g, &g) - 5.0).abs() < 1e-12);
        assert!(t.matvec(&vec![0.0; 2 * nt]).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn convection_zero_field() {
        let s = cavity(2);
        let (c1, c2) = assemble_convection(&s, &vec![0.0; s.n_velocity()], false).unwrap();
        assert!(c1.values().iter().all(|&v| v == 0.0));
        assert!(c2.values().iter().all(|&v| v == 0.0));
    }
}
