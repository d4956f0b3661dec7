mod common;

use common::*;
use ddflow::fem::*;
use ddflow::linalg::{smallest_generalized_singular_value, DenseMatrix, SparseMatrix};
use ddflow::mesh::*;
use proptest::prelude::*;

fn single_triangle() -> TaylorHoodSpace {
    let mesh = TriMesh {
        vertices: vec![[0.3, 0.1], [1.7, 0.4], [0.6, 1.3]],
        triangles: vec![[0, 1, 2]],
        boundary_edges: vec![
            ([0, 1], BoundaryTag::DirichletWall),
            ([1, 2], BoundaryTag::DirichletWall),
            ([2, 0], BoundaryTag::DirichletWall),
        ],
        subdomain_id: 0,
    };
    TaylorHoodSpace::new(mesh, None).unwrap()
}

#[test]
fn single_triangle_mass_matches_closed_form() {
    let s = single_triangle();
    let area = s.mesh().area();
    #[rustfmt::skip]
    let reference = [
        [ 6.0, -1.0, -1.0,  0.0, -4.0,  0.0],
        [-1.0,  6.0, -1.0,  0.0,  0.0, -4.0],
        [-1.0, -1.0,  6.0, -4.0,  0.0,  0.0],
        [ 0.0,  0.0, -4.0, 32.0, 16.0, 16.0],
        [-4.0,  0.0,  0.0, 16.0, 32.0, 16.0],
        [ 0.0, -4.0,  0.0, 16.0, 16.0, 32.0],
    ];
    let m = assemble_scalar_mass(&s);
    let nodes = s.elem_nodes()[0];
    for a in 0..6 {
        for b in 0..6 {
            let expect = area / 180.0 * reference[a][b];
            assert!((m.get(nodes[a], nodes[b]) - expect).abs() < 1e-14, "entry ({a},{b})");
        }
    }
}

#[test]
fn step_area_and_pairing() {
    for density in [1.0, 2.0, 3.0] {
        let (m1, m2, map) = build_step_meshes(density).unwrap();
        assert!((m1.area() + m2.area() - 82.0).abs() < 1e-10);
        for &(a, b) in &map.vertex_pairing {
            assert!(dist(m1.vertices[a], m2.vertices[b]) < 1e-12);
            assert!((m1.vertices[a][0] - 9.0).abs() < 1e-12);
        }
        let left = m1.vertices.iter().all(|v| v[0] <= 9.0 + 1e-12);
        let right = m2.vertices.iter().all(|v| v[0] >= 9.0 - 1e-12);
        assert!(left && right);
        assert!(validate_mesh(&m1).is_valid() && validate_mesh(&m2).is_valid());
    }
}

#[test]
fn cavity_sixteen_pairs_thirty_three_nodes() {
    let (s1, s2) = cavity_pair(16);
    assert_eq!(s1.trace().num_nodes(), 33);
    let coords = |s: &TaylorHoodSpace| -> Vec<[f64; 2]> { s.trace().nodes.iter().map(|&n| s.node_coords()[n]).collect() };
    for (a, b) in coords(&s1).iter().zip(coords(&s2)) {
        assert!(dist(*a, b) < 1e-12);
        assert!((a[1] - 0.5).abs() < 1e-12);
    }
    assert_eq!(s1.trace_dim(), 66);
}

#[test]
fn cavity_halves_have_half_area() {
    for n in [2, 4, 8] {
        let (m1, m2, _) = build_cavity_meshes(n).unwrap();
        assert!((m1.area() - 0.5).abs() < 1e-12);
        assert!((m2.area() - 0.5).abs() < 1e-12);
        assert!(m1.vertices.iter().all(|v| v[1] >= 0.5 - 1e-12));
        assert!(m2.vertices.iter().all(|v| v[1] <= 0.5 + 1e-12));
    }
}

#[test]
fn mesh_text_round_trip_is_byte_identical() {
    let (m1, _, _) = build_step_meshes(2.0).unwrap();
    let mut a = Vec::new();
    write_mesh(&mut a, &m1).unwrap();
    let back = read_mesh(a.as_slice()).unwrap();
    assert_eq!(back, m1);
    let mut b = Vec::new();
    write_mesh(&mut b, &back).unwrap();
    assert_eq!(a, b);
    assert!(String::from_utf8(a).unwrap().starts_with("TRIMESH v1 "));
}

fn cavity_pair(n: usize) -> (TaylorHoodSpace, TaylorHoodSpace) {
    let (m1, m2, map) = build_cavity_meshes(n).unwrap();
    TaylorHoodSpace::pair(m1, m2, &map).unwrap()
}

fn step_pair(d: f64) -> (TaylorHoodSpace, TaylorHoodSpace) {
    let (m1, m2, map) = build_step_meshes(d).unwrap();
    TaylorHoodSpace::pair(m1, m2, &map).unwrap()
}

#[test]
fn convection_matches_direct_quadrature() {
    let mut r = rng(11);
    for s in [cavity_pair(4).0, step_pair(1.0).1] {
        let n = s.n_velocity();
        for _ in 0..3 {
            let (u, w, v) = (random_vec(&mut r, n), random_vec(&mut r, n), random_vec(&mut r, n));
            let oracle = trilinear(&s, &u, &w, &v);
            let (c1, _) = assemble_convection(&s, &u, false).unwrap();
            let (_, c2) = assemble_convection(&s, &w, false).unwrap();
            assert!(rel_diff(c1.bilinear(&v, &w), oracle) < 1e-11);
            assert!(rel_diff(c2.bilinear(&v, &u), oracle) < 1e-11);
        }
    }
}

/// Outward unit normal of a boundary edge, from the triangle that owns it.
fn outward_normal(mesh: &TriMesh, owners: &std::collections::HashMap<[usize; 2], Vec<usize>>, e: [usize; 2]) -> [f64; 2] {
    let key = [e[0].min(e[1]), e[0].max(e[1])];
    let t = owners[&key][0];
    let third = mesh.triangles[t].iter().copied().find(|&k| k != e[0] && k != e[1]).unwrap();
    let (a, b, c) = (mesh.vertices[e[0]], mesh.vertices[e[1]], mesh.vertices[third]);
    let h = dist(a, b);
    let mut n = [(b[1] - a[1]) / h, -(b[0] - a[0]) / h];
    if n[0] * (c[0] - a[0]) + n[1] * (c[1] - a[1]) > 0.0 {
        n = [-n[0], -n[1]];
    }
    n
}

#[test]
fn convection_integration_by_parts() {
    // For a divergence-free u: c(u,w,v) + c(u,v,w) = ∫_∂Ω (u·n)(w·v).
    let mut r = rng(5);
    for s in [cavity_pair(4).1, step_pair(1.0).0] {
        let mesh = s.mesh();
        let owners = mesh.edge_triangles();
        let u = s.interpolate_velocity(|x, y| [0.7 * x + 0.2 * y, 0.3 * x - 0.7 * y]);
        let (w, v) = (random_vec(&mut r, s.n_velocity()), random_vec(&mut r, s.n_velocity()));
        let nn = s.n_nodes();
        let mut boundary = 0.0;
        for &(e, _) in &mesh.boundary_edges {
            let normal = outward_normal(mesh, &owners, e);
            let m = s.midpoint_node(e[0], e[1]).unwrap();
            let nodes = [e[0], m, e[1]];
            let (a, b) = (mesh.vertices[e[0]], mesh.vertices[e[1]]);
            let h = dist(a, b);
            for (t, wt) in gauss5() {
                let x = [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])];
                let un = (0.7 * x[0] + 0.2 * x[1]) * normal[0] + (0.3 * x[0] - 0.7 * x[1]) * normal[1];
                let dot: f64 = (0..2)
                    .map(|c| edge_interp(nodes.map(|k| w[c * nn + k]), t) * edge_interp(nodes.map(|k| v[c * nn + k]), t))
                    .sum();
                boundary += wt * h * un * dot;
            }
        }
        let (c1, _) = assemble_convection(&s, &u, false).unwrap();
        let lhs = c1.bilinear(&v, &w) + c1.bilinear(&w, &v);
        assert!((lhs - boundary).abs() < 1e-10 * boundary.abs().max(1.0), "{lhs} vs {boundary}");
    }
}

#[test]
fn interface_coupling_matches_edge_quadrature() {
    let mut r = rng(3);
    for (s, length) in [(cavity_pair(8).0, 1.0), (step_pair(2.0).1, 5.0)] {
        let (t_int, mg) = assemble_interface_coupling(&s).unwrap();
        let nt = s.trace().num_nodes();
        let ones: Vec<f64> = (0..2 * nt).map(|k| if k < nt { 1.0 } else { 0.0 }).collect();
        assert!((mg.bilinear(&ones, &ones) - length).abs() < 1e-12);
        assert!(t_int.matvec(&vec![0.0; 2 * nt]).iter().all(|&x| x == 0.0));

        let v = random_vec(&mut r, s.n_velocity());
        let g = random_vec(&mut r, 2 * nt);
        let tr = s.trace();
        let nn = s.n_nodes();
        let mut oracle = 0.0;
        for e in &tr.edges {
            let h = dist(s.node_coords()[tr.nodes[e[0]]], s.node_coords()[tr.nodes[e[2]]]);
            for (t, wt) in gauss5() {
                for c in 0..2 {
                    let vv = edge_interp(e.map(|k| v[c * nn + tr.nodes[k]]), t);
                    let gg = edge_interp(e.map(|k| g[c * nt + k]), t);
                    oracle += wt * h * vv * gg;
                }
            }
        }
        assert!(rel_diff(t_int.bilinear(&v, &g), oracle) < 1e-12);
    }
}

fn h1_norm(s: &TaylorHoodSpace, u: &[f64]) -> f64 {
    let x = assemble_mass(s).add_scaled(1.0, &block_diag2(&assemble_scalar_stiffness(s))).unwrap();
    x.bilinear(u, u).sqrt()
}

#[test]
fn skew_form_vanishes_on_free_fields() {
    let mut r = rng(9);
    for s in [cavity_pair(4).0, step_pair(1.0).0] {
        let mask = s.dirichlet_mask();
        for _ in 0..5 {
            let u = random_vec(&mut r, s.n_velocity());
            let mut v = random_vec(&mut r, s.n_velocity());
            v.iter_mut().zip(&mask).filter(|(_, m)| **m).for_each(|(x, _)| *x = 0.0);
            let (c1, _) = assemble_convection(&s, &u, true).unwrap();
            let bound = 1e-12 * h1_norm(&s, &u) * h1_norm(&s, &v).powi(2);
            assert!(c1.bilinear(&v, &v).abs() <= bound);
        }
    }
}

#[test]
fn stiffness_is_linear_in_viscosity() {
    let s = cavity_pair(4).0;
    let a1 = assemble_stiffness(&s, 0.7).unwrap();
    let a2 = assemble_stiffness(&s, 1.4).unwrap();
    for (x, y) in a1.values().iter().zip(a2.values()) {
        assert_eq!(2.0 * x, *y);
    }
    assert!(assemble_stiffness(&s, 0.0).is_err());
}

fn free_inf_sup(s: &TaylorHoodSpace, perm: Option<&[usize]>) -> f64 {
    let free = s.free_velocity_dofs();
    let cols: Vec<usize> = match perm {
        Some(p) => p.iter().map(|&k| free[k]).collect(),
        None => free.clone(),
    };
    let rows: Vec<usize> = (0..s.n_pressure()).collect();
    let b = assemble_divergence(s).submatrix(&rows, &cols).to_dense();
    let xu = block_diag2(&assemble_scalar_stiffness(s)).submatrix(&cols, &cols).to_dense();
    let xp = assemble_pressure_mass(s).to_dense();
    // The constant pressure is in the kernel when every boundary dof is
    // prescribed; factor it out by restricting to mean-free pressures.
    let np = rows.len();
    let mut basis = Vec::new();
    for k in 0..np - 1 {
        let mut q = vec![0.0; np];
        q[k] = 1.0;
        q[np - 1] = -1.0;
        basis.push(q);
    }
    let z = DenseMatrix::from_columns(&basis).unwrap();
    let bz = z.tr_matmul(&b).unwrap();
    let xz = z.tr_matmul(&xp.matmul(&z).unwrap()).unwrap();
    smallest_generalized_singular_value(&bz, &xu, &xz).unwrap()
}

#[test]
fn taylor_hood_inf_sup_positive_and_permutation_invariant() {
    let s = cavity_pair(4).1;
    let beta = free_inf_sup(&s, None);
    assert!(beta > 1e-2, "beta = {beta}");
    let n = s.free_velocity_dofs().len();
    let perm: Vec<usize> = (0..n).rev().collect();
    assert!((free_inf_sup(&s, Some(&perm)) - beta).abs() < 1e-10);
}

#[test]
fn inf_sup_of_zero_coupling_is_zero() {
    let b = DenseMatrix::zeros(3, 5);
    let beta = smallest_generalized_singular_value(&b, &DenseMatrix::identity(5), &DenseMatrix::identity(3)).unwrap();
    assert!(beta.abs() < 1e-14);
}

#[test]
fn mass_matrices_are_spd_on_free_dofs() {
    use ddflow::linalg::sym_eig;
    let s = cavity_pair(2).0;
    let free = s.free_velocity_dofs();
    let m = assemble_mass(&s).submatrix(&free, &free).to_dense();
    let (ev, _) = sym_eig(&m).unwrap();
    assert!(*ev.last().unwrap() > 0.0);
    let (_, mg) = assemble_interface_coupling(&s).unwrap();
    let (ev, _) = sym_eig(&mg.to_dense()).unwrap();
    assert!(*ev.last().unwrap() > 0.0);
}

#[test]
fn divergence_pairs_linear_field_with_constant() {
    for s in [cavity_pair(4).0, step_pair(1.0).1] {
        let u = s.interpolate_velocity(|x, y| [x, y]);
        let q = vec![1.0; s.n_pressure()];
        let area = s.mesh().area();
        assert!((assemble_divergence(&s).bilinear(&q, &u) + 2.0 * area).abs() < 1e-10);
        let c = s.interpolate_velocity(|_, _| [1.0, -2.0]);
        assert!(assemble_divergence(&s).matvec(&c).iter().all(|x| x.abs() < 1e-12));
    }
}

fn sparse_is_symmetric(a: &SparseMatrix) -> bool {
    a.max_asymmetry() < 1e-14
}

#[test]
fn assembled_operators_symmetric() {
    let s = step_pair(1.0).0;
    assert!(sparse_is_symmetric(&assemble_mass(&s)));
    assert!(sparse_is_symmetric(&assemble_stiffness(&s, 0.4).unwrap()));
    assert!(sparse_is_symmetric(&assemble_pressure_mass(&s)));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn step_meshes_valid_at_any_density(d in 1.0f64..4.0) {
        let (m1, m2, map) = build_step_meshes(d).unwrap();
        prop_assert!((m1.area() + m2.area() - 82.0).abs() < 1e-10);
        for m in [&m1, &m2] {
            let diag = validate_mesh(m);
            prop_assert!(diag.is_valid(), "{:?}", diag.violations);
        }
        for &(a, b) in &map.vertex_pairing {
            prop_assert!(dist(m1.vertices[a], m2.vertices[b]) < 1e-12);
        }
    }

    #[test]
    fn cavity_meshes_valid(half in 1usize..12) {
        let (m1, m2, map) = build_cavity_meshes(2 * half).unwrap();
        prop_assert!((m1.area() + m2.area() - 1.0).abs() < 1e-10);
        prop_assert!(validate_mesh(&m1).is_valid() && validate_mesh(&m2).is_valid());
        prop_assert_eq!(map.num_edges(), 2 * half);
    }

    #[test]
    fn mass_partition_of_unity(half in 1usize..6) {
        let (s1, s2) = cavity_pair(2 * half);
        for s in [&s1, &s2] {
            let ones = vec![1.0; s.n_velocity()];
            prop_assert!((assemble_mass(s).bilinear(&ones, &ones) - 2.0 * s.mesh().area()).abs() < 1e-10);
        }
    }
}
