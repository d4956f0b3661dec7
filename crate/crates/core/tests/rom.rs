mod common;

use std::sync::OnceLock;

use common::*;
use ddflow::dd::{subdomain_spaces, DdConfig, DdProblem};
use ddflow::fem::{assemble_convection, assemble_mass};
use ddflow::linalg::{DenseMatrix, SparseMatrix};
use ddflow::ns::{Geometry, TransientConfig};
use ddflow::pod::*;
use ddflow::rom::*;

fn transient() -> TransientConfig {
    let mut t = TransientConfig::cavity();
    t.t_final = 0.05;
    t
}

struct Setup {
    off: OfflineSpaces,
    bases: PodBases,
}

/// Small cavity offline stage: two parameters, five steps each.
fn setup() -> &'static Setup {
    static S: OnceLock<Setup> = OnceLock::new();
    S.get_or_init(|| {
        let cfg = DdConfig::new(transient());
        let (s1, s2) = subdomain_spaces(Geometry::Cavity, 4.0).unwrap();
        let off = OfflineSpaces::new(s1, s2, &cfg).unwrap();
        let params = vec![vec![1.0, 2.0], vec![1.0, 3.5]];
        let coll = collect_snapshots(&off, &cfg, &params, SnapshotSource::Dd, None, Some(0)).unwrap();
        let ip = InnerProducts::new(&off).unwrap();
        let counts = ModeCounts { u1: 6, p1: 4, u2: 6, p2: 4, s1: 4, s2: 4, g: 5 };
        let sel = ModeSelection { clamp_to_rank: true, ..ModeSelection::fixed(counts) };
        let bases = build_pod_bases(&coll, &off, &ip, &sel).unwrap();
        Setup { off, bases }
    })
}

fn operators(skew: bool) -> ReducedOperators {
    let s = setup();
    project_operators(&s.off.spaces, &s.bases, skew).unwrap()
}

fn started(ops: &ReducedOperators, ubar: f64) -> RomProblem<'_> {
    let mut t = transient();
    t.ubar = ubar;
    t.skew = ops.skew;
    let mut p = RomProblem::new(ops, rom_config(t)).unwrap();
    let z = [vec![0.0; ops.sub[0].n_u() + 1], vec![0.0; ops.sub[1].n_u() + 1]];
    p.begin_step(&z[0], &z[1], t.dt).unwrap();
    p
}

#[test]
fn reduced_gradient_matches_finite_differences() {
    let ops = operators(false);
    assert_eq!(ops.n_g(), 5);
    let mut p = started(&ops, 3.0);
    let mut r = rng(3);
    for _ in 0..3 {
        let g = random_vec(&mut r, 5);
        let h = random_vec(&mut r, 5);
        let (_, grad) = p.value_and_gradient(&g).unwrap();
        let analytic: f64 = ops.mgamma_hat.matvec(&grad).iter().zip(&h).map(|(a, b)| a * b).sum();
        let err = [1e-3, 1e-4, 1e-5, 1e-6]
            .iter()
            .map(|&eps| {
                let gp: Vec<f64> = g.iter().zip(&h).map(|(a, b)| a + eps * b).collect();
                let gm: Vec<f64> = g.iter().zip(&h).map(|(a, b)| a - eps * b).collect();
                rel_diff(analytic, (p.value(&gp).unwrap() - p.value(&gm).unwrap()) / (2.0 * eps))
            })
            .fold(f64::INFINITY, f64::min);
        assert!(err < 1e-6, "{err:e}");
    }
}

#[test]
fn adjoints_satisfy_the_reduced_divergence_constraint() {
    let ops = operators(false);
    let mut p = started(&ops, 3.0);
    p.solve_states(&random_vec(&mut rng(5), 5)).unwrap();
    let adj = p.solve_adjoints().unwrap();
    for i in 0..2 {
        assert!(p.adjoint_divergence(i, &adj[i]) <= 1e-12);
    }
}

#[test]
fn skew_tensor_vanishes_on_repeated_arguments() {
    let ops = operators(true);
    let mut r = rng(9);
    for s in &ops.sub {
        let m = s.n_u() + 1;
        for _ in 0..5 {
            let u = random_vec(&mut r, m);
            let v = random_vec(&mut r, s.n_u());
            let mut total = 0.0;
            let mut scale = 0.0;
            for (k, vk) in v.iter().enumerate() {
                for (i, ui) in u.iter().enumerate() {
                    for (j, vj) in v.iter().enumerate() {
                        let c = s.conv[(k * m + i) * m + j + 1];
                        total += vk * ui * vj * c;
                        scale += (vk * ui * vj * c).abs();
                    }
                }
            }
            assert!(total.abs() <= 1e-12 * scale.max(1.0), "{total:e}");
        }
    }
}

#[test]
fn lifted_forms_match_full_assembly() {
    let s = setup();
    let ops = operators(false);
    let mut r = rng(11);
    for i in 0..2 {
        let space = &s.off.spaces[i];
        let sub = &ops.sub[i];
        let psi = augmented_basis(&s.bases.liftings[i], &s.bases.velocity[i].phi).unwrap();
        let m = assemble_mass(space);
        for _ in 0..3 {
            let z = random_vec(&mut r, sub.n_u() + 1);
            let a = random_vec(&mut r, sub.n_u());
            let w = psi.matvec(&z);
            let v = s.bases.velocity[i].reconstruct(&a).unwrap();
            let full_mass = m.bilinear(&v, &w);
            let red_mass: f64 = sub.mass.matvec(&z).iter().zip(&a).map(|(x, y)| x * y).sum();
            assert!((full_mass - red_mass).abs() < 1e-10 * full_mass.abs().max(1.0));
            let (c1, _) = assemble_convection(space, &w, false).unwrap();
            let full_conv = c1.bilinear(&v, &w);
            let red_conv: f64 = sub.convect(&z).iter().zip(&a).map(|(x, y)| x * y).sum();
            assert!((full_conv - red_conv).abs() < 1e-10 * full_conv.abs().max(1.0));
        }
    }
}

#[test]
fn archive_round_trip_is_exact() {
    let ops = operators(false);
    let mut buf = Vec::new();
    ops.write_archive(&mut buf).unwrap();
    let back = ReducedOperators::read_archive(buf.as_slice()).unwrap();
    assert_eq!(back, ops);
    let mut again = Vec::new();
    back.write_archive(&mut again).unwrap();
    assert_eq!(again, buf);
    assert!(ReducedOperators::read_archive(&buf[..buf.len() - 3]).is_err());
    let mut bad = buf.clone();
    bad[0] = b'X';
    assert!(ReducedOperators::read_archive(bad.as_slice()).is_err());
}

#[test]
fn zero_data_needs_no_iterations() {
    let ops = operators(false);
    let mut t = transient();
    t.ubar = 0.0;
    let mut p = RomProblem::new(&ops, rom_config(t)).unwrap();
    let run = rom_time_loop(&mut p).unwrap();
    assert_eq!(run.mean_iterations(), 0.0);
    for s in &run.states {
        assert!(s.u.iter().chain(&s.p).flatten().chain(&s.g).all(|&x| x == 0.0));
    }
}

#[test]
fn lifting_and_projection_identities() {
    let b = &setup().bases;
    let state = ReducedState {
        u: [vec![0.0; b.velocity[0].n()], vec![0.0; b.velocity[1].n()]],
        p: [vec![0.0; b.pressure[0].n()], vec![0.0; b.pressure[1].n()]],
        g: vec![0.0; b.control.n()],
        alpha: 1.0,
    };
    let (fields, g) = lift_to_fom(&state, b).unwrap();
    for i in 0..2 {
        assert_eq!(fields[i].0, b.liftings[i]);
        assert!(fields[i].1.iter().all(|&x| x == 0.0));
    }
    assert!(g.iter().all(|&x| x == 0.0));
    for basis in [&b.velocity[0], &b.pressure[1], &b.control] {
        for j in 0..basis.n() {
            let c = basis.project(&basis.phi.column(j)).unwrap();
            for (k, ck) in c.iter().enumerate() {
                assert!((ck - if k == j { 1.0 } else { 0.0 }).abs() < 1e-12);
            }
        }
    }
}

/// An X-orthonormal basis of the span of the given unit vectors.
fn unit_basis(n: usize, keep: impl Fn(usize) -> bool, x: &SparseMatrix, c: Component) -> ReducedBasis {
    let cols: Vec<Vec<f64>> = (0..n)
        .filter(|&d| keep(d))
        .map(|d| {
            let mut e = vec![0.0; n];
            e[d] = 1.0;
            e
        })
        .collect();
    let s = DenseMatrix::from_columns(&cols).unwrap();
    pod_basis(&s, x, cols.len(), c).unwrap()
}

#[test]
fn complete_bases_reproduce_the_full_solve() {
    let s = setup();
    let ip = InnerProducts::new(&s.off).unwrap();
    let [s1, s2] = &s.off.spaces;
    let velocity: [ReducedBasis; 2] = std::array::from_fn(|i| {
        let sp = &s.off.spaces[i];
        let mask = sp.dirichlet_mask();
        let c = [Component::U1, Component::U2][i];
        unit_basis(sp.n_velocity(), |d| !mask[d], &ip.velocity[i], c)
    });
    let pressure: [ReducedBasis; 2] = std::array::from_fn(|i| {
        let c = [Component::P1, Component::P2][i];
        unit_basis(s.off.spaces[i].n_pressure(), |_| true, &ip.pressure[i], c)
    });
    let control = unit_basis(ip.control.nrows(), |_| true, &ip.control, Component::G);
    let bases = PodBases {
        velocity_plain: velocity.clone(),
        supremiser: velocity.clone(),
        velocity,
        pressure,
        control,
        liftings: s.off.liftings.clone(),
        counts: s.bases.counts,
    };
    let ops = project_operators(&s.off.spaces, &bases, false).unwrap();
    let t = transient();
    let mut rom = started(&ops, t.ubar);
    let mut fom = DdProblem::new(s1.clone(), s2.clone(), DdConfig::new(t)).unwrap();
    fom.begin_step(&vec![0.0; s1.n_velocity()], &vec![0.0; s2.n_velocity()], t.dt).unwrap();

    let g = random_vec(&mut rng(13), ops.trace_dim());
    let g_hat = bases.control.project(&g).unwrap();
    let (j_fom, grad_fom) = fom.value_and_gradient(&g).unwrap();
    let (j_rom, grad_rom) = rom.value_and_gradient(&g_hat).unwrap();
    assert!(rel_diff(j_fom, j_rom) < 1e-9, "{j_fom} vs {j_rom}");
    let state = rom.reduced_state(&g_hat);
    let (fields, _) = lift_to_fom(&state, &bases).unwrap();
    for i in 0..2 {
        let (u, p) = (fom.subdomain(i).velocity(), fom.subdomain(i).pressure());
        let du = u.iter().zip(&fields[i].0).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let dp = p.iter().zip(&fields[i].1).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(du < 1e-9 && dp < 1e-8, "{du:e} {dp:e}");
    }
    // Both gradients are Riesz representatives in the same Mγ geometry.
    let lifted_grad = bases.control.reconstruct(&grad_rom).unwrap();
    let scale = grad_fom.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    for (a, b) in grad_fom.iter().zip(&lifted_grad) {
        assert!((a - b).abs() < 1e-8 * scale.max(1.0));
    }
}
