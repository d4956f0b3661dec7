mod common;

use common::*;
use ddflow::dd::*;
use ddflow::fem::assemble_interface_coupling;
use ddflow::linalg::SparseMatrix;
use ddflow::ns::*;

fn problem(g: Geometry, res: f64, ubar: f64) -> DdProblem {
    let mut t = TransientConfig::for_geometry(g);
    t.ubar = ubar;
    DdProblem::build(DdConfig::new(t), res).unwrap()
}

fn start(p: &mut DdProblem) {
    let n = [p.subdomain(0).space().n_velocity(), p.subdomain(1).space().n_velocity()];
    let dt = p.config().transient.dt;
    p.begin_step(&vec![0.0; n[0]], &vec![0.0; n[1]], dt).unwrap();
}

/// Smallest relative error between the adjoint directional derivative and
/// central differences over a sweep of step sizes.
pub fn fd_gradient_error(p: &mut DdProblem, g: &[f64], h: &[f64]) -> f64 {
    let (_, grad) = p.value_and_gradient(g).unwrap();
    let analytic = p.mgamma().bilinear(&grad, h);
    [1e-3, 1e-4, 1e-5, 1e-6]
        .iter()
        .map(|&eps| {
            let gp: Vec<f64> = g.iter().zip(h).map(|(a, b)| a + eps * b).collect();
            let gm: Vec<f64> = g.iter().zip(h).map(|(a, b)| a - eps * b).collect();
            let fd = (p.value(&gp).unwrap() - p.value(&gm).unwrap()) / (2.0 * eps);
            rel_diff(analytic, fd)
        })
        .fold(f64::INFINITY, f64::min)
}

#[test]
fn adjoint_gradient_matches_finite_differences() {
    for (geom, res, ubar, scale) in [(Geometry::Cavity, 6.0, 3.0, 1.0), (Geometry::Step, 1.0, 4.5, 0.5)] {
        let mut p = problem(geom, res, ubar);
        assert!(p.trace_dim() >= 22);
        start(&mut p);
        let mut r = rng(7);
        for _ in 0..3 {
            let g: Vec<f64> = random_vec(&mut r, p.trace_dim()).iter().map(|x| scale * x).collect();
            let h = random_vec(&mut r, p.trace_dim());
            let err = fd_gradient_error(&mut p, &g, &h);
            assert!(err < 1e-5, "{geom}: {err:e}");
        }
    }
}

#[test]
fn functional_examples() {
    let p = problem(Geometry::Cavity, 4.0, 3.0);
    let mg = p.mgamma();
    let n = p.trace_dim();
    assert_eq!(eval_functional(&vec![0.0; n], &vec![0.0; n], mg, 0.0).unwrap(), 0.0);

    let mut r = rng(2);
    let jump = random_vec(&mut r, n);
    let g = random_vec(&mut r, n);
    // ½∫|e|² by edge quadrature of the trace interpolant.
    let space = p.subdomain(0).space();
    let tr = space.trace();
    let nt = tr.num_nodes();
    let mut oracle = 0.0;
    for e in &tr.edges {
        let h = dist(space.node_coords()[tr.nodes[e[0]]], space.node_coords()[tr.nodes[e[2]]]);
        for (t, w) in gauss5() {
            for c in 0..2 {
                oracle += 0.5 * w * h * edge_interp(e.map(|k| jump[c * nt + k]), t).powi(2);
            }
        }
    }
    let j0 = eval_functional(&g, &jump, mg, 0.0).unwrap();
    assert!((j0 - oracle).abs() < 1e-12 * oracle);
    let j1 = eval_functional(&g, &jump, mg, 0.3).unwrap();
    let j2 = eval_functional(&g, &jump, mg, 0.6).unwrap();
    assert!(((j2 - j1) - 0.15 * mg.bilinear(&g, &g)).abs() < 1e-12);
}

#[test]
fn matching_traces_give_zero_adjoints() {
    let mut p = problem(Geometry::Cavity, 4.0, 3.0);
    let n = [p.subdomain(0).operator().n_total(), p.subdomain(1).operator().n_total()];
    p.set_states(&vec![0.0; n[0]], &vec![0.0; n[1]]).unwrap();
    let adj = p.solve_adjoint_pair().unwrap();
    assert!(adj.iter().flatten().all(|&x| x == 0.0));
    let g = vec![0.0; p.trace_dim()];
    assert!(p.gradient(&g, &adj).unwrap().iter().all(|&x| x == 0.0));
}

#[test]
fn adjoints_are_divergence_free_and_gamma_enters_linearly() {
    let mut p = problem(Geometry::Step, 1.0, 4.5);
    start(&mut p);
    let zero = vec![0.0; p.trace_dim()];
    p.solve_states(&zero).unwrap();
    let adj = p.solve_adjoint_pair().unwrap();
    for i in 0..2 {
        assert!(p.subdomain(i).operator().divergence_residual(&adj[i]) <= 1e-9);
    }
    let g0 = p.gradient(&zero, &adj).unwrap();
    p.set_gamma(0.5).unwrap();
    assert_eq!(p.gradient(&zero, &adj).unwrap(), g0);
}

#[test]
fn lbfgs_quadratic_bowl() {
    let c: Vec<f64> = (0..8).map(|k| (k as f64 - 3.0) * 0.7).collect();
    let opts = LbfgsOptions { grad_tol: 1e-10, ..LbfgsOptions::default() };
    let fg = |x: &[f64]| {
        let d: Vec<f64> = x.iter().zip(&c).map(|(a, b)| a - b).collect();
        Ok((0.5 * d.iter().map(|v| v * v).sum::<f64>(), d))
    };
    let (x, rep) = lbfgs_minimize(fg, vec![5.0; 8], InnerProduct::Euclidean, &opts).unwrap();
    assert!(rep.iterations <= 10);
    assert!(rep.final_gradient_norm() < 1e-10);
    assert!(x.iter().zip(&c).all(|(a, b)| (a - b).abs() < 1e-10));

    let (_, rep) = lbfgs_minimize(fg, c.clone(), InnerProduct::Euclidean, &opts).unwrap();
    assert_eq!(rep.iterations, 0);
    assert_eq!(rep.termination, Termination::Gradient);
}

#[test]
fn lbfgs_rosenbrock() {
    let fg = |x: &[f64]| {
        let (a, b) = (x[0], x[1]);
        let f = (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2);
        let g = vec![-2.0 * (1.0 - a) - 400.0 * a * (b - a * a), 200.0 * (b - a * a)];
        Ok((f, g))
    };
    let opts = LbfgsOptions { max_iter: 200, grad_tol: 1e-10, ..LbfgsOptions::default() };
    let (x, rep) = lbfgs_minimize(fg, vec![-1.2, 1.0], InnerProduct::Euclidean, &opts).unwrap();
    assert!(rep.iterations <= 200);
    assert!((x[0] - 1.0).abs() < 1e-6 && (x[1] - 1.0).abs() < 1e-6, "{x:?}");
}

#[test]
fn zero_data_time_loop_is_trivial() {
    let mut t = TransientConfig::cavity();
    t.ubar = 0.0;
    t.t_final = 0.03;
    let mut p = DdProblem::build(DdConfig::new(t), 4.0).unwrap();
    let run = dd_time_loop(&mut p).unwrap();
    for (r, g) in run.reports.iter().zip(&run.controls) {
        assert!(r.iterations <= 1);
        assert_eq!(r.final_value(), 0.0);
        assert!(g.iter().all(|&x| x == 0.0));
    }
}

/// Largest velocity mismatch after solving both subdomains with the
/// monolithic control at the first step.
fn monolithic_control_mismatch(geom: Geometry, res: f64) -> f64 {
    let mut t = TransientConfig::for_geometry(geom);
    t.t_final = t.dt;
    let mono = monolithic_space(geom, res).unwrap();
    let traj = monolithic_solve(&mono, &t).unwrap();
    let mut p = DdProblem::build(DdConfig::new(t), res).unwrap();
    let run = monolithic_restriction_run(&p, &mono, &traj).unwrap();
    let [r1, r2] = &run.trajectories;
    p.begin_step(&r1.u[0], &r2.u[0], traj.times[1]).unwrap();
    p.solve_states(&run.controls[0]).unwrap();
    [r1, r2]
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let u = p.subdomain(i).velocity();
            u.iter().zip(&r.u[1]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
        })
        .fold(0.0, f64::max)
}

// The restricted monolithic velocity is divergence free against the global
// pressure test functions only, not against each subdomain's interface
// pressure functions, so the reproduction is exact only in the mesh limit.
#[test]
fn monolithic_control_converges_to_monolithic_state() {
    let e: Vec<f64> = [4.0, 8.0, 16.0]
        .iter()
        .map(|&n| monolithic_control_mismatch(Geometry::Cavity, n))
        .collect();
    assert!(e[1] < 0.25 * e[0] && e[2] < 0.25 * e[1], "{e:?}");
    assert!(e[2] < 1e-3);
    let s = [1.0, 2.0].map(|d| monolithic_control_mismatch(Geometry::Step, d));
    assert!(s[1] < s[0], "{s:?}");
}

#[test]
fn optimizer_never_increases_the_functional() {
    let mut t = TransientConfig::cavity();
    t.t_final = 0.03;
    let mut p = DdProblem::build(DdConfig::new(t), 4.0).unwrap();
    let run = dd_time_loop(&mut p).unwrap();
    for r in &run.reports {
        assert!(r.final_value() <= r.functional[0]);
    }
}

#[test]
fn interface_mass_of_problem_matches_assembly() {
    let p = problem(Geometry::Step, 2.0, 4.5);
    let (_, mg) = assemble_interface_coupling(p.subdomain(0).space()).unwrap();
    let diff: SparseMatrix = mg.add_scaled(-1.0, p.mgamma()).unwrap();
    assert!(diff.norm_inf() < 1e-15);
}
