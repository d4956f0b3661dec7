use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use ddflow::dd::{monolithic_space, DdConfig, DdProblem};
use ddflow::fem::{assemble_convection, assemble_mass};
use ddflow::ns::{Geometry, TransientConfig};
use ddflow::par::{map_range_with, set_execution, Execution};

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn assembly(c: &mut Criterion) {
    let space = monolithic_space(Geometry::Cavity, 16.0).unwrap();
    let u: Vec<f64> = (0..space.n_velocity()).map(|i| (i as f64 * 0.37).sin()).collect();
    let mut g = c.benchmark_group("assembly");
    for (name, mode) in MODES {
        set_execution(mode);
        g.bench_function(BenchmarkId::new("mass", name), |b| b.iter(|| assemble_mass(&space)));
        g.bench_function(BenchmarkId::new("convection", name), |b| b.iter(|| assemble_convection(&space, &u, true)));
    }
    set_execution(Execution::Parallel);
}

fn subdomain_solves(c: &mut Criterion) {
    let t = TransientConfig::cavity();
    let mut p = DdProblem::build(DdConfig::new(t), 16.0).unwrap();
    let nv = [p.subdomain(0).space().n_velocity(), p.subdomain(1).space().n_velocity()];
    p.begin_step(&vec![0.0; nv[0]], &vec![0.0; nv[1]], t.dt).unwrap();
    let g0 = vec![0.0; p.trace_dim()];
    let mut g = c.benchmark_group("dd");
    g.sample_size(10);
    for (name, mode) in MODES {
        set_execution(mode);
        g.bench_function(BenchmarkId::new("value_and_gradient", name), |b| {
            b.iter(|| p.value_and_gradient(&g0).unwrap())
        });
    }
    set_execution(Execution::Parallel);
}

fn ordered_map(c: &mut Criterion) {
    let mut g = c.benchmark_group("map_range");
    for (name, mode) in MODES {
        g.bench_function(name, |b| {
            b.iter(|| map_range_with(mode, 256, |i| (0..2000).map(|k| ((i * k) as f64).sqrt()).sum::<f64>()))
        });
    }
}

criterion_group!(benches, assembly, subdomain_solves, ordered_map);
criterion_main!(benches);
