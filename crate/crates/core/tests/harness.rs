mod common;

use std::collections::BTreeMap;
use std::sync::OnceLock;

use common::*;
use ddflow::dd::{subdomain_spaces, DdConfig, OptimReport, Termination};
use ddflow::fem::TaylorHoodSpace;
use ddflow::harness::*;
use ddflow::ns::{Geometry, TransientConfig, Trajectory};
use ddflow::pod::*;
use ddflow::podnn::*;
use ddflow::Error;

fn spaces() -> &'static (TaylorHoodSpace, TaylorHoodSpace) {
    static S: OnceLock<(TaylorHoodSpace, TaylorHoodSpace)> = OnceLock::new();
    S.get_or_init(|| subdomain_spaces(Geometry::Cavity, 4.0).unwrap())
}

fn random_pair(seed: u64, steps: usize) -> [Trajectory; 2] {
    let mut r = rng(seed);
    let (s1, s2) = spaces();
    [s1, s2].map(|s| Trajectory {
        times: (0..steps).map(|n| n as f64 * 0.01).collect(),
        u: (0..steps).map(|_| random_vec(&mut r, s.n_velocity())).collect(),
        p: (0..steps).map(|_| random_vec(&mut r, s.n_pressure())).collect(),
    })
}

fn scaled(t: &[Trajectory; 2], f: f64) -> [Trajectory; 2] {
    t.clone().map(|mut t| {
        t.u.iter_mut().chain(t.p.iter_mut()).flatten().for_each(|x| *x *= f);
        t
    })
}

#[test]
fn error_series_examples() {
    let (s1, s2) = spaces();
    let norms = ErrorNorms::new(s1, s2).unwrap();
    let b = random_pair(1, 6);
    let same = relative_error_series(&b, &b, &norms).unwrap();
    assert!(same.errors.iter().flatten().all(|&e| e == 0.0));
    assert_eq!(same.n_steps(), 6);

    let a = scaled(&b, 1.01);
    let rep = relative_error_series(&a, &b, &norms).unwrap();
    for k in 0..4 {
        assert!(rep.errors[k].iter().all(|e| (e - 0.01).abs() < 1e-12));
        assert!((rep.mean(k) - 0.01).abs() < 1e-12);
    }

    let mut shifted = b.clone();
    shifted[1].times[3] += 1e-3;
    assert!(relative_error_series(&b, &shifted, &norms).is_err());
    let mut short = b.clone();
    short[0].u.pop();
    short[0].p.pop();
    short[0].times.pop();
    assert!(relative_error_series(&short, &b, &norms).is_err());
}

#[test]
fn zero_reference_steps_are_flagged() {
    let (s1, s2) = spaces();
    let norms = ErrorNorms::new(s1, s2).unwrap();
    let mut b = random_pair(2, 4);
    for t in &mut b {
        t.u[0].iter_mut().for_each(|x| *x = 0.0);
        t.p[0].iter_mut().for_each(|x| *x = 0.0);
    }
    let a = scaled(&b, 1.5);
    let rep = relative_error_series(&a, &b, &norms).unwrap();
    for k in 0..4 {
        assert!(rep.absolute[k][0] && !rep.absolute[k][1]);
        assert!((rep.mean(k) - 0.5).abs() < 1e-12);
    }
    let mut csv = Vec::new();
    rep.write_csv(&mut csv).unwrap();
    let text = String::from_utf8(csv).unwrap();
    assert!(text.lines().nth(1).unwrap().ends_with("u1;p1;u2;p2"));
}

#[test]
fn iteration_summary_examples() {
    let report = OptimReport {
        iterations: 5,
        evaluations: 6,
        functional: vec![1.0; 6],
        gradient_norm: vec![1.0; 6],
        termination: Termination::Gradient,
    };
    assert_eq!(iteration_summary("fom", &[report]).unwrap().mean, 5.0);
    assert!(iteration_summary("fom", &[]).is_err());
    let a = IterationSummary::from_counts("fom", vec![4, 8]).unwrap();
    let b = IterationSummary::from_counts("rom", vec![1, 2]).unwrap();
    let mut csv = Vec::new();
    write_iteration_csv(&mut csv, &[a, b]).unwrap();
    assert_eq!(String::from_utf8(csv).unwrap(), "step,fom,rom\n1,4,1\n2,8,2\nmean,6,1.5\n");
}

#[test]
fn config_round_trips() {
    for g in [Geometry::Step, Geometry::Cavity] {
        let cfg = BenchmarkConfig::preset(g);
        cfg.validate().unwrap();
        assert_eq!(BenchmarkConfig::parse(&cfg.to_text()).unwrap(), cfg);
        assert_eq!(BenchmarkConfig::from_map(&cfg.to_map()).unwrap(), cfg);
        for key in CONFIG_KEYS {
            assert!(cfg.get(key).is_some(), "{key}");
        }
    }
    let mut cfg = BenchmarkConfig::preset(Geometry::Cavity);
    cfg.set("Ubar", "2.5").unwrap();
    assert_eq!(cfg.ubar, 2.5);
    assert!(cfg.set("nonsense", "1").is_err());
    assert!(cfg.set("dt", "abc").is_err());
    cfg.set("modes", "101,1,1,1,1,1,1").unwrap();
    assert!(cfg.validate().is_err());
}

#[test]
fn trajectory_round_trips_bitwise() {
    let dir = tempfile::tempdir().unwrap();
    let [t, _] = random_pair(3, 101);
    let mut stored = StoredTrajectory::from_trajectory(&t);
    // Values that a decimal format would not preserve.
    stored.fields[0].1[50][0] = f64::from_bits(0x3ff0_0000_0000_0001);
    stored.fields[1].1[99][1] = -0.0;
    stored.fields[1].1[99][2] = f64::MIN_POSITIVE / 8.0;
    let path = dir.path().join("trajectory_a.bin");
    save_trajectory(&path, &stored).unwrap();
    let back = load_trajectory(&path).unwrap();
    for ((_, a), (_, b)) in stored.fields.iter().zip(&back.fields) {
        for (x, y) in a.iter().flatten().zip(b.iter().flatten()) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
    }
    assert_eq!(back.times, stored.times);
    let path2 = dir.path().join("trajectory_b.bin");
    save_trajectory(&path2, &back).unwrap();
    assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(&path2).unwrap());
    assert_eq!(back.to_trajectory().unwrap(), stored.to_trajectory().unwrap());
}

#[test]
fn damaged_trajectory_files_are_rejected() {
    let [t, _] = random_pair(4, 3);
    let mut buf = Vec::new();
    StoredTrajectory::from_trajectory(&t).write(&mut buf).unwrap();
    let mut bad = buf.clone();
    bad[..4].copy_from_slice(b"JUNK");
    assert!(matches!(StoredTrajectory::read(bad.as_slice()), Err(Error::Format(m)) if m.contains("not a trajectory")));
    let mut v2 = buf.clone();
    v2[6] = b'2';
    assert!(matches!(StoredTrajectory::read(v2.as_slice()), Err(Error::Format(m)) if m.contains("version")));
    for cut in [3, 20, buf.len() / 2, buf.len() - 1] {
        assert!(matches!(StoredTrajectory::read(&buf[..cut]), Err(Error::Format(m)) if m.contains("truncated")));
    }
    let mut long = buf.clone();
    long.push(0);
    assert!(StoredTrajectory::read(long.as_slice()).is_err());
}

struct Offline {
    coll: SnapshotCollection,
    off: OfflineSpaces,
    bases: PodBases,
}

fn offline() -> &'static Offline {
    static S: OnceLock<Offline> = OnceLock::new();
    S.get_or_init(|| {
        let mut t = TransientConfig::cavity();
        t.t_final = 0.03;
        let cfg = DdConfig::new(t);
        let (s1, s2) = spaces().clone();
        let off = OfflineSpaces::new(s1, s2, &cfg).unwrap();
        let params = vec![vec![1.0, 2.0], vec![1.0, 3.0]];
        let coll = collect_snapshots(&off, &cfg, &params, SnapshotSource::Dd, None, Some(5)).unwrap();
        let counts = ModeCounts { u1: 3, p1: 2, u2: 3, p2: 2, s1: 2, s2: 2, g: 2 };
        let ip = InnerProducts::new(&off).unwrap();
        let bases = build_pod_bases(&coll, &off, &ip, &ModeSelection::fixed(counts)).unwrap();
        Offline { coll, off, bases }
    })
}

#[test]
fn dd_run_round_trip() {
    let o = offline();
    let run = &o.coll.runs[1];
    let stored = StoredTrajectory::from_dd_run(run).unwrap();
    let mut buf = Vec::new();
    stored.write(&mut buf).unwrap();
    let back = StoredTrajectory::read(buf.as_slice()).unwrap().to_dd_run().unwrap();
    assert_eq!(&back, run);
}

#[test]
fn snapshot_and_basis_round_trips() {
    let o = offline();
    let dir = tempfile::tempdir().unwrap();
    save_snapshot_sets(dir.path(), &o.coll.sets).unwrap();
    let sets = load_snapshot_sets(dir.path()).unwrap();
    assert_eq!(sets, o.coll.sets);
    assert_eq!(sets[0].seed, Some(5));

    save_pod_bases(dir.path(), &o.bases).unwrap();
    let ip = InnerProducts::new(&o.off).unwrap();
    let back = load_pod_bases(dir.path(), &ip).unwrap();
    for c in Component::ALL {
        assert_eq!(back.get(c).phi, o.bases.get(c).phi, "{c}");
        assert_eq!(back.get(c).eigenvalues, o.bases.get(c).eigenvalues);
    }
    assert_eq!(back.velocity[0].phi, o.bases.velocity[0].phi);
    assert_eq!(back.liftings, o.bases.liftings);
    assert_eq!(back.counts, o.bases.counts);

    let mut buf = Vec::new();
    write_basis(&mut buf, o.bases.get(Component::P2)).unwrap();
    assert!(read_basis(&buf[..buf.len() - 8]).is_err());
}

#[test]
fn model_and_run_meta_round_trips() {
    let o = offline();
    let dir = tempfile::tempdir().unwrap();
    let opts = PodNnOptions { adam: AdamOptions { epochs: 5, ..AdamOptions::default() }, ..PodNnOptions::default() };
    let (model, _) = train_component(
        &o.coll.sets[Component::P1.index()],
        o.bases.get(Component::P1),
        &o.coll.params,
        StepWindow::full(3),
        &opts,
    )
    .unwrap();
    save_model(dir.path(), &model).unwrap();
    assert_eq!(load_model(dir.path(), Component::P1).unwrap(), model);
    assert!(load_model(dir.path(), Component::U1).is_err());

    let cfg = BenchmarkConfig::preset(Geometry::Step);
    let meta = RunMeta {
        stage: "offline".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        config: cfg.to_map(),
        seed: cfg.seed,
        artifacts: vec!["basis_u1.bin".into()],
        summary: serde_json::json!({ "modes": 3 }),
    };
    save_run_meta(dir.path(), &meta).unwrap();
    let back = load_run_meta(dir.path()).unwrap();
    assert_eq!(back, meta);
    assert_eq!(BenchmarkConfig::from_map(&back.config).unwrap(), cfg);
    assert!(BenchmarkConfig::from_map(&BTreeMap::from([("bench".to_string(), "moon".to_string())])).is_err());
}
