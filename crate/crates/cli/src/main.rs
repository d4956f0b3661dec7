use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;
use serde_json::json;

use ddflow::dd::{
    dd_time_loop, monolithic_restriction_run, monolithic_space, subdomain_spaces, write_step_csv, DdProblem,
    PressureGauge,
};
use ddflow::fem::TaylorHoodSpace;
use ddflow::harness::{
    iteration_summary, load_model, load_pod_bases, load_snapshot_sets, load_trajectory, relative_error_series,
    save_model, save_pod_bases, save_run_meta, save_snapshot_sets, save_trajectory, write_iteration_csv,
    BenchmarkConfig, ErrorNorms, RunMeta, StoredTrajectory,
};
use ddflow::mesh::write_mesh;
use ddflow::ns::{monolithic_solve, Geometry};
use ddflow::par::{set_execution, Execution};
use ddflow::pod::{
    build_pod_bases_from_sets, collect_snapshots, sample_parameters, Component, InnerProducts, OfflineSpaces,
    SnapshotSource,
};
use ddflow::podnn::{
    restrict_sets, split_parameters, train_state_components, validation_study, write_loss_csv, write_validation_csv,
    StepWindow, STATE_COMPONENTS,
};
use ddflow::rom::{lift_run, project_operators, rom_time_loop, ReducedOperators, RomProblem};
use ddflow::{Error, Result};

#[derive(Parser)]
#[command(name = "ddflow", version, about = "Domain-decomposition Navier-Stokes with POD reduced models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build and export the subdomain and monolithic meshes.
    Mesh(Common),
    /// Monolithic reference solve at the online parameter.
    Monolithic(Common),
    /// Full-order domain-decomposition run at the online parameter.
    DdFom(Common),
    /// Snapshot collection, POD and reduced-operator projection.
    Offline(OfflineArgs),
    /// Reduced-order run from saved offline artifacts.
    Rom(RomArgs),
    /// Train the POD-NN surrogate.
    PodnnTrain(PodnnArgs),
    /// Validate a trained POD-NN on its test parameters.
    PodnnValidate(PodnnArgs),
    /// Relative errors of one DD trajectory against another.
    Compare(CompareArgs),
}

#[derive(Args, Clone)]
struct Common {
    /// Config file (key = value); flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_parser = ["bfs", "cavity"])]
    bench: Option<String>,
    #[arg(long)]
    nu: Option<f64>,
    #[arg(long = "Ubar")]
    ubar: Option<f64>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long = "T")]
    t_final: Option<f64>,
    #[arg(long)]
    density: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long)]
    skew: bool,
    #[arg(long)]
    smooth_inlet: bool,
    /// Mode counts `u1,p1,u2,p2,s1,s2,g`.
    #[arg(long)]
    modes: Option<String>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long, value_parser = ["base", "deep"])]
    arch: Option<String>,
    /// Any other config key, as `key=value`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Run on one thread.
    #[arg(long)]
    sequential: bool,
}

#[derive(Args)]
struct OfflineArgs {
    #[command(flatten)]
    common: Common,
    /// Reuse the snapshot files in this directory instead of solving.
    #[arg(long)]
    snapshots: Option<PathBuf>,
}

#[derive(Args)]
struct RomArgs {
    #[command(flatten)]
    common: Common,
    /// Directory written by `offline` (defaults to `--out`).
    #[arg(long)]
    offline: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Window {
    Full,
    Restricted,
}

#[derive(Args)]
struct PodnnArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, value_enum, default_value = "full")]
    window: Window,
    /// Reuse the snapshot files in this directory instead of solving.
    #[arg(long)]
    snapshots: Option<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    #[command(flatten)]
    common: Common,
    /// Trajectory to assess.
    #[arg(long)]
    a: PathBuf,
    /// Reference trajectory.
    #[arg(long)]
    b: PathBuf,
    /// Label used in the output file name.
    #[arg(long, default_value = "compare")]
    label: String,
}

impl Common {
    fn config(&self) -> Result<BenchmarkConfig> {
        let mut cfg = match &self.config {
            Some(p) => BenchmarkConfig::load(p)?,
            None => BenchmarkConfig::preset(match &self.bench {
                Some(b) => b.parse()?,
                None => Geometry::Cavity,
            }),
        };
        let mut set = |k: &str, v: String| cfg.set(k, &v);
        if let Some(b) = &self.bench {
            set("bench", b.clone())?;
        }
        for (k, v) in [
            ("nu", self.nu),
            ("Ubar", self.ubar),
            ("dt", self.dt),
            ("T", self.t_final),
            ("density", self.density),
            ("gamma", self.gamma),
        ] {
            if let Some(v) = v {
                set(k, v.to_string())?;
            }
        }
        if let Some(s) = self.seed {
            set("seed", s.to_string())?;
        }
        if self.skew {
            set("skew", "true".into())?;
        }
        if self.smooth_inlet {
            set("smooth_inlet", "true".into())?;
        }
        if let Some(m) = &self.modes {
            set("modes", m.clone())?;
        }
        if let Some(e) = self.epochs {
            set("epochs", e.to_string())?;
        }
        if let Some(a) = &self.arch {
            set("arch", a.clone())?;
        }
        for kv in &self.set {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| Error::Invalid(format!("--set expects KEY=VALUE, got '{kv}'")))?;
            set(k.trim(), v.trim().to_string())?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Output directory plus the list of written artifacts.
struct Stage {
    name: &'static str,
    out: PathBuf,
    cfg: BenchmarkConfig,
    artifacts: Vec<String>,
}

impl Stage {
    fn new(name: &'static str, common: &Common, cfg: BenchmarkConfig) -> Result<Self> {
        fs::create_dir_all(&common.out)?;
        if common.sequential {
            set_execution(Execution::Sequential);
        }
        Ok(Self {
            name,
            out: common.out.clone(),
            cfg,
            artifacts: Vec::new(),
        })
    }

    fn path(&mut self, file: &str) -> PathBuf {
        self.artifacts.push(file.to_string());
        self.out.join(file)
    }

    fn create(&mut self, file: &str) -> Result<BufWriter<File>> {
        Ok(BufWriter::new(File::create(self.path(file))?))
    }

    fn finish(mut self, summary: serde_json::Value) -> Result<()> {
        self.artifacts.sort();
        self.artifacts.dedup();
        save_run_meta(
            &self.out,
            &RunMeta {
                stage: self.name.to_string(),
                version: env!("CARGO_PKG_VERSION").to_string(),
                config: self.cfg.to_map(),
                seed: self.cfg.seed,
                artifacts: self.artifacts,
                summary,
            },
        )?;
        info!("{} finished, artifacts in {}", self.name, self.out.display());
        Ok(())
    }
}

fn spaces(cfg: &BenchmarkConfig) -> Result<(TaylorHoodSpace, TaylorHoodSpace)> {
    subdomain_spaces(cfg.geometry, cfg.density)
}

fn run_mesh(c: &Common) -> Result<()> {
    let cfg = c.config()?;
    let mut st = Stage::new("mesh", c, cfg.clone())?;
    let (s1, s2) = spaces(&cfg)?;
    let mono = monolithic_space(cfg.geometry, cfg.density)?;
    for (name, s) in [("mesh_1.txt", &s1), ("mesh_2.txt", &s2), ("mesh_monolithic.txt", &mono)] {
        let mut w = st.create(name)?;
        write_mesh(&mut w, s.mesh())?;
        w.flush()?;
    }
    let summary = json!({
        "triangles": [s1.n_elements(), s2.n_elements(), mono.n_elements()],
        "dofs": [s1.n_total(), s2.n_total(), mono.n_total()],
        "interface_velocity_dofs": s1.interface_dofs().len(),
    });
    println!("{summary}");
    st.finish(summary)
}

fn run_monolithic(c: &Common) -> Result<()> {
    let cfg = c.config()?;
    let mut st = Stage::new("monolithic", c, cfg.clone())?;
    let mono = monolithic_space(cfg.geometry, cfg.density)?;
    let traj = monolithic_solve(&mono, &cfg.transient())?;
    save_trajectory(&st.path("trajectory_monolithic.bin"), &StoredTrajectory::from_trajectory(&traj))?;
    let (s1, s2) = spaces(&cfg)?;
    let problem = DdProblem::new(s1, s2, cfg.dd_config())?;
    let restricted = monolithic_restriction_run(&problem, &mono, &traj)?;
    save_trajectory(
        &st.path("trajectory_monolithic_restricted.bin"),
        &StoredTrajectory::from_dd_run(&restricted)?,
    )?;
    st.finish(json!({ "steps": traj.len() - 1, "dofs": mono.n_total() }))
}

fn run_dd_fom(c: &Common) -> Result<()> {
    let cfg = c.config()?;
    let mut st = Stage::new("dd-fom", c, cfg.clone())?;
    let (s1, s2) = spaces(&cfg)?;
    let mut problem = DdProblem::new(s1, s2, cfg.dd_config())?;
    let run = dd_time_loop(&mut problem)?;
    save_trajectory(&st.path("trajectory_fom.bin"), &StoredTrajectory::from_dd_run(&run)?)?;
    let summary = iteration_summary("fom", &run.reports)?;
    write_iteration_csv(st.create("iterations_fom.csv")?, std::slice::from_ref(&summary))?;
    write_step_csv(st.create("steps_fom.csv")?, &run.trajectories[0].times[1..], &run.reports)?;
    println!("mean optimizer iterations: {:.2}", summary.mean);
    st.finish(json!({ "mean_iterations": summary.mean }))
}

fn snapshot_sets(
    st: &mut Stage,
    cfg: &BenchmarkConfig,
    off: &OfflineSpaces,
    from: Option<&Path>,
    k: usize,
) -> Result<Vec<ddflow::pod::SnapshotSet>> {
    if let Some(dir) = from {
        info!("loading snapshots from {}", dir.display());
        return load_snapshot_sets(dir);
    }
    let params = sample_parameters(&cfg.parameter_space(), k, cfg.sampling, cfg.seed)?;
    info!("collecting snapshots for {} parameters", params.len());
    let coll = collect_snapshots(off, &cfg.dd_config(), &params, SnapshotSource::Dd, None, Some(cfg.seed))?;
    save_snapshot_sets(&st.out, &coll.sets)?;
    for c in Component::ALL {
        st.artifacts.push(format!("snapshots_{c}.bin"));
        st.artifacts.push(format!("snapshots_{c}.json"));
    }
    Ok(coll.sets)
}

fn run_offline(a: &OfflineArgs) -> Result<()> {
    let cfg = a.common.config()?;
    let mut st = Stage::new("offline", &a.common, cfg.clone())?;
    let (s1, s2) = spaces(&cfg)?;
    let off = OfflineSpaces::new(s1, s2, &cfg.dd_config())?;
    let sets = snapshot_sets(&mut st, &cfg, &off, a.snapshots.as_deref(), cfg.k)?;
    let ip = InnerProducts::new(&off)?;
    let bases = build_pod_bases_from_sets(&sets, &off, &ip, &cfg.mode_selection())?;
    save_pod_bases(&st.out, &bases)?;
    for c in Component::ALL {
        st.artifacts.push(format!("basis_{c}.bin"));
    }
    st.artifacts.push("liftings.bin".into());
    let ops = project_operators(&off.spaces, &bases, cfg.skew)?;
    ops.write_archive(st.create("rom_operators.bin")?)?;
    let mut w = st.create("spectrum.csv")?;
    writeln!(w, "component,k,eigenvalue")?;
    let mut discarded = serde_json::Map::new();
    for c in Component::ALL {
        let b = bases.get(c);
        for (k, l) in b.eigenvalues.iter().enumerate() {
            writeln!(w, "{c},{},{l:.17e}", k + 1)?;
        }
        discarded.insert(c.to_string(), json!(b.discarded_energy()));
    }
    w.flush()?;
    println!("mode counts {}", bases.counts);
    st.finish(json!({ "counts": bases.counts.to_string(), "discarded_energy": discarded }))
}

fn run_rom(a: &RomArgs) -> Result<()> {
    let cfg = a.common.config()?;
    let mut st = Stage::new("rom", &a.common, cfg.clone())?;
    let dir = a.offline.clone().unwrap_or_else(|| a.common.out.clone());
    let (s1, s2) = spaces(&cfg)?;
    let off = OfflineSpaces::new(s1.clone(), s2.clone(), &cfg.dd_config())?;
    let ip = InnerProducts::new(&off)?;
    let bases = load_pod_bases(&dir, &ip)?;
    let ops = ReducedOperators::read_archive(std::io::BufReader::new(File::open(dir.join("rom_operators.bin"))?))?;
    let mut problem = RomProblem::new(&ops, cfg.rom_dd_config())?;
    let run = rom_time_loop(&mut problem)?;
    let gauge = PressureGauge::new(cfg.geometry, &s1, &s2)?;
    let lifted = lift_run(&run, &bases, Some(&gauge))?;
    save_trajectory(&st.path("trajectory_rom.bin"), &StoredTrajectory::from_dd_run(&lifted)?)?;
    let summary = iteration_summary("rom", &run.reports)?;
    write_iteration_csv(st.create("iterations_rom.csv")?, std::slice::from_ref(&summary))?;
    println!("mean optimizer iterations: {:.2}", summary.mean);
    st.finish(json!({ "mean_iterations": summary.mean }))
}

fn window_for(cfg: &BenchmarkConfig, w: Window) -> StepWindow {
    match w {
        Window::Full => StepWindow::full(cfg.n_steps()),
        Window::Restricted => StepWindow::restricted(cfg.n_steps(), cfg.podnn_skip),
    }
}

fn split(cfg: &BenchmarkConfig) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
    let params = sample_parameters(&cfg.parameter_space(), cfg.podnn_k, cfg.sampling, cfg.seed)?;
    let (tr, te) = split_parameters(params.len(), cfg.podnn_train, cfg.seed)?;
    Ok((
        tr.iter().map(|&i| params[i].clone()).collect(),
        te.iter().map(|&i| params[i].clone()).collect(),
    ))
}

fn run_podnn_train(a: &PodnnArgs) -> Result<()> {
    let cfg = a.common.config()?;
    let mut st = Stage::new("podnn-train", &a.common, cfg.clone())?;
    let (s1, s2) = spaces(&cfg)?;
    let off = OfflineSpaces::new(s1, s2, &cfg.dd_config())?;
    let sets = snapshot_sets(&mut st, &cfg, &off, a.snapshots.as_deref(), cfg.podnn_k)?;
    let (train, _) = split(&cfg)?;
    let window = window_for(&cfg, a.window);
    let ip = InnerProducts::new(&off)?;
    let bases = build_pod_bases_from_sets(&restrict_sets(&sets, &train, window)?, &off, &ip, &cfg.podnn_selection())?;
    save_pod_bases(&st.out, &bases)?;
    let trained = train_state_components(&sets, &bases, &train, window, &cfg.podnn_options())?;
    let mut losses = serde_json::Map::new();
    for (model, report) in &trained {
        save_model(&st.out, model)?;
        let c = model.component;
        st.artifacts.push(format!("net_{c}.bin"));
        st.artifacts.push(format!("net_{c}.json"));
        write_loss_csv(st.create(&format!("loss_{c}.csv"))?, report)?;
        losses.insert(c.to_string(), json!(report.final_loss()));
        println!("{c}: final loss {:.3e} after {} epochs", report.final_loss(), report.epochs);
    }
    st.finish(json!({ "final_loss": losses, "window": [window.first, window.last] }))
}

fn run_podnn_validate(a: &PodnnArgs) -> Result<()> {
    let cfg = a.common.config()?;
    let mut st = Stage::new("podnn-validate", &a.common, cfg.clone())?;
    let dir = a.snapshots.clone().unwrap_or_else(|| a.common.out.clone());
    let (s1, s2) = spaces(&cfg)?;
    let off = OfflineSpaces::new(s1.clone(), s2.clone(), &cfg.dd_config())?;
    let ip = InnerProducts::new(&off)?;
    let sets = load_snapshot_sets(&dir)?;
    let bases = load_pod_bases(&a.common.out, &ip)?;
    let models = STATE_COMPONENTS
        .iter()
        .map(|&c| load_model(&a.common.out, c))
        .collect::<Result<Vec<_>>>()?;
    let (_, test) = split(&cfg)?;
    let window = window_for(&cfg, a.window);
    let norms = ErrorNorms::new(&s1, &s2)?;
    let l2: Vec<_> = Component::ALL
        .iter()
        .map(|&c| match c {
            Component::U1 | Component::S1 => ddflow::fem::assemble_mass(&s1),
            Component::U2 | Component::S2 => ddflow::fem::assemble_mass(&s2),
            Component::P1 => norms.pressure[0].clone(),
            Component::P2 => norms.pressure[1].clone(),
            Component::G => ip.control.clone(),
        })
        .collect();
    let series = validation_study(&models, &sets, &bases, &l2, &cfg.transient(), &test, window)?;
    write_validation_csv(st.create("errors_podnn_validation.csv")?, &series)?;
    let mut means = serde_json::Map::new();
    for s in &series {
        println!("{}: mean {:.3e}, max {:.3e}", s.component, s.overall_mean(), s.max());
        means.insert(s.component.to_string(), json!(s.overall_mean()));
    }
    st.finish(json!({ "mean_error": means }))
}

fn run_compare(a: &CompareArgs) -> Result<()> {
    let cfg = a.common.config()?;
    let mut st = Stage::new("compare", &a.common, cfg.clone())?;
    let ra = load_trajectory(&a.a)?.to_dd_run()?;
    let rb = load_trajectory(&a.b)?.to_dd_run()?;
    let (s1, s2) = spaces(&cfg)?;
    let norms = ErrorNorms::new(&s1, &s2)?;
    let report = relative_error_series(&ra.trajectories, &rb.trajectories, &norms)?;
    report.write_csv(st.create(&format!("errors_{}.csv", a.label))?)?;
    let max: Vec<f64> = (0..4).map(|k| report.max(k)).collect();
    println!("max relative error u1 {:.3e} p1 {:.3e} u2 {:.3e} p2 {:.3e}", max[0], max[1], max[2], max[3]);
    st.finish(json!({ "max_error": max, "mean_error": (0..4).map(|k| report.mean(k)).collect::<Vec<_>>() }))
}

fn common(cmd: &Command) -> &Common {
    match cmd {
        Command::Mesh(c) | Command::Monolithic(c) | Command::DdFom(c) => c,
        Command::Offline(a) => &a.common,
        Command::Rom(a) => &a.common,
        Command::PodnnTrain(a) | Command::PodnnValidate(a) => &a.common,
        Command::Compare(a) => &a.common,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let c = common(&cli.command);
    let cfg = match c.config() {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let result = match &cli.command {
        Command::Mesh(c) => run_mesh(c),
        Command::Monolithic(c) => run_monolithic(c),
        Command::DdFom(c) => run_dd_fom(c),
        Command::Offline(a) => run_offline(a),
        Command::Rom(a) => run_rom(a),
        Command::PodnnTrain(a) => run_podnn_train(a),
        Command::PodnnValidate(a) => run_podnn_validate(a),
        Command::Compare(a) => run_compare(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let diag = c.out.join("diagnostic.txt");
            let text = format!("{e}\n\n{}", cfg.to_text());
            if fs::create_dir_all(&c.out).and_then(|_| fs::write(&diag, text)).is_ok() {
                eprintln!("diagnostic written to {}", diag.display());
            }
            ExitCode::from(1)
        }
    }
}
