//! Benchmark configuration, error metrics and artifact persistence.

mod config;
mod metrics;
mod persist;

pub use config::{parse_pairs, BenchmarkConfig, CONFIG_KEYS};
pub use metrics::{
    iteration_summary, relative_error_series, write_iteration_csv, ErrorNorms, ErrorReport, IterationSummary,
    ERROR_COMPONENTS, SMALL_NORM,
};
pub use persist::{
    basis_file, load_model, load_pod_bases, load_run_meta, load_snapshot_sets, load_snapshots, load_trajectory,
    net_file, read_basis, read_snapshot_matrix, save_model, save_pod_bases, save_run_meta, save_snapshot_sets,
    save_snapshots, save_trajectory, sidecar_path, snapshot_file, write_basis, write_snapshot_matrix, RunMeta,
    SnapshotSidecar, StoredTrajectory, RUN_META_FILE,
};
