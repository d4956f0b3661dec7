//! Snapshot collection and proper orthogonal decomposition.

mod basis;
mod offline;
mod snapshots;

pub use basis::{
    choose_modes_by_energy, correlation_matrix, enrich_with_supremisers, numerical_rank, pod_basis, pod_basis_from_spectrum,
    pod_spectrum, PodSpectrum, ReducedBasis, RANK_TOL,
};
pub use offline::{
    build_pod_bases, build_pod_bases_from_sets, select_count, InnerProducts, ModeCounts, ModeSelection, PodBases,
};
pub use snapshots::{
    collect_snapshots, config_for, sample_parameters, Component, OfflineSpaces, ParameterSpace, Sampling,
    SnapshotCollection, SnapshotMeta, SnapshotSet, SnapshotSource,
};
