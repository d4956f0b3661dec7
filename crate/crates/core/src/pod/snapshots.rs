use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dd::{dd_time_loop, monolithic_restriction_run, DdConfig, DdProblem, DdRun};
use crate::error::{check_len, Error, Result};
use crate::fem::{assemble_divergence, dirichlet_values, TaylorHoodSpace};
use crate::linalg::DenseMatrix;
use crate::ns::{lifting_solve, monolithic_solve, unit_dirichlet, SupremiserSolver};
use crate::par;

/// Snapshot / basis component.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Component {
    U1,
    P1,
    U2,
    P2,
    S1,
    S2,
    G,
}

impl Component {
    pub const ALL: [Component; 7] = [
        Component::U1,
        Component::P1,
        Component::U2,
        Component::P2,
        Component::S1,
        Component::S2,
        Component::G,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Component::U1 => "u1",
            Component::P1 => "p1",
            Component::U2 => "u2",
            Component::P2 => "p2",
            Component::S1 => "s1",
            Component::S2 => "s2",
            Component::G => "g",
        }
    }

    /// Subdomain index (0 or 1); `None` for the control.
    pub fn subdomain(self) -> Option<usize> {
        match self {
            Component::U1 | Component::P1 | Component::S1 => Some(0),
            Component::U2 | Component::P2 | Component::S2 => Some(1),
            Component::G => None,
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Component {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Component {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Component::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::Invalid(format!("unknown component '{s}'")))
    }
}

/// Parameters and time of one snapshot column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotMeta {
    /// `(ν, Ū)`.
    pub params: Vec<f64>,
    pub time: f64,
    pub step: usize,
}

/// Snapshot matrix of one component, one column per (parameter, time).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotSet {
    pub component: Component,
    pub matrix: DenseMatrix,
    pub meta: Vec<SnapshotMeta>,
    pub seed: Option<u64>,
}

impl SnapshotSet {
    pub fn new(component: Component, columns: &[Vec<f64>], meta: Vec<SnapshotMeta>, seed: Option<u64>) -> Result<Self> {
        check_len("snapshot metadata", columns.len(), meta.len())?;
        if columns.is_empty() {
            return Err(Error::Invalid(format!("empty snapshot set for {component}")));
        }
        Ok(Self {
            component,
            matrix: DenseMatrix::from_columns(columns)?,
            meta,
            seed,
        })
    }

    pub fn rows(&self) -> usize {
        self.matrix.rows()
    }

    pub fn cols(&self) -> usize {
        self.matrix.cols()
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.matrix.column(j)
    }

    /// Columns whose metadata passes `keep`.
    pub fn select(&self, keep: impl Fn(&SnapshotMeta) -> bool) -> Result<Self> {
        let idx: Vec<usize> = (0..self.cols()).filter(|&j| keep(&self.meta[j])).collect();
        let cols: Vec<Vec<f64>> = idx.iter().map(|&j| self.column(j)).collect();
        let meta = idx.iter().map(|&j| self.meta[j].clone()).collect();
        Self::new(self.component, &cols, meta, self.seed)
    }
}

/// Box of `(ν, Ū)` values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParameterSpace {
    pub nu: [f64; 2],
    pub ubar: [f64; 2],
}

impl ParameterSpace {
    pub fn validate(&self) -> Result<()> {
        for (name, r) in [("nu", self.nu), ("Ubar", self.ubar)] {
            if !(r[0] <= r[1]) || !r[0].is_finite() || !r[1].is_finite() {
                return Err(Error::Invalid(format!("bad {name} range [{}, {}]", r[0], r[1])));
            }
        }
        if self.nu[0] <= 0.0 {
            return Err(Error::Invalid("viscosity range must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sampling {
    /// Evenly spaced points, both parameters moving together from the
    /// lower to the upper corner.
    Uniform,
    /// Independent uniform draws from a seeded ChaCha8 stream.
    Random,
}

impl fmt::Display for Sampling {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sampling::Uniform => "uniform",
            Sampling::Random => "random",
        })
    }
}

impl FromStr for Sampling {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(Sampling::Uniform),
            "random" => Ok(Sampling::Random),
            _ => Err(Error::Invalid(format!("unknown sampling '{s}'"))),
        }
    }
}

/// `k` parameter vectors `(ν, Ū)`.
pub fn sample_parameters(space: &ParameterSpace, k: usize, sampling: Sampling, seed: u64) -> Result<Vec<Vec<f64>>> {
    space.validate()?;
    let lerp = |r: [f64; 2], s: f64| r[0] + s * (r[1] - r[0]);
    Ok(match sampling {
        Sampling::Uniform => (0..k)
            .map(|j| {
                let s = if k == 1 { 0.0 } else { j as f64 / (k - 1) as f64 };
                vec![lerp(space.nu, s), lerp(space.ubar, s)]
            })
            .collect(),
        Sampling::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..k)
                .map(|_| {
                    let a: f64 = rng.gen();
                    let b: f64 = rng.gen();
                    vec![lerp(space.nu, a), lerp(space.ubar, b)]
                })
                .collect()
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SnapshotSource {
    /// Optimised DD-FOM trajectories.
    Dd,
    /// Monolithic trajectories restricted to the subdomains, with the
    /// monolithic interface control.
    MonolithicRestriction,
}

/// Offline data tied to the two subdomain spaces: unit liftings and
/// supremiser solvers.
#[derive(Debug, Clone)]
pub struct OfflineSpaces {
    pub spaces: [TaylorHoodSpace; 2],
    /// Stokes liftings of the unit Dirichlet data.
    pub liftings: [Vec<f64>; 2],
    supremiser: [SupremiserSolver; 2],
}

impl OfflineSpaces {
    pub fn new(s1: TaylorHoodSpace, s2: TaylorHoodSpace, cfg: &DdConfig) -> Result<Self> {
        let mut liftings = Vec::with_capacity(2);
        let mut sup = Vec::with_capacity(2);
        for s in [&s1, &s2] {
            let unit = dirichlet_values(s, unit_dirichlet(cfg.transient.geometry))?;
            liftings.push(lifting_solve(s, &unit)?);
            sup.push(SupremiserSolver::new(s, &assemble_divergence(s))?);
        }
        let [l1, l2]: [Vec<f64>; 2] = liftings.try_into().expect("two liftings");
        let [q1, q2]: [SupremiserSolver; 2] = sup.try_into().expect("two solvers");
        Ok(Self {
            spaces: [s1, s2],
            liftings: [l1, l2],
            supremiser: [q1, q2],
        })
    }

    pub fn supremiser(&self, i: usize, p: &[f64]) -> Result<Vec<f64>> {
        self.supremiser[i].solve(p)
    }

    /// Homogenised velocity `u − α l`.
    pub fn homogenize(&self, i: usize, u: &[f64], alpha: f64) -> Vec<f64> {
        u.iter().zip(&self.liftings[i]).map(|(a, l)| a - alpha * l).collect()
    }
}

/// Snapshot sets of all components plus the runs they came from.
#[derive(Debug, Clone)]
pub struct SnapshotCollection {
    /// Indexed by [`Component::index`].
    pub sets: Vec<SnapshotSet>,
    pub params: Vec<Vec<f64>>,
    pub runs: Vec<DdRun>,
}

impl SnapshotCollection {
    pub fn get(&self, c: Component) -> &SnapshotSet {
        &self.sets[c.index()]
    }
}

/// Configuration with `(ν, Ū)` replaced by `mu`.
pub fn config_for(base: &DdConfig, mu: &[f64]) -> DdConfig {
    let mut cfg = *base;
    cfg.transient.nu = mu[0];
    cfg.transient.ubar = mu[1];
    cfg
}

/// One trajectory per parameter (in parallel across parameters), then
/// homogenised velocity, pressure, supremiser and control columns for
/// every time step `n = 1..M`.
pub fn collect_snapshots(
    offline: &OfflineSpaces,
    base: &DdConfig,
    params: &[Vec<f64>],
    source: SnapshotSource,
    mono: Option<&TaylorHoodSpace>,
    seed: Option<u64>,
) -> Result<SnapshotCollection> {
    if params.is_empty() {
        return Err(Error::Invalid("no training parameters".into()));
    }
    if source == SnapshotSource::MonolithicRestriction && mono.is_none() {
        return Err(Error::Invalid("monolithic restriction needs the monolithic space".into()));
    }
    let runs: Vec<Result<DdRun>> = par::map_slice(params, |mu| {
        let cfg = config_for(base, mu);
        let [s1, s2] = &offline.spaces;
        let mut problem = DdProblem::new(s1.clone(), s2.clone(), cfg)?;
        match source {
            SnapshotSource::Dd => dd_time_loop(&mut problem),
            SnapshotSource::MonolithicRestriction => {
                let m = mono.expect("checked above");
                let traj = monolithic_solve(m, &cfg.transient)?;
                monolithic_restriction_run(&problem, m, &traj)
            }
        }
    });
    let mut columns: Vec<Vec<Vec<f64>>> = vec![Vec::new(); 7];
    let mut meta = Vec::new();
    let mut done = Vec::with_capacity(runs.len());
    for (k, (run, mu)) in runs.into_iter().zip(params).enumerate() {
        let run = run.map_err(|e| Error::Invalid(format!("snapshot parameter {k} {mu:?}: {e}")))?;
        let cfg = config_for(base, mu);
        for n in 1..run.trajectories[0].len() {
            let t = run.trajectories[0].times[n];
            let alpha = cfg.transient.amplitude(t);
            for i in 0..2 {
                let tr = &run.trajectories[i];
                let (cu, cp, cs) = if i == 0 {
                    (Component::U1, Component::P1, Component::S1)
                } else {
                    (Component::U2, Component::P2, Component::S2)
                };
                columns[cu.index()].push(offline.homogenize(i, &tr.u[n], alpha));
                columns[cp.index()].push(tr.p[n].clone());
                columns[cs.index()].push(offline.supremiser(i, &tr.p[n])?);
            }
            columns[Component::G.index()].push(run.controls[n - 1].clone());
            meta.push(SnapshotMeta {
                params: mu.clone(),
                time: t,
                step: n,
            });
        }
        done.push(run);
    }
    let sets = Component::ALL
        .iter()
        .map(|&c| SnapshotSet::new(c, &columns[c.index()], meta.clone(), seed))
        .collect::<Result<Vec<_>>>()?;
    Ok(SnapshotCollection {
        sets,
        params: params.to_vec(),
        runs: done,
    })
}
