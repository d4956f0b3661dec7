use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::basis::{
    choose_modes_by_energy, enrich_with_supremisers, numerical_rank, pod_basis_from_spectrum, pod_spectrum, ReducedBasis,
};
use super::snapshots::{Component, OfflineSpaces, SnapshotCollection, SnapshotSet};
use crate::error::{Error, Result};
use crate::fem::{assemble_interface_coupling, assemble_pressure_mass, assemble_scalar_stiffness, block_diag2};
use crate::linalg::SparseMatrix;
use crate::par;

/// Number of POD modes per component.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModeCounts {
    pub u1: usize,
    pub p1: usize,
    pub u2: usize,
    pub p2: usize,
    pub s1: usize,
    pub s2: usize,
    pub g: usize,
}

impl ModeCounts {
    /// Backward-facing step.
    pub const STEP: ModeCounts = ModeCounts {
        u1: 30,
        p1: 5,
        u2: 12,
        p2: 5,
        s1: 5,
        s2: 5,
        g: 5,
    };

    /// Lid-driven cavity.
    pub const CAVITY: ModeCounts = ModeCounts {
        u1: 15,
        p1: 10,
        u2: 10,
        p2: 10,
        s1: 10,
        s2: 10,
        g: 5,
    };

    pub fn get(&self, c: Component) -> usize {
        match c {
            Component::U1 => self.u1,
            Component::P1 => self.p1,
            Component::U2 => self.u2,
            Component::P2 => self.p2,
            Component::S1 => self.s1,
            Component::S2 => self.s2,
            Component::G => self.g,
        }
    }

    pub fn set(&mut self, c: Component, n: usize) {
        let slot = match c {
            Component::U1 => &mut self.u1,
            Component::P1 => &mut self.p1,
            Component::U2 => &mut self.u2,
            Component::P2 => &mut self.p2,
            Component::S1 => &mut self.s1,
            Component::S2 => &mut self.s2,
            Component::G => &mut self.g,
        };
        *slot = n;
    }

    pub fn max(&self) -> usize {
        Component::ALL.iter().map(|&c| self.get(c)).max().unwrap_or(0)
    }
}

/// `u1,p1,u2,p2,s1,s2,g`.
impl fmt::Display for ModeCounts {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{},{},{},{},{},{},{}",
            self.u1, self.p1, self.u2, self.p2, self.s1, self.s2, self.g
        )
    }
}

impl FromStr for ModeCounts {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let v: Vec<usize> = s
            .split(',')
            .map(|t| t.trim().parse::<usize>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Invalid(format!("bad mode counts '{s}': {e}")))?;
        if v.len() != 7 {
            return Err(Error::Invalid(format!(
                "mode counts need 7 entries (u1,p1,u2,p2,s1,s2,g), got {}",
                v.len()
            )));
        }
        Ok(Self {
            u1: v[0],
            p1: v[1],
            u2: v[2],
            p2: v[3],
            s1: v[4],
            s2: v[5],
            g: v[6],
        })
    }
}

/// How many modes to keep for each component.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeSelection {
    /// Requested counts.
    pub counts: ModeCounts,
    /// When set, a component keeps at least as many modes as needed to push
    /// its discarded energy fraction below this value.
    pub energy_threshold: Option<f64>,
    /// Upper bound on any count.
    pub n_max: usize,
    /// Lower any count above the numerical rank of its snapshots to that
    /// rank instead of failing.
    pub clamp_to_rank: bool,
}

impl ModeSelection {
    pub fn fixed(counts: ModeCounts) -> Self {
        Self {
            counts,
            energy_threshold: None,
            n_max: usize::MAX,
            clamp_to_rank: false,
        }
    }
}

/// Inner-product matrices of one pair of subdomain spaces: `K` for
/// velocities and supremisers, the pressure mass for pressures, `Mγ` for
/// the control.
#[derive(Debug, Clone)]
pub struct InnerProducts {
    pub velocity: [SparseMatrix; 2],
    pub pressure: [SparseMatrix; 2],
    pub control: SparseMatrix,
}

impl InnerProducts {
    pub fn new(offline: &OfflineSpaces) -> Result<Self> {
        let [s1, s2] = &offline.spaces;
        Ok(Self {
            velocity: [
                block_diag2(&assemble_scalar_stiffness(s1)),
                block_diag2(&assemble_scalar_stiffness(s2)),
            ],
            pressure: [assemble_pressure_mass(s1), assemble_pressure_mass(s2)],
            control: assemble_interface_coupling(s1)?.1,
        })
    }

    pub fn get(&self, c: Component) -> &SparseMatrix {
        match c {
            Component::U1 | Component::S1 => &self.velocity[0],
            Component::U2 | Component::S2 => &self.velocity[1],
            Component::P1 => &self.pressure[0],
            Component::P2 => &self.pressure[1],
            Component::G => &self.control,
        }
    }
}

/// All reduced bases of the offline stage.
#[derive(Debug, Clone)]
pub struct PodBases {
    /// Velocity bases enriched with the supremiser modes.
    pub velocity: [ReducedBasis; 2],
    pub pressure: [ReducedBasis; 2],
    /// Plain velocity bases, before enrichment.
    pub velocity_plain: [ReducedBasis; 2],
    pub supremiser: [ReducedBasis; 2],
    pub control: ReducedBasis,
    /// Stokes liftings of the unit boundary data.
    pub liftings: [Vec<f64>; 2],
    /// Counts actually used.
    pub counts: ModeCounts,
}

impl PodBases {
    pub fn get(&self, c: Component) -> &ReducedBasis {
        match c {
            Component::U1 => &self.velocity_plain[0],
            Component::U2 => &self.velocity_plain[1],
            Component::P1 => &self.pressure[0],
            Component::P2 => &self.pressure[1],
            Component::S1 => &self.supremiser[0],
            Component::S2 => &self.supremiser[1],
            Component::G => &self.control,
        }
    }
}

/// Number of modes for one component under `sel`, given its spectrum.
pub fn select_count(c: Component, eigenvalues: &[f64], sel: &ModeSelection) -> Result<usize> {
    let mut n = sel.counts.get(c);
    if let Some(thr) = sel.energy_threshold {
        n = n.max(choose_modes_by_energy(eigenvalues, thr)?);
    }
    n = n.min(sel.n_max);
    if sel.clamp_to_rank {
        let rank = numerical_rank(eigenvalues);
        if n > rank {
            log::warn!("{c}: {n} modes requested, snapshots have rank {rank}");
            n = rank;
        }
    }
    Ok(n)
}

/// POD of every component (in parallel across components) followed by
/// supremiser enrichment of the velocity bases.
pub fn build_pod_bases(
    snapshots: &SnapshotCollection,
    offline: &OfflineSpaces,
    ip: &InnerProducts,
    sel: &ModeSelection,
) -> Result<PodBases> {
    build_pod_bases_from_sets(&snapshots.sets, offline, ip, sel)
}

/// As [`build_pod_bases`], from snapshot sets indexed by
/// [`Component::index`].
pub fn build_pod_bases_from_sets(
    sets: &[SnapshotSet],
    offline: &OfflineSpaces,
    ip: &InnerProducts,
    sel: &ModeSelection,
) -> Result<PodBases> {
    if sets.len() != Component::ALL.len() {
        return Err(Error::Invalid(format!("expected 7 snapshot sets, got {}", sets.len())));
    }
    for (k, s) in sets.iter().enumerate() {
        if s.component.index() != k {
            return Err(Error::Invalid(format!("snapshot set {k} holds component {}", s.component)));
        }
    }
    let built: Vec<Result<(ReducedBasis, usize)>> = par::map_slice(&Component::ALL, |&c| {
        let set = &sets[c.index()];
        let x = ip.get(c);
        let spec = pod_spectrum(&set.matrix, x)?;
        let n = select_count(c, &spec.eigenvalues, sel)?;
        Ok((pod_basis_from_spectrum(&set.matrix, x, &spec, n, c)?, n))
    });
    let mut bases = Vec::with_capacity(7);
    let mut counts = sel.counts;
    for (c, b) in Component::ALL.iter().zip(built) {
        let (b, n) = b.map_err(|e| Error::Invalid(format!("POD of {c}: {e}")))?;
        counts.set(*c, n);
        bases.push(b);
    }
    let take = |c: Component| bases[c.index()].clone();
    let (u1, u2) = (take(Component::U1), take(Component::U2));
    let (s1, s2) = (take(Component::S1), take(Component::S2));
    Ok(PodBases {
        velocity: [enrich_with_supremisers(&u1, &s1)?, enrich_with_supremisers(&u2, &s2)?],
        pressure: [take(Component::P1), take(Component::P2)],
        velocity_plain: [u1, u2],
        supremiser: [s1, s2],
        control: take(Component::G),
        liftings: offline.liftings.clone(),
        counts,
    })
}
