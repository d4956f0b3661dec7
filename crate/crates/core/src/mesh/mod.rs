//! Structured triangulations of the two benchmark geometries.

mod build;
mod io;

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

pub use build::{
    build_cavity_meshes, build_cavity_meshes_with, build_cavity_monolithic, build_step_meshes,
    build_step_monolithic, step_cells_per_segment, STEP_AREA,
};
pub use io::{read_mesh, write_mesh};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BoundaryTag {
    DirichletInlet,
    DirichletWall,
    DirichletLid,
    NeumannOutlet,
    Interface,
}

impl BoundaryTag {
    pub const ALL: [BoundaryTag; 5] = [
        BoundaryTag::DirichletInlet,
        BoundaryTag::DirichletWall,
        BoundaryTag::DirichletLid,
        BoundaryTag::NeumannOutlet,
        BoundaryTag::Interface,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BoundaryTag::DirichletInlet => "dirichlet_inlet",
            BoundaryTag::DirichletWall => "dirichlet_wall",
            BoundaryTag::DirichletLid => "dirichlet_lid",
            BoundaryTag::NeumannOutlet => "neumann_outlet",
            BoundaryTag::Interface => "interface",
        }
    }

    pub fn is_dirichlet(self) -> bool {
        matches!(
            self,
            BoundaryTag::DirichletInlet | BoundaryTag::DirichletWall | BoundaryTag::DirichletLid
        )
    }
}

impl fmt::Display for BoundaryTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BoundaryTag {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self, Error> {
        BoundaryTag::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| Error::Format(format!("unknown boundary tag '{s}'")))
    }
}

/// Triangulated (sub)domain. Triangles are counter-clockwise.
#[derive(Debug, Clone, PartialEq)]
pub struct TriMesh {
    pub vertices: Vec<[f64; 2]>,
    pub triangles: Vec<[usize; 3]>,
    pub boundary_edges: Vec<([usize; 2], BoundaryTag)>,
    /// 1 or 2 for subdomains, 0 for a monolithic mesh.
    pub subdomain_id: u8,
}

/// Matching of the interface between two subdomain meshes.
///
/// `edges_1[k]` and `edges_2[k]` are the same geometric edge, oriented in
/// the direction of traversal; `vertex_pairing` lists the interface vertices
/// in traversal order.
#[derive(Debug, Clone, PartialEq)]
pub struct InterfaceMap {
    pub edges_1: Vec<[usize; 2]>,
    pub edges_2: Vec<[usize; 2]>,
    pub vertex_pairing: Vec<(usize, usize)>,
}

impl InterfaceMap {
    pub fn num_edges(&self) -> usize {
        self.edges_1.len()
    }
}

impl TriMesh {
    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    /// Signed area of triangle `t` (positive when counter-clockwise).
    pub fn signed_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t].map(|i| self.vertices[i]);
        0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
    }

    pub fn area(&self) -> f64 {
        (0..self.num_triangles()).map(|t| self.signed_area(t)).sum()
    }

    pub fn edges_with_tag(&self, tag: BoundaryTag) -> impl Iterator<Item = [usize; 2]> + '_ {
        self.boundary_edges
            .iter()
            .filter(move |e| e.1 == tag)
            .map(|e| e.0)
    }

    /// Map from undirected edge to the triangles containing it.
    pub fn edge_triangles(&self) -> HashMap<[usize; 2], Vec<usize>> {
        let mut map: HashMap<[usize; 2], Vec<usize>> = HashMap::new();
        for (t, tri) in self.triangles.iter().enumerate() {
            for k in 0..3 {
                map.entry(edge_key(tri[k], tri[(k + 1) % 3]))
                    .or_default()
                    .push(t);
            }
        }
        map
    }
}

pub(crate) fn edge_key(a: usize, b: usize) -> [usize; 2] {
    if a < b {
        [a, b]
    } else {
        [b, a]
    }
}

/// Result of [`validate_mesh`].
#[derive(Debug, Clone, PartialEq)]
pub struct MeshDiagnostics {
    pub min_quality: f64,
    pub max_quality: f64,
    pub violations: Vec<String>,
}

impl MeshDiagnostics {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks the mesh invariants and reports every violation found.
///
/// Quality is `4√3·area / Σ edge²`, equal to 1 for an equilateral triangle.
pub fn validate_mesh(mesh: &TriMesh) -> MeshDiagnostics {
    let mut violations = Vec::new();
    let mut qmin = f64::INFINITY;
    let mut qmax: f64 = 0.0;
    let nv = mesh.num_vertices();
    for (t, tri) in mesh.triangles.iter().enumerate() {
        if tri.iter().any(|&i| i >= nv) {
            violations.push(format!("triangle {t}: vertex index out of range"));
            continue;
        }
        let area = mesh.signed_area(t);
        if area <= 0.0 {
            violations.push(format!("triangle {t}: negative area {area:e}"));
        }
        let p = tri.map(|i| mesh.vertices[i]);
        let l2: f64 = (0..3)
            .map(|k| {
                let (a, b) = (p[k], p[(k + 1) % 3]);
                (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)
            })
            .sum();
        let q = 4.0 * 3f64.sqrt() * area.abs() / l2;
        qmin = qmin.min(q);
        qmax = qmax.max(q);
    }
    if violations.iter().any(|v| v.contains("out of range")) {
        return MeshDiagnostics {
            min_quality: qmin,
            max_quality: qmax,
            violations,
        };
    }

    let et = mesh.edge_triangles();
    let mut tagged: HashMap<[usize; 2], usize> = HashMap::new();
    for (e, tag) in &mesh.boundary_edges {
        let key = edge_key(e[0], e[1]);
        *tagged.entry(key).or_default() += 1;
        match et.get(&key).map(|v| v.len()) {
            Some(1) => {}
            Some(n) => violations.push(format!(
                "boundary edge {:?} ({tag}) belongs to {n} triangles",
                e
            )),
            None => violations.push(format!("boundary edge {:?} ({tag}) not in any triangle", e)),
        }
    }
    for (key, count) in &tagged {
        if *count > 1 {
            violations.push(format!("boundary edge {key:?} tagged {count} times"));
        }
    }
    let mut untagged: Vec<_> = et
        .iter()
        .filter(|(k, v)| v.len() == 1 && !tagged.contains_key(*k))
        .map(|(k, _)| *k)
        .collect();
    untagged.sort_unstable();
    for k in untagged {
        violations.push(format!("boundary edge {k:?} untagged"));
    }
    for (k, v) in &et {
        if v.len() > 2 {
            violations.push(format!("edge {k:?} shared by {} triangles", v.len()));
        }
    }
    MeshDiagnostics {
        min_quality: qmin,
        max_quality: qmax,
        violations,
    }
}
