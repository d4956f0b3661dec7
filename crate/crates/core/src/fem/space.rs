use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::mesh::{edge_key, BoundaryTag, InterfaceMap, TriMesh};

/// Constant geometric data of one triangle.
#[derive(Debug, Clone, Copy)]
pub struct ElemGeom {
    pub area: f64,
    pub grad_lambda: [[f64; 2]; 3],
}

/// P2 nodes on the interface, in traversal order (vertex, midpoint,
/// vertex, ...).
#[derive(Debug, Clone, PartialEq)]
pub struct InterfaceTrace {
    pub nodes: Vec<usize>,
    /// Per interface edge: positions in `nodes` of (start, midpoint, end).
    pub edges: Vec<[usize; 3]>,
}

impl InterfaceTrace {
    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }
}

/// Taylor–Hood P2/P1 space on a triangle mesh.
///
/// Velocity dof `c·n_nodes + node` for component `c`; pressure dof = vertex
/// index. The system vector is `[u; p]`.
#[derive(Debug, Clone)]
pub struct TaylorHoodSpace {
    mesh: TriMesh,
    n_nodes: usize,
    node_coords: Vec<[f64; 2]>,
    elem_nodes: Vec<[usize; 6]>,
    geom: Vec<ElemGeom>,
    edge_mid: HashMap<[usize; 2], usize>,
    node_dirichlet: Vec<Option<BoundaryTag>>,
    dirichlet_dofs: Vec<usize>,
    interface: Option<InterfaceTrace>,
}

fn dirichlet_priority(t: BoundaryTag) -> u8 {
    match t {
        BoundaryTag::DirichletWall => 3,
        BoundaryTag::DirichletLid => 2,
        BoundaryTag::DirichletInlet => 1,
        _ => 0,
    }
}

impl TaylorHoodSpace {
    /// Builds the space. `interface_edges` (oriented, in traversal order)
    /// defines the trace space when given.
    pub fn new(mesh: TriMesh, interface_edges: Option<&[[usize; 2]]>) -> Result<Self> {
        let nv = mesh.num_vertices();
        let mut edge_mid: HashMap<[usize; 2], usize> = HashMap::new();
        let mut node_coords = mesh.vertices.clone();
        let mut elem_nodes = Vec::with_capacity(mesh.num_triangles());
        let mut geom = Vec::with_capacity(mesh.num_triangles());
        for (t, tri) in mesh.triangles.iter().enumerate() {
            let mut nodes = [tri[0], tri[1], tri[2], 0, 0, 0];
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                let id = *edge_mid.entry(edge_key(a, b)).or_insert_with(|| {
                    let (pa, pb) = (mesh.vertices[a], mesh.vertices[b]);
                    node_coords.push([0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])]);
                    node_coords.len() - 1
                });
                nodes[3 + k] = id;
            }
            elem_nodes.push(nodes);
            let area = mesh.signed_area(t);
            if area <= 0.0 {
                return Err(Error::Mesh(format!("triangle {t} has non-positive area")));
            }
            let p = tri.map(|i| mesh.vertices[i]);
            // ∇λ_i = rot90(p_{i+2} - p_{i+1}) / (2A)
            let gl = std::array::from_fn(|i| {
                let (a, b) = (p[(i + 1) % 3], p[(i + 2) % 3]);
                [(a[1] - b[1]) / (2.0 * area), (b[0] - a[0]) / (2.0 * area)]
            });
            geom.push(ElemGeom {
                area,
                grad_lambda: gl,
            });
        }
        let n_nodes = node_coords.len();
        debug_assert!(n_nodes >= nv);

        let mut node_dirichlet: Vec<Option<BoundaryTag>> = vec![None; n_nodes];
        for &([a, b], tag) in &mesh.boundary_edges {
            if !tag.is_dirichlet() {
                continue;
            }
            let m = edge_mid[&edge_key(a, b)];
            for n in [a, b, m] {
                let cur = node_dirichlet[n];
                if cur.map_or(true, |c| dirichlet_priority(tag) > dirichlet_priority(c)) {
                    node_dirichlet[n] = Some(tag);
                }
            }
        }
        let mut dirichlet_dofs = Vec::new();
        for c in 0..2 {
            for (n, t) in node_dirichlet.iter().enumerate() {
                if t.is_some() {
                    dirichlet_dofs.push(c * n_nodes + n);
                }
            }
        }

        let interface = match interface_edges {
            None => None,
            Some(edges) => {
                let mut nodes = Vec::with_capacity(2 * edges.len() + 1);
                let mut tedges = Vec::with_capacity(edges.len());
                for (k, &[a, b]) in edges.iter().enumerate() {
                    let m = *edge_mid.get(&edge_key(a, b)).ok_or_else(|| {
                        Error::Mesh(format!("interface edge {k} is not a mesh edge"))
                    })?;
                    if k == 0 {
                        nodes.push(a);
                    } else if *nodes.last().unwrap() != a {
                        return Err(Error::Mesh(format!("interface edge {k} not contiguous")));
                    }
                    let s = nodes.len() - 1;
                    nodes.push(m);
                    nodes.push(b);
                    tedges.push([s, s + 1, s + 2]);
                }
                Some(InterfaceTrace {
                    nodes,
                    edges: tedges,
                })
            }
        };

        Ok(Self {
            mesh,
            n_nodes,
            node_coords,
            elem_nodes,
            geom,
            edge_mid,
            node_dirichlet,
            dirichlet_dofs,
            interface,
        })
    }

    /// Both subdomain spaces of a decomposition, with matching trace spaces.
    pub fn pair(m1: TriMesh, m2: TriMesh, map: &InterfaceMap) -> Result<(Self, Self)> {
        let s1 = Self::new(m1, Some(&map.edges_1))?;
        let s2 = Self::new(m2, Some(&map.edges_2))?;
        for (k, (&a, &b)) in s1
            .trace()
            .nodes
            .iter()
            .zip(&s2.trace().nodes)
            .enumerate()
        {
            let (pa, pb) = (s1.node_coords[a], s2.node_coords[b]);
            if (pa[0] - pb[0]).abs() > 1e-12 || (pa[1] - pb[1]).abs() > 1e-12 {
                return Err(Error::Mesh(format!("interface node {k} does not match")));
            }
        }
        Ok((s1, s2))
    }

    pub fn mesh(&self) -> &TriMesh {
        &self.mesh
    }
    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }
    pub fn n_vertices(&self) -> usize {
        self.mesh.num_vertices()
    }
    pub fn n_edges(&self) -> usize {
        self.n_nodes - self.n_vertices()
    }
    pub fn n_velocity(&self) -> usize {
        2 * self.n_nodes
    }
    pub fn n_pressure(&self) -> usize {
        self.n_vertices()
    }
    /// Size of the coupled `[u; p]` system.
    pub fn n_total(&self) -> usize {
        self.n_velocity() + self.n_pressure()
    }
    pub fn n_elements(&self) -> usize {
        self.elem_nodes.len()
    }
    pub fn node_coords(&self) -> &[[f64; 2]] {
        &self.node_coords
    }
    pub fn elem_nodes(&self) -> &[[usize; 6]] {
        &self.elem_nodes
    }
    pub fn elem_geom(&self) -> &[ElemGeom] {
        &self.geom
    }
    pub fn node_dirichlet(&self) -> &[Option<BoundaryTag>] {
        &self.node_dirichlet
    }
    /// Sorted Dirichlet velocity dofs (both components).
    pub fn dirichlet_dofs(&self) -> &[usize] {
        &self.dirichlet_dofs
    }

    pub fn dirichlet_mask(&self) -> Vec<bool> {
        let mut m = vec![false; self.n_velocity()];
        for &d in &self.dirichlet_dofs {
            m[d] = true;
        }
        m
    }

    pub fn free_velocity_dofs(&self) -> Vec<usize> {
        let mask = self.dirichlet_mask();
        (0..self.n_velocity()).filter(|&i| !mask[i]).collect()
    }

    pub fn vel_dof(&self, comp: usize, node: usize) -> usize {
        comp * self.n_nodes + node
    }

    /// Local velocity dofs of element `e`: component 0 nodes, then component 1.
    pub fn elem_vel_dofs(&self, e: usize) -> [usize; 12] {
        let n = &self.elem_nodes[e];
        std::array::from_fn(|k| (k / 6) * self.n_nodes + n[k % 6])
    }

    pub fn midpoint_node(&self, a: usize, b: usize) -> Option<usize> {
        self.edge_mid.get(&edge_key(a, b)).copied()
    }

    pub fn has_interface(&self) -> bool {
        self.interface.is_some()
    }

    /// Panics when the space has no interface.
    pub fn trace(&self) -> &InterfaceTrace {
        self.interface.as_ref().expect("space has no interface")
    }

    pub fn trace_dim(&self) -> usize {
        self.interface.as_ref().map_or(0, |t| 2 * t.num_nodes())
    }

    /// Velocity dofs on the interface, ordered like the trace dofs
    /// (component 0 nodes, then component 1 nodes).
    pub fn interface_dofs(&self) -> Vec<usize> {
        let t = self.trace();
        (0..2)
            .flat_map(|c| t.nodes.iter().map(move |&n| c * self.n_nodes + n))
            .collect()
    }

    /// Interface trace of a velocity vector, in trace-dof order.
    pub fn restrict_to_interface(&self, u: &[f64]) -> Vec<f64> {
        self.interface_dofs().iter().map(|&d| u[d]).collect()
    }

    /// Nodal values of a function at the velocity dofs.
    pub fn interpolate_velocity(&self, f: impl Fn(f64, f64) -> [f64; 2]) -> Vec<f64> {
        let mut u = vec![0.0; self.n_velocity()];
        for (n, p) in self.node_coords.iter().enumerate() {
            let v = f(p[0], p[1]);
            u[n] = v[0];
            u[self.n_nodes + n] = v[1];
        }
        u
    }

    pub fn interpolate_pressure(&self, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        self.mesh.vertices.iter().map(|p| f(p[0], p[1])).collect()
    }

    /// Index map from this space's P2 nodes to `other`'s nodes at the same
    /// coordinates (`None` where `other` has no node).
    pub fn node_map_to(&self, other: &TaylorHoodSpace) -> Vec<Option<usize>> {
        let key = |p: [f64; 2]| ((p[0] * 1e9).round() as i64, (p[1] * 1e9).round() as i64);
        let index: HashMap<(i64, i64), usize> = other
            .node_coords
            .iter()
            .enumerate()
            .map(|(i, &p)| (key(p), i))
            .collect();
        self.node_coords
            .iter()
            .map(|&p| index.get(&key(p)).copied())
            .collect()
    }

    pub fn check_velocity(&self, u: &[f64]) -> Result<()> {
        check_len("velocity vector", self.n_velocity(), u.len())
    }
}

/// Which space a coefficient vector belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SpaceKind {
    Velocity,
    Pressure,
    Trace,
}

/// Coefficient vector tagged with its space kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldCoeffs {
    pub kind: SpaceKind,
    pub values: Vec<f64>,
}

impl FieldCoeffs {
    pub fn new(space: &TaylorHoodSpace, kind: SpaceKind, values: Vec<f64>) -> Result<Self> {
        let n = match kind {
            SpaceKind::Velocity => space.n_velocity(),
            SpaceKind::Pressure => space.n_pressure(),
            SpaceKind::Trace => space.trace_dim(),
        };
        check_len("field coefficients", n, values.len())?;
        Ok(Self { kind, values })
    }

    pub fn zeros(space: &TaylorHoodSpace, kind: SpaceKind) -> Self {
        let n = match kind {
            SpaceKind::Velocity => space.n_velocity(),
            SpaceKind::Pressure => space.n_pressure(),
            SpaceKind::Trace => space.trace_dim(),
        };
        Self {
            kind,
            values: vec![0.0; n],
        }
    }
}
