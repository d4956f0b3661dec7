use std::collections::HashMap;

use super::{edge_key, BoundaryTag, InterfaceMap, TriMesh};
use crate::error::{Error, Result};

/// Area of the backward-facing step domain, cm².
pub const STEP_AREA: f64 = 82.0;

const STEP_X: [f64; 4] = [0.0, 4.0, 9.0, 18.0];
const STEP_Y: [f64; 3] = [0.0, 2.0, 5.0];
const STEP_INTERFACE_X: f64 = 9.0;
const EPS: f64 = 1e-12;

/// Cells per x-segment (`[0,4]`, `[4,9]`, `[9,18]`) and y-segment (`[0,2]`,
/// `[2,5]`) at the given density.
pub fn step_cells_per_segment(density: f64) -> Result<([usize; 3], [usize; 2])> {
    if !density.is_finite() || density < 1.0 {
        return Err(Error::Mesh(format!("edge density must be >= 1, got {density}")));
    }
    let cells = |len: f64| (len * density).round() as usize;
    let nx = [cells(4.0), cells(5.0), cells(9.0)];
    let ny = [cells(2.0), cells(3.0)];
    if nx.iter().chain(&ny).any(|&n| n == 0) {
        return Err(Error::Mesh(format!("density {density} leaves a segment without cells")));
    }
    Ok((nx, ny))
}

fn segment_points(breaks: &[f64], counts: &[usize]) -> Vec<f64> {
    let mut pts = Vec::new();
    for (s, &n) in counts.iter().enumerate() {
        let (a, b) = (breaks[s], breaks[s + 1]);
        for k in 0..n {
            pts.push(a + (b - a) * (k as f64) / (n as f64));
        }
    }
    pts.push(*breaks.last().unwrap());
    pts
}

fn grid_mesh(
    xs: &[f64],
    ys: &[f64],
    include: impl Fn(f64, f64) -> bool,
    tag: impl Fn(f64, f64) -> BoundaryTag,
    subdomain_id: u8,
) -> TriMesh {
    let (nx, ny) = (xs.len() - 1, ys.len() - 1);
    let mut index: HashMap<(usize, usize), usize> = HashMap::new();
    let mut vertices = Vec::new();
    let mut triangles = Vec::new();
    let mut vid = |i: usize, j: usize, vertices: &mut Vec<[f64; 2]>| -> usize {
        *index.entry((i, j)).or_insert_with(|| {
            vertices.push([xs[i], ys[j]]);
            vertices.len() - 1
        })
    };
    for j in 0..ny {
        for i in 0..nx {
            let (xc, yc) = (0.5 * (xs[i] + xs[i + 1]), 0.5 * (ys[j] + ys[j + 1]));
            if !include(xc, yc) {
                continue;
            }
            let v00 = vid(i, j, &mut vertices);
            let v10 = vid(i + 1, j, &mut vertices);
            let v11 = vid(i + 1, j + 1, &mut vertices);
            let v01 = vid(i, j + 1, &mut vertices);
            triangles.push([v00, v10, v11]);
            triangles.push([v00, v11, v01]);
        }
    }
    let mut mesh = TriMesh {
        vertices,
        triangles,
        boundary_edges: Vec::new(),
        subdomain_id,
    };
    let et = mesh.edge_triangles();
    let mut boundary: Vec<[usize; 2]> = Vec::new();
    for tri in &mesh.triangles {
        for k in 0..3 {
            let (a, b) = (tri[k], tri[(k + 1) % 3]);
            if et[&edge_key(a, b)].len() == 1 {
                boundary.push([a, b]);
            }
        }
    }
    mesh.boundary_edges = boundary
        .into_iter()
        .map(|[a, b]| {
            let (pa, pb) = (mesh.vertices[a], mesh.vertices[b]);
            ([a, b], tag(0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])))
        })
        .collect();
    mesh
}

/// Pairs the interface edges of two meshes, ordered by the coordinate
/// `axis` (0 = x, 1 = y).
fn match_interface(m1: &TriMesh, m2: &TriMesh, axis: usize) -> Result<InterfaceMap> {
    let ordered = |m: &TriMesh| -> Vec<[usize; 2]> {
        let mut e: Vec<[usize; 2]> = m
            .edges_with_tag(BoundaryTag::Interface)
            .map(|[a, b]| {
                if m.vertices[a][axis] <= m.vertices[b][axis] {
                    [a, b]
                } else {
                    [b, a]
                }
            })
            .collect();
        e.sort_by(|x, y| m.vertices[x[0]][axis].total_cmp(&m.vertices[y[0]][axis]));
        e
    };
    let (e1, e2) = (ordered(m1), ordered(m2));
    if e1.len() != e2.len() || e1.is_empty() {
        return Err(Error::Mesh(format!(
            "non-conforming interface: {} vs {} edges",
            e1.len(),
            e2.len()
        )));
    }
    let close = |a: [f64; 2], b: [f64; 2]| (a[0] - b[0]).abs() < EPS && (a[1] - b[1]).abs() < EPS;
    let mut pairing = Vec::with_capacity(e1.len() + 1);
    for (k, (a, b)) in e1.iter().zip(&e2).enumerate() {
        for s in 0..2 {
            if !close(m1.vertices[a[s]], m2.vertices[b[s]]) {
                return Err(Error::Mesh(format!("non-conforming interface at edge {k}")));
            }
        }
        if k > 0 && (e1[k - 1][1] != a[0] || e2[k - 1][1] != b[0]) {
            return Err(Error::Mesh(format!("interface not contiguous at edge {k}")));
        }
        pairing.push((a[0], b[0]));
    }
    let last = (e1.last().unwrap()[1], e2.last().unwrap()[1]);
    pairing.push(last);
    Ok(InterfaceMap {
        edges_1: e1,
        edges_2: e2,
        vertex_pairing: pairing,
    })
}

fn step_tag(interface: bool) -> impl Fn(f64, f64) -> BoundaryTag {
    move |x, _y| {
        if x.abs() < EPS {
            BoundaryTag::DirichletInlet
        } else if (x - STEP_X[3]).abs() < EPS {
            BoundaryTag::NeumannOutlet
        } else if interface && (x - STEP_INTERFACE_X).abs() < EPS {
            BoundaryTag::Interface
        } else {
            BoundaryTag::DirichletWall
        }
    }
}

fn in_step(x: f64, y: f64) -> bool {
    !(x < STEP_X[1] && y < STEP_Y[1])
}

/// Backward-facing step split at `x = 9`: Ω₁ on the left, Ω₂ on the right.
pub fn build_step_meshes(edge_density: f64) -> Result<(TriMesh, TriMesh, InterfaceMap)> {
    let (nx, ny) = step_cells_per_segment(edge_density)?;
    let ys = segment_points(&STEP_Y, &ny);
    let xs1 = segment_points(&STEP_X[..3], &nx[..2]);
    let xs2 = segment_points(&STEP_X[2..], &nx[2..]);
    let m1 = grid_mesh(&xs1, &ys, in_step, step_tag(true), 1);
    let m2 = grid_mesh(&xs2, &ys, in_step, step_tag(true), 2);
    let map = match_interface(&m1, &m2, 1)?;
    Ok((m1, m2, map))
}

/// Single mesh of the whole step domain on the same grid as
/// [`build_step_meshes`].
pub fn build_step_monolithic(edge_density: f64) -> Result<TriMesh> {
    let (nx, ny) = step_cells_per_segment(edge_density)?;
    let ys = segment_points(&STEP_Y, &ny);
    let xs = segment_points(&STEP_X, &nx);
    Ok(grid_mesh(&xs, &ys, in_step, step_tag(false), 0))
}

fn cavity_tag(interface: bool) -> impl Fn(f64, f64) -> BoundaryTag {
    move |_x, y| {
        if (y - 1.0).abs() < EPS {
            BoundaryTag::DirichletLid
        } else if interface && (y - 0.5).abs() < EPS {
            BoundaryTag::Interface
        } else {
            BoundaryTag::DirichletWall
        }
    }
}

/// Unit-square cavity with `n` cells per side, split at `y = 0.5`:
/// Ω₁ is the top half (lid side), Ω₂ the bottom half.
pub fn build_cavity_meshes(n: usize) -> Result<(TriMesh, TriMesh, InterfaceMap)> {
    if n == 0 || n % 2 != 0 {
        return Err(Error::Mesh(format!(
            "cavity needs an even number of cells per side, got {n}"
        )));
    }
    build_cavity_meshes_with(n, n / 2)
}

/// Cavity with `nx` cells along the interface and `ny_half` cell rows in
/// each half.
pub fn build_cavity_meshes_with(
    nx: usize,
    ny_half: usize,
) -> Result<(TriMesh, TriMesh, InterfaceMap)> {
    if nx == 0 || ny_half == 0 {
        return Err(Error::Mesh("cavity needs at least one cell per direction".into()));
    }
    let xs = segment_points(&[0.0, 1.0], &[nx]);
    let ys1 = segment_points(&[0.5, 1.0], &[ny_half]);
    let ys2 = segment_points(&[0.0, 0.5], &[ny_half]);
    let all = |_: f64, _: f64| true;
    let m1 = grid_mesh(&xs, &ys1, all, cavity_tag(true), 1);
    let m2 = grid_mesh(&xs, &ys2, all, cavity_tag(true), 2);
    let map = match_interface(&m1, &m2, 0)?;
    Ok((m1, m2, map))
}

/// Whole cavity on the same grid as [`build_cavity_meshes_with`].
pub fn build_cavity_monolithic(nx: usize, ny_half: usize) -> Result<TriMesh> {
    if nx == 0 || ny_half == 0 {
        return Err(Error::Mesh("cavity needs at least one cell per direction".into()));
    }
    let xs = segment_points(&[0.0, 1.0], &[nx]);
    let ys = segment_points(&[0.0, 0.5, 1.0], &[ny_half, ny_half]);
    Ok(grid_mesh(&xs, &ys, |_, _| true, cavity_tag(false), 0))
}
