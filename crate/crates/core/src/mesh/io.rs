//! Plain-text mesh format.
//!
//! ```text
//! TRIMESH v1 <nv> <nt> <nb>
//! x y            (nv lines)
//! i j k          (nt lines)
//! i j tag        (nb lines)
//! subdomain <id> (optional)
//! ```

use std::io::{BufRead, Write};

use super::{BoundaryTag, TriMesh};
use crate::error::{Error, Result};

pub fn write_mesh<W: Write>(mut w: W, mesh: &TriMesh) -> Result<()> {
    writeln!(
        w,
        "TRIMESH v1 {} {} {}",
        mesh.vertices.len(),
        mesh.triangles.len(),
        mesh.boundary_edges.len()
    )?;
    for v in &mesh.vertices {
        writeln!(w, "{:.16e} {:.16e}", v[0], v[1])?;
    }
    for t in &mesh.triangles {
        writeln!(w, "{} {} {}", t[0], t[1], t[2])?;
    }
    for (e, tag) in &mesh.boundary_edges {
        writeln!(w, "{} {} {}", e[0], e[1], tag)?;
    }
    writeln!(w, "subdomain {}", mesh.subdomain_id)?;
    Ok(())
}

pub fn read_mesh<R: BufRead>(r: R) -> Result<TriMesh> {
    let mut lines = r.lines();
    let mut next = |what: &str| -> Result<String> {
        lines
            .next()
            .transpose()?
            .ok_or_else(|| Error::Format(format!("truncated mesh file: missing {what}")))
    };
    let header = next("header")?;
    let h: Vec<&str> = header.split_whitespace().collect();
    if h.len() != 5 || h[0] != "TRIMESH" {
        return Err(Error::Format(format!("bad mesh header '{header}'")));
    }
    if h[1] != "v1" {
        return Err(Error::Format(format!("unsupported mesh version '{}'", h[1])));
    }
    let count = |s: &str| {
        s.parse::<usize>()
            .map_err(|_| Error::Format(format!("bad count '{s}'")))
    };
    let (nv, nt, nb) = (count(h[2])?, count(h[3])?, count(h[4])?);
    let num = |s: &str| {
        s.parse::<f64>()
            .map_err(|_| Error::Format(format!("bad number '{s}'")))
    };

    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let l = next("vertex")?;
        let f: Vec<&str> = l.split_whitespace().collect();
        if f.len() != 2 {
            return Err(Error::Format(format!("bad vertex line '{l}'")));
        }
        vertices.push([num(f[0])?, num(f[1])?]);
    }
    let mut triangles = Vec::with_capacity(nt);
    for _ in 0..nt {
        let l = next("triangle")?;
        let f: Vec<&str> = l.split_whitespace().collect();
        if f.len() != 3 {
            return Err(Error::Format(format!("bad triangle line '{l}'")));
        }
        let t = [count(f[0])?, count(f[1])?, count(f[2])?];
        if t.iter().any(|&i| i >= nv) {
            return Err(Error::Format(format!("triangle index out of range in '{l}'")));
        }
        triangles.push(t);
    }
    let mut boundary_edges = Vec::with_capacity(nb);
    for _ in 0..nb {
        let l = next("boundary edge")?;
        let f: Vec<&str> = l.split_whitespace().collect();
        if f.len() != 3 {
            return Err(Error::Format(format!("bad boundary line '{l}'")));
        }
        let e = [count(f[0])?, count(f[1])?];
        if e.iter().any(|&i| i >= nv) {
            return Err(Error::Format(format!("boundary index out of range in '{l}'")));
        }
        boundary_edges.push((e, f[2].parse::<BoundaryTag>()?));
    }
    let mut subdomain_id = 0;
    if let Ok(l) = next("subdomain") {
        let f: Vec<&str> = l.split_whitespace().collect();
        match f.as_slice() {
            ["subdomain", id] => {
                subdomain_id = id
                    .parse()
                    .map_err(|_| Error::Format(format!("bad subdomain id '{id}'")))?
            }
            [] => {}
            _ => return Err(Error::Format(format!("unexpected trailing line '{l}'"))),
        }
    }
    Ok(TriMesh {
        vertices,
        triangles,
        boundary_edges,
        subdomain_id,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_step_meshes;

    #[test]
    fn round_trip_is_exact() {
        let (m1, _, _) = build_step_meshes(1.3).unwrap();
        let mut buf = Vec::new();
        write_mesh(&mut buf, &m1).unwrap();
        let back = read_mesh(&buf[..]).unwrap();
        assert_eq!(back, m1);
    }

    #[test]
    fn bad_header_rejected() {
        assert!(read_mesh(&b"TRIMESH v2 0 0 0\n"[..]).is_err());
        assert!(read_mesh(&b"MESH v1 0 0 0\n"[..]).is_err());
        assert!(read_mesh(&b"TRIMESH v1 2 0 0\n0 0\n"[..]).is_err());
    }
}
