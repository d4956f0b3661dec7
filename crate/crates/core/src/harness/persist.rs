//! Binary artifacts. Every file starts with an ASCII header line
//! `<KIND> v<version> ...\n` followed by little-endian payload.
//!
//! ```text
//! TRAJ v1\n
//!   u64 meta length, meta (UTF-8 JSON)
//!   u64 steps, steps × f64 times
//!   u32 fields; per field: u32 name length, name,
//!                          per step: u64 length, length × f64
//! SNAP v1 <component> <rows> <cols>\n      column-major f64
//! BASIS v1 <component> <rows> <n> <eigenvalues> <supremisers>\n
//!   eigenvalues × f64, then Φ column-major
//! ```
//!
//! Snapshot files carry a JSON sidecar (same stem, `.json`) with the
//! per-column metadata.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dd::{DdRun, OptimReport};
use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;
use crate::ns::Trajectory;
use crate::pod::{enrich_with_supremisers, Component, InnerProducts, ModeCounts, PodBases, ReducedBasis, SnapshotMeta, SnapshotSet};
use crate::podnn::{Mlp, ModelMeta, PodNnModel};
use crate::rom::{read_named_arrays, write_named_arrays};

const MAX_HEADER: usize = 256;

fn truncated(what: &'static str) -> impl Fn(std::io::Error) -> Error {
    move |e| {
        if e.kind() == std::io::ErrorKind::UnexpectedEof {
            Error::Format(format!("truncated {what} file"))
        } else {
            Error::Io(e)
        }
    }
}

fn read_header<R: Read>(r: &mut R, kind: &str, what: &'static str) -> Result<Vec<String>> {
    let mut line = Vec::new();
    let mut b = [0u8; 1];
    loop {
        r.read_exact(&mut b).map_err(truncated(what))?;
        if b[0] == b'\n' {
            break;
        }
        line.push(b[0]);
        if line.len() > MAX_HEADER {
            return Err(Error::Format(format!("no {kind} header")));
        }
    }
    let line = String::from_utf8(line).map_err(|_| Error::Format(format!("no {kind} header")))?;
    let mut words: Vec<String> = line.split(' ').map(str::to_string).collect();
    if words.first().map(String::as_str) != Some(kind) {
        return Err(Error::Format(format!("not a {what} file (header '{line}')")));
    }
    match words.get(1).map(String::as_str) {
        Some("v1") => {}
        Some(v) => return Err(Error::Format(format!("unsupported {what} version '{v}' (expected v1)"))),
        None => return Err(Error::Format(format!("{what} header has no version"))),
    }
    Ok(words.split_off(2))
}

fn header_field<T: std::str::FromStr>(words: &[String], k: usize, what: &str) -> Result<T> {
    words
        .get(k)
        .and_then(|w| w.parse().ok())
        .ok_or_else(|| Error::Format(format!("bad {what} header")))
}

fn read_u32<R: Read>(r: &mut R, what: &'static str) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b).map_err(truncated(what))?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64<R: Read>(r: &mut R, what: &'static str) -> Result<usize> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b).map_err(truncated(what))?;
    usize::try_from(u64::from_le_bytes(b)).map_err(|_| Error::Format(format!("{what} length overflows")))
}

fn read_f64s<R: Read>(r: &mut R, n: usize, what: &'static str) -> Result<Vec<f64>> {
    let bytes = n
        .checked_mul(8)
        .ok_or_else(|| Error::Format(format!("{what} length overflows")))?;
    let mut buf = Vec::new();
    r.take(bytes as u64).read_to_end(&mut buf)?;
    if buf.len() != bytes {
        return Err(Error::Format(format!("truncated {what} file")));
    }
    Ok(buf
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect())
}

fn read_string<R: Read>(r: &mut R, n: usize, what: &'static str) -> Result<String> {
    let mut buf = Vec::new();
    r.take(n as u64).read_to_end(&mut buf)?;
    if buf.len() != n {
        return Err(Error::Format(format!("truncated {what} file")));
    }
    String::from_utf8(buf).map_err(|_| Error::Format(format!("{what} contains invalid UTF-8")))
}

fn write_f64s<W: Write>(w: &mut W, v: &[f64]) -> Result<()> {
    for x in v {
        w.write_all(&x.to_le_bytes())?;
    }
    Ok(())
}

fn expect_end<R: Read>(r: &mut R, what: &str) -> Result<()> {
    let mut b = [0u8; 1];
    match r.read(&mut b)? {
        0 => Ok(()),
        _ => Err(Error::Format(format!("trailing bytes after {what} payload"))),
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

fn open(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(File::open(path)?))
}

/// Named per-step vectors on a common time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct StoredTrajectory {
    pub times: Vec<f64>,
    /// `(name, vectors)`, one vector per time (possibly empty).
    pub fields: Vec<(String, Vec<Vec<f64>>)>,
    /// Free-form JSON metadata.
    pub meta: String,
}

#[derive(Serialize, Deserialize)]
struct RunSidecar {
    reports: Vec<OptimReport>,
}

impl StoredTrajectory {
    pub fn field(&self, name: &str) -> Option<&[Vec<f64>]> {
        self.fields.iter().find(|(n, _)| n == name).map(|(_, v)| v.as_slice())
    }

    fn require(&self, name: &str) -> Result<&[Vec<f64>]> {
        self.field(name)
            .ok_or_else(|| Error::Format(format!("trajectory has no field '{name}'")))
    }

    pub fn from_trajectory(t: &Trajectory) -> Self {
        Self {
            times: t.times.clone(),
            fields: vec![("u".into(), t.u.clone()), ("p".into(), t.p.clone())],
            meta: "{}".into(),
        }
    }

    pub fn to_trajectory(&self) -> Result<Trajectory> {
        Ok(Trajectory {
            times: self.times.clone(),
            u: self.require("u")?.to_vec(),
            p: self.require("p")?.to_vec(),
        })
    }

    /// Fields `u1, p1, u2, p2, g`; the control at `t = 0` is stored empty.
    /// Optimizer reports go into the metadata.
    pub fn from_dd_run(run: &DdRun) -> Result<Self> {
        let [t1, t2] = &run.trajectories;
        let mut g = vec![Vec::new()];
        g.extend(run.controls.iter().cloned());
        Ok(Self {
            times: t1.times.clone(),
            fields: vec![
                ("u1".into(), t1.u.clone()),
                ("p1".into(), t1.p.clone()),
                ("u2".into(), t2.u.clone()),
                ("p2".into(), t2.p.clone()),
                ("g".into(), g),
            ],
            meta: serde_json::to_string(&RunSidecar {
                reports: run.reports.clone(),
            })?,
        })
    }

    pub fn to_dd_run(&self) -> Result<DdRun> {
        let traj = |u: &str, p: &str| -> Result<Trajectory> {
            Ok(Trajectory {
                times: self.times.clone(),
                u: self.require(u)?.to_vec(),
                p: self.require(p)?.to_vec(),
            })
        };
        let g = self.require("g")?;
        let sidecar: RunSidecar = serde_json::from_str(&self.meta)
            .map_err(|e| Error::Format(format!("trajectory metadata: {e}")))?;
        Ok(DdRun {
            trajectories: [traj("u1", "p1")?, traj("u2", "p2")?],
            reports: sidecar.reports,
            controls: g.iter().skip(1).cloned().collect(),
        })
    }

    pub fn write<W: Write>(&self, mut w: W) -> Result<()> {
        for (name, v) in &self.fields {
            if v.len() != self.times.len() {
                return Err(Error::Invalid(format!(
                    "field '{name}' has {} entries for {} times",
                    v.len(),
                    self.times.len()
                )));
            }
        }
        w.write_all(b"TRAJ v1\n")?;
        w.write_all(&(self.meta.len() as u64).to_le_bytes())?;
        w.write_all(self.meta.as_bytes())?;
        w.write_all(&(self.times.len() as u64).to_le_bytes())?;
        write_f64s(&mut w, &self.times)?;
        w.write_all(&(self.fields.len() as u32).to_le_bytes())?;
        for (name, vs) in &self.fields {
            w.write_all(&(name.len() as u32).to_le_bytes())?;
            w.write_all(name.as_bytes())?;
            for v in vs {
                w.write_all(&(v.len() as u64).to_le_bytes())?;
                write_f64s(&mut w, v)?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn read<R: Read>(mut r: R) -> Result<Self> {
        const WHAT: &str = "trajectory";
        read_header(&mut r, "TRAJ", WHAT)?;
        let ml = read_u64(&mut r, WHAT)?;
        let meta = read_string(&mut r, ml, WHAT)?;
        let steps = read_u64(&mut r, WHAT)?;
        let times = read_f64s(&mut r, steps, WHAT)?;
        let nf = read_u32(&mut r, WHAT)? as usize;
        let mut fields = Vec::with_capacity(nf.min(64));
        for _ in 0..nf {
            let nl = read_u32(&mut r, WHAT)? as usize;
            let name = read_string(&mut r, nl, WHAT)?;
            let mut vs = Vec::with_capacity(steps);
            for _ in 0..steps {
                let len = read_u64(&mut r, WHAT)?;
                vs.push(read_f64s(&mut r, len, WHAT)?);
            }
            fields.push((name, vs));
        }
        expect_end(&mut r, WHAT)?;
        Ok(Self { times, fields, meta })
    }
}

pub fn save_trajectory(path: &Path, t: &StoredTrajectory) -> Result<()> {
    t.write(create(path)?)
}

pub fn load_trajectory(path: &Path) -> Result<StoredTrajectory> {
    StoredTrajectory::read(open(path)?)
}

/// Metadata sidecar of a snapshot file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotSidecar {
    pub component: Component,
    pub rows: usize,
    pub cols: usize,
    pub seed: Option<u64>,
    pub meta: Vec<SnapshotMeta>,
}

pub fn write_snapshot_matrix<W: Write>(mut w: W, set: &SnapshotSet) -> Result<()> {
    writeln!(w, "SNAP v1 {} {} {}", set.component, set.rows(), set.cols())?;
    for j in 0..set.cols() {
        write_f64s(&mut w, &set.column(j))?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a snapshot matrix; returns the component and the columns.
pub fn read_snapshot_matrix<R: Read>(mut r: R) -> Result<(Component, DenseMatrix)> {
    const WHAT: &str = "snapshot";
    let h = read_header(&mut r, "SNAP", WHAT)?;
    let component: Component = header_field(&h, 0, WHAT)?;
    let rows: usize = header_field(&h, 1, WHAT)?;
    let cols: usize = header_field(&h, 2, WHAT)?;
    let n = rows
        .checked_mul(cols)
        .ok_or_else(|| Error::Format("snapshot size overflows".into()))?;
    let data = read_f64s(&mut r, n, WHAT)?;
    expect_end(&mut r, WHAT)?;
    Ok((component, DenseMatrix::from_fn(rows, cols, |i, j| data[j * rows + i])))
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("json")
}

/// Writes `path` and its JSON sidecar.
pub fn save_snapshots(path: &Path, set: &SnapshotSet) -> Result<()> {
    write_snapshot_matrix(create(path)?, set)?;
    let side = SnapshotSidecar {
        component: set.component,
        rows: set.rows(),
        cols: set.cols(),
        seed: set.seed,
        meta: set.meta.clone(),
    };
    let mut w = create(&sidecar_path(path))?;
    serde_json::to_writer_pretty(&mut w, &side)?;
    w.flush()?;
    Ok(())
}

pub fn load_snapshots(path: &Path) -> Result<SnapshotSet> {
    let (component, matrix) = read_snapshot_matrix(open(path)?)?;
    let side: SnapshotSidecar = serde_json::from_reader(open(&sidecar_path(path))?)?;
    if side.component != component || side.rows != matrix.rows() || side.cols != matrix.cols() {
        return Err(Error::Format(format!(
            "sidecar of {} does not match the snapshot header",
            path.display()
        )));
    }
    if side.meta.len() != matrix.cols() {
        return Err(Error::Format("sidecar metadata count differs from the column count".into()));
    }
    Ok(SnapshotSet {
        component,
        matrix,
        meta: side.meta,
        seed: side.seed,
    })
}

pub fn snapshot_file(dir: &Path, c: Component) -> PathBuf {
    dir.join(format!("snapshots_{c}.bin"))
}

/// All seven snapshot sets, indexed by [`Component::index`].
pub fn save_snapshot_sets(dir: &Path, sets: &[SnapshotSet]) -> Result<()> {
    for s in sets {
        save_snapshots(&snapshot_file(dir, s.component), s)?;
    }
    Ok(())
}

pub fn load_snapshot_sets(dir: &Path) -> Result<Vec<SnapshotSet>> {
    Component::ALL.iter().map(|&c| load_snapshots(&snapshot_file(dir, c))).collect()
}

pub fn write_basis<W: Write>(mut w: W, b: &ReducedBasis) -> Result<()> {
    writeln!(
        w,
        "BASIS v1 {} {} {} {} {}",
        b.component,
        b.full_dim(),
        b.n(),
        b.eigenvalues.len(),
        b.supremisers
    )?;
    write_f64s(&mut w, &b.eigenvalues)?;
    for j in 0..b.n() {
        write_f64s(&mut w, &b.phi.column(j))?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a basis without its inner product.
pub fn read_basis<R: Read>(mut r: R) -> Result<ReducedBasis> {
    const WHAT: &str = "basis";
    let h = read_header(&mut r, "BASIS", WHAT)?;
    let component: Component = header_field(&h, 0, WHAT)?;
    let rows: usize = header_field(&h, 1, WHAT)?;
    let n: usize = header_field(&h, 2, WHAT)?;
    let ne: usize = header_field(&h, 3, WHAT)?;
    let supremisers: usize = header_field(&h, 4, WHAT)?;
    if supremisers > n {
        return Err(Error::Format("basis header lists more supremisers than modes".into()));
    }
    let eigenvalues = read_f64s(&mut r, ne, WHAT)?;
    let size = rows
        .checked_mul(n)
        .ok_or_else(|| Error::Format("basis size overflows".into()))?;
    let data = read_f64s(&mut r, size, WHAT)?;
    expect_end(&mut r, WHAT)?;
    Ok(ReducedBasis {
        component,
        phi: DenseMatrix::from_fn(rows, n, |i, j| data[j * rows + i]),
        eigenvalues,
        inner_product: None,
        supremisers,
    })
}

pub fn basis_file(dir: &Path, c: Component) -> PathBuf {
    dir.join(format!("basis_{c}.bin"))
}

/// Writes the seven plain bases and the liftings (`liftings.bin`).
pub fn save_pod_bases(dir: &Path, bases: &PodBases) -> Result<()> {
    for c in Component::ALL {
        write_basis(create(&basis_file(dir, c))?, bases.get(c))?;
    }
    let arrays: Vec<(String, DenseMatrix)> = bases
        .liftings
        .iter()
        .enumerate()
        .map(|(i, l)| Ok((format!("lifting{}", i + 1), DenseMatrix::from_vec(l.len(), 1, l.clone())?)))
        .collect::<Result<_>>()?;
    let mut w = create(&dir.join("liftings.bin"))?;
    write_named_arrays(&mut w, &arrays)?;
    w.flush()?;
    Ok(())
}

/// Reads what [`save_pod_bases`] wrote, attaches the inner products and
/// redoes the supremiser enrichment.
pub fn load_pod_bases(dir: &Path, ip: &InnerProducts) -> Result<PodBases> {
    let mut counts = ModeCounts::CAVITY;
    let mut loaded = Vec::with_capacity(7);
    for c in Component::ALL {
        let mut b = read_basis(open(&basis_file(dir, c))?)?;
        if b.component != c {
            return Err(Error::Format(format!("{} holds component {}", basis_file(dir, c).display(), b.component)));
        }
        let x = ip.get(c);
        if x.nrows() != b.full_dim() {
            return Err(Error::Format(format!("basis {c} does not match the mesh")));
        }
        b.inner_product = Some(x.clone());
        counts.set(c, b.n());
        loaded.push(b);
    }
    let mut lift = read_named_arrays(open(&dir.join("liftings.bin"))?)?;
    if lift.len() != 2 {
        return Err(Error::Format("liftings archive must hold two arrays".into()));
    }
    let l2 = lift.pop().expect("two").1.data().to_vec();
    let l1 = lift.pop().expect("two").1.data().to_vec();
    let take = |c: Component| loaded[c.index()].clone();
    let (u1, u2, s1, s2) = (take(Component::U1), take(Component::U2), take(Component::S1), take(Component::S2));
    Ok(PodBases {
        velocity: [enrich_with_supremisers(&u1, &s1)?, enrich_with_supremisers(&u2, &s2)?],
        pressure: [take(Component::P1), take(Component::P2)],
        velocity_plain: [u1, u2],
        supremiser: [s1, s2],
        control: take(Component::G),
        liftings: [l1, l2],
        counts,
    })
}

pub fn net_file(dir: &Path, c: Component) -> PathBuf {
    dir.join(format!("net_{c}.bin"))
}

/// Writes the net and its scaling sidecar (`net_<c>.json`).
pub fn save_model(dir: &Path, model: &PodNnModel) -> Result<()> {
    let path = net_file(dir, model.component);
    let mut w = create(&path)?;
    model.net.write(&mut w)?;
    w.flush()?;
    let mut s = create(&sidecar_path(&path))?;
    serde_json::to_writer_pretty(&mut s, &model.meta())?;
    s.flush()?;
    Ok(())
}

pub fn load_model(dir: &Path, c: Component) -> Result<PodNnModel> {
    let path = net_file(dir, c);
    let net = Mlp::read(open(&path)?)?;
    let meta: ModelMeta = serde_json::from_reader(open(&sidecar_path(&path))?)?;
    if meta.component != c {
        return Err(Error::Format(format!("{} holds component {}", path.display(), meta.component)));
    }
    PodNnModel::from_parts(net, meta)
}

/// Sidecar written by every CLI stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub stage: String,
    pub version: String,
    /// Full config echo, `key → value`.
    pub config: BTreeMap<String, String>,
    pub seed: u64,
    pub artifacts: Vec<String>,
    /// Stage-specific numbers.
    pub summary: serde_json::Value,
}

pub const RUN_META_FILE: &str = "run_meta.json";

pub fn save_run_meta(dir: &Path, meta: &RunMeta) -> Result<()> {
    let mut w = create(&dir.join(RUN_META_FILE))?;
    serde_json::to_writer_pretty(&mut w, meta)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

pub fn load_run_meta(dir: &Path) -> Result<RunMeta> {
    Ok(serde_json::from_reader(open(&dir.join(RUN_META_FILE))?)?)
}
