//! Reduced-operator archive.
//!
//! Layout (little endian):
//!
//! ```text
//! "ROMA v1\n"
//! u32 record count
//! per record: u32 name length, name (UTF-8), u64 rows, u64 cols,
//!             rows·cols f64 in row-major order
//! ```

use std::io::{Read, Write};

use super::operators::{ReducedOperators, SubdomainOperators};
use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;

const MAGIC: &[u8; 8] = b"ROMA v1\n";

pub fn write_named_arrays<W: Write>(mut w: W, arrays: &[(String, DenseMatrix)]) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&(arrays.len() as u32).to_le_bytes())?;
    for (name, a) in arrays {
        w.write_all(&(name.len() as u32).to_le_bytes())?;
        w.write_all(name.as_bytes())?;
        w.write_all(&(a.rows() as u64).to_le_bytes())?;
        w.write_all(&(a.cols() as u64).to_le_bytes())?;
        for v in a.data() {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b).map_err(truncated)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b).map_err(truncated)?;
    Ok(u64::from_le_bytes(b))
}

fn truncated(e: std::io::Error) -> Error {
    if e.kind() == std::io::ErrorKind::UnexpectedEof {
        Error::Format("truncated archive".into())
    } else {
        Error::Io(e)
    }
}

pub fn read_named_arrays<R: Read>(mut r: R) -> Result<Vec<(String, DenseMatrix)>> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic).map_err(truncated)?;
    if &magic != MAGIC {
        return Err(Error::Format(format!(
            "not a reduced-operator archive (header {:?})",
            String::from_utf8_lossy(&magic)
        )));
    }
    let count = read_u32(&mut r)? as usize;
    let mut out = Vec::with_capacity(count.min(1024));
    for _ in 0..count {
        let len = read_u32(&mut r)? as usize;
        let mut name = vec![0u8; len];
        r.read_exact(&mut name).map_err(truncated)?;
        let name = String::from_utf8(name).map_err(|_| Error::Format("array name is not UTF-8".into()))?;
        let rows = read_u64(&mut r)? as usize;
        let cols = read_u64(&mut r)? as usize;
        let n = rows
            .checked_mul(cols)
            .ok_or_else(|| Error::Format(format!("array '{name}' is too large")))?;
        let mut bytes = vec![0u8; n * 8];
        r.read_exact(&mut bytes).map_err(truncated)?;
        let data = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        out.push((name, DenseMatrix::from_vec(rows, cols, data)?));
    }
    Ok(out)
}

fn scalar(v: f64) -> DenseMatrix {
    DenseMatrix::from_vec(1, 1, vec![v]).expect("1×1")
}

impl ReducedOperators {
    /// Named arrays for the archive.
    pub fn to_arrays(&self) -> Vec<(String, DenseMatrix)> {
        let mut out = vec![
            ("mgamma".to_string(), self.mgamma.clone()),
            ("mgamma_hat".to_string(), self.mgamma_hat.clone()),
            ("skew".to_string(), scalar(if self.skew { 1.0 } else { 0.0 })),
        ];
        for (i, s) in self.sub.iter().enumerate() {
            let k = i + 1;
            let m = s.n_u() + 1;
            let conv = DenseMatrix::from_vec(s.n_u(), m * m, s.conv.clone()).expect("conv size");
            out.extend([
                (format!("sign{k}"), scalar(s.sign)),
                (format!("mass{k}"), s.mass.clone()),
                (format!("laplace{k}"), s.laplace.clone()),
                (format!("div{k}"), s.div.clone()),
                (format!("conv{k}"), conv),
                (format!("coupling{k}"), s.coupling.clone()),
                (format!("trace{k}"), s.trace.clone()),
            ]);
        }
        out
    }

    pub fn from_arrays(arrays: Vec<(String, DenseMatrix)>) -> Result<Self> {
        let mut map: std::collections::HashMap<String, DenseMatrix> = arrays.into_iter().collect();
        let mut take = |name: &str| {
            map.remove(name)
                .ok_or_else(|| Error::Format(format!("archive is missing '{name}'")))
        };
        let mut sub = Vec::with_capacity(2);
        for k in 1..=2 {
            let conv = take(&format!("conv{k}"))?;
            sub.push(SubdomainOperators {
                sign: take(&format!("sign{k}"))?[(0, 0)],
                mass: take(&format!("mass{k}"))?,
                laplace: take(&format!("laplace{k}"))?,
                div: take(&format!("div{k}"))?,
                conv: conv.into_data(),
                coupling: take(&format!("coupling{k}"))?,
                trace: take(&format!("trace{k}"))?,
            });
        }
        let [s1, s2]: [SubdomainOperators; 2] = sub.try_into().expect("two subdomains");
        let ops = Self {
            sub: [s1, s2],
            mgamma: take("mgamma")?,
            mgamma_hat: take("mgamma_hat")?,
            skew: take("skew")?[(0, 0)] != 0.0,
        };
        ops.validate().map_err(|e| Error::Format(format!("inconsistent archive: {e}")))?;
        Ok(ops)
    }

    pub fn write_archive<W: Write>(&self, w: W) -> Result<()> {
        write_named_arrays(w, &self.to_arrays())
    }

    pub fn read_archive<R: Read>(r: R) -> Result<Self> {
        Self::from_arrays(read_named_arrays(r)?)
    }
}
