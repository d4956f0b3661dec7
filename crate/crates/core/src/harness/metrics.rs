use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::dd::OptimReport;
use crate::error::{check_len, Error, Result};
use crate::fem::{assemble_mass, assemble_pressure_mass, assemble_scalar_stiffness, block_diag2, TaylorHoodSpace};
use crate::linalg::SparseMatrix;
use crate::ns::Trajectory;

/// Reference norms below this are treated as zero.
pub const SMALL_NORM: f64 = 1e-12;

/// Component labels of an [`ErrorReport`], in column order.
pub const ERROR_COMPONENTS: [&str; 4] = ["u1", "p1", "u2", "p2"];

/// H¹ velocity and L² pressure Gram matrices of both subdomains.
#[derive(Debug, Clone)]
pub struct ErrorNorms {
    pub velocity: [SparseMatrix; 2],
    pub pressure: [SparseMatrix; 2],
}

impl ErrorNorms {
    pub fn new(s1: &TaylorHoodSpace, s2: &TaylorHoodSpace) -> Result<Self> {
        let h1 = |s: &TaylorHoodSpace| assemble_mass(s).add_scaled(1.0, &block_diag2(&assemble_scalar_stiffness(s)));
        Ok(Self {
            velocity: [h1(s1)?, h1(s2)?],
            pressure: [assemble_pressure_mass(s1), assemble_pressure_mass(s2)],
        })
    }

    fn get(&self, k: usize) -> &SparseMatrix {
        match k {
            0 => &self.velocity[0],
            1 => &self.pressure[0],
            2 => &self.velocity[1],
            _ => &self.pressure[1],
        }
    }
}

/// Per-step errors of u1, p1, u2, p2.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub times: Vec<f64>,
    /// `errors[k][n]`: component `k` (see [`ERROR_COMPONENTS`]) at step `n`.
    pub errors: [Vec<f64>; 4],
    /// Steps where the reference norm fell below [`SMALL_NORM`]; the error
    /// stored there is absolute.
    pub absolute: [Vec<bool>; 4],
}

impl ErrorReport {
    pub fn n_steps(&self) -> usize {
        self.times.len()
    }

    fn relative(&self, k: usize) -> impl Iterator<Item = f64> + '_ {
        self.errors[k].iter().zip(&self.absolute[k]).filter(|(_, a)| !**a).map(|(e, _)| *e)
    }

    /// Mean relative error of component `k` over the unflagged steps.
    pub fn mean(&self, k: usize) -> f64 {
        let (s, n) = self.relative(k).fold((0.0, 0usize), |(s, n), e| (s + e, n + 1));
        if n == 0 {
            0.0
        } else {
            s / n as f64
        }
    }

    /// Largest relative error of component `k` over the unflagged steps.
    pub fn max(&self, k: usize) -> f64 {
        self.relative(k).fold(0.0, f64::max)
    }

    /// Largest entry of any kind, relative or absolute.
    pub fn max_any(&self) -> f64 {
        self.errors.iter().flatten().fold(0.0, |m, &e| m.max(e))
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "step,time,u1,p1,u2,p2,absolute")?;
        for n in 0..self.n_steps() {
            let flags: Vec<&str> = (0..4)
                .filter(|&k| self.absolute[k][n])
                .map(|k| ERROR_COMPONENTS[k])
                .collect();
            writeln!(
                w,
                "{n},{},{:.10e},{:.10e},{:.10e},{:.10e},{}",
                self.times[n],
                self.errors[0][n],
                self.errors[1][n],
                self.errors[2][n],
                self.errors[3][n],
                flags.join(";")
            )?;
        }
        Ok(())
    }
}

fn field<'a>(t: &'a [Trajectory; 2], k: usize, n: usize) -> &'a [f64] {
    let tr = &t[k / 2];
    if k % 2 == 0 {
        &tr.u[n]
    } else {
        &tr.p[n]
    }
}

/// `‖aₙ − bₙ‖ / ‖bₙ‖` per component and step, with `b` the reference. When
/// `‖bₙ‖ <` [`SMALL_NORM`] the absolute error is stored and the step is
/// flagged.
pub fn relative_error_series(a: &[Trajectory; 2], b: &[Trajectory; 2], norms: &ErrorNorms) -> Result<ErrorReport> {
    for i in 0..2 {
        check_len("trajectory length", b[i].len(), a[i].len())?;
        check_len("subdomain trajectory length", b[0].len(), b[i].len())?;
        for (ta, tb) in a[i].times.iter().zip(&b[i].times) {
            if (ta - tb).abs() > 1e-12 * tb.abs().max(1.0) {
                return Err(Error::Invalid(format!("time grids differ: {ta} vs {tb}")));
            }
        }
    }
    let steps = b[0].len();
    let mut errors: [Vec<f64>; 4] = Default::default();
    let mut absolute: [Vec<bool>; 4] = Default::default();
    for k in 0..4 {
        let x = norms.get(k);
        for n in 0..steps {
            let (fa, fb) = (field(a, k, n), field(b, k, n));
            check_len("field length", fb.len(), fa.len())?;
            check_len("norm size", x.nrows(), fb.len())?;
            let d: Vec<f64> = fa.iter().zip(fb).map(|(p, q)| p - q).collect();
            let num = x.bilinear(&d, &d).max(0.0).sqrt();
            let den = x.bilinear(fb, fb).max(0.0).sqrt();
            let small = den < SMALL_NORM;
            errors[k].push(if small { num } else { num / den });
            absolute[k].push(small);
        }
    }
    Ok(ErrorReport {
        times: b[0].times.clone(),
        errors,
        absolute,
    })
}

/// Optimizer iterations per step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationSummary {
    pub label: String,
    pub iterations: Vec<usize>,
    pub mean: f64,
}

impl IterationSummary {
    pub fn from_counts(label: &str, iterations: Vec<usize>) -> Result<Self> {
        if iterations.is_empty() {
            return Err(Error::Invalid("iteration summary of zero steps".into()));
        }
        let mean = iterations.iter().sum::<usize>() as f64 / iterations.len() as f64;
        Ok(Self {
            label: label.to_string(),
            iterations,
            mean,
        })
    }
}

pub fn iteration_summary(label: &str, reports: &[OptimReport]) -> Result<IterationSummary> {
    IterationSummary::from_counts(label, reports.iter().map(|r| r.iterations).collect())
}

/// One column per summary, one row per step (from 1), and a final `mean`
/// row.
pub fn write_iteration_csv<W: Write>(mut w: W, summaries: &[IterationSummary]) -> Result<()> {
    let Some(first) = summaries.first() else {
        return Err(Error::Invalid("no iteration summaries".into()));
    };
    write!(w, "step")?;
    for s in summaries {
        check_len("iteration series length", first.iterations.len(), s.iterations.len())?;
        write!(w, ",{}", s.label)?;
    }
    writeln!(w)?;
    for n in 0..first.iterations.len() {
        write!(w, "{}", n + 1)?;
        for s in summaries {
            write!(w, ",{}", s.iterations[n])?;
        }
        writeln!(w)?;
    }
    write!(w, "mean")?;
    for s in summaries {
        write!(w, ",{}", s.mean)?;
    }
    writeln!(w)?;
    Ok(())
}
