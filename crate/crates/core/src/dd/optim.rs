use std::collections::VecDeque;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{norm_inf, DenseMatrix, SparseMatrix};

/// L-BFGS settings. `grad_tol` bounds the ∞-norm of the gradient
/// representative; `flat_tol` bounds the relative decrease
/// `(f_k − f_{k+1}) / max(|f_k|, |f_{k+1}|, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LbfgsOptions {
    pub max_iter: usize,
    pub grad_tol: f64,
    pub flat_tol: f64,
    pub memory: usize,
    pub c1: f64,
    pub c2: f64,
    pub max_line_search: usize,
}

impl Default for LbfgsOptions {
    fn default() -> Self {
        Self {
            max_iter: 1000,
            grad_tol: 1e-9,
            flat_tol: 2.2e-9,
            memory: 10,
            c1: 1e-4,
            c2: 0.9,
            max_line_search: 30,
        }
    }
}

impl LbfgsOptions {
    pub fn with_limits(max_iter: usize, grad_tol: f64) -> Self {
        Self {
            max_iter,
            grad_tol,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Gradient,
    MaxIter,
    Flat,
    LineSearch,
}

impl fmt::Display for Termination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Termination::Gradient => "gradient",
            Termination::MaxIter => "max_iter",
            Termination::Flat => "flat",
            Termination::LineSearch => "line_search",
        })
    }
}

/// Optimizer history. `functional[0]` and `gradient_norm[0]` belong to the
/// initial guess; one entry is appended per accepted iterate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimReport {
    pub iterations: usize,
    pub evaluations: usize,
    pub functional: Vec<f64>,
    pub gradient_norm: Vec<f64>,
    pub termination: Termination,
}

impl OptimReport {
    pub fn final_value(&self) -> f64 {
        *self.functional.last().unwrap_or(&f64::NAN)
    }

    pub fn final_gradient_norm(&self) -> f64 {
        *self.gradient_norm.last().unwrap_or(&f64::NAN)
    }
}

/// Inner product the gradient is represented in.
#[derive(Debug, Clone, Copy)]
pub enum InnerProduct<'a> {
    Euclidean,
    Sparse(&'a SparseMatrix),
    Dense(&'a DenseMatrix),
}

impl InnerProduct<'_> {
    pub fn dot(&self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            InnerProduct::Euclidean => a.iter().zip(b).map(|(x, y)| x * y).sum(),
            InnerProduct::Sparse(m) => m.bilinear(a, b),
            InnerProduct::Dense(m) => {
                let mb = m.matvec(b);
                a.iter().zip(&mb).map(|(x, y)| x * y).sum()
            }
        }
    }
}

struct Point {
    x: Vec<f64>,
    f: f64,
    g: Vec<f64>,
}

/// Minimises `f` from `x0`. The closure returns the value and the gradient
/// represented in `ip` (the Riesz representative). A failed nonlinear solve
/// inside the closure during a line search is treated as an infinite value.
pub fn lbfgs_minimize<F>(
    mut fg: F,
    x0: Vec<f64>,
    ip: InnerProduct<'_>,
    opts: &LbfgsOptions,
) -> Result<(Vec<f64>, OptimReport)>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    let (f0, g0) = fg(&x0)?;
    if !f0.is_finite() {
        return Err(Error::Invalid("objective is not finite at the initial guess".into()));
    }
    let mut cur = Point { x: x0, f: f0, g: g0 };
    let mut report = OptimReport {
        iterations: 0,
        evaluations: 1,
        functional: vec![cur.f],
        gradient_norm: vec![norm_inf(&cur.g)],
        termination: Termination::MaxIter,
    };
    if report.gradient_norm[0] <= opts.grad_tol {
        report.termination = Termination::Gradient;
        return Ok((cur.x, report));
    }
    let mut mem: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(opts.memory);

    loop {
        if report.iterations >= opts.max_iter {
            report.termination = Termination::MaxIter;
            break;
        }
        let mut d = two_loop(&cur.g, &mem, ip);
        let mut slope = ip.dot(&cur.g, &d);
        if !(slope < 0.0) {
            mem.clear();
            d = cur.g.iter().map(|v| -v).collect();
            slope = ip.dot(&cur.g, &d);
        }
        let alpha0 = if mem.is_empty() {
            (1.0 / ip.dot(&cur.g, &cur.g).sqrt()).min(1.0)
        } else {
            1.0
        };
        let mut next = line_search(&mut fg, &cur, &d, slope, alpha0, ip, opts, &mut report.evaluations)?;
        if next.is_none() && !mem.is_empty() {
            mem.clear();
            d = cur.g.iter().map(|v| -v).collect();
            slope = ip.dot(&cur.g, &d);
            let a0 = (1.0 / ip.dot(&cur.g, &cur.g).sqrt()).min(1.0);
            next = line_search(&mut fg, &cur, &d, slope, a0, ip, opts, &mut report.evaluations)?;
        }
        let Some(next) = next else {
            report.termination = Termination::LineSearch;
            break;
        };

        let s: Vec<f64> = next.x.iter().zip(&cur.x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = next.g.iter().zip(&cur.g).map(|(a, b)| a - b).collect();
        let sy = ip.dot(&s, &y);
        if sy > f64::EPSILON * ip.dot(&y, &y) && opts.memory > 0 {
            if mem.len() == opts.memory {
                mem.pop_front();
            }
            mem.push_back((s, y, 1.0 / sy));
        }
        let f_old = cur.f;
        cur = next;
        report.iterations += 1;
        report.functional.push(cur.f);
        report.gradient_norm.push(norm_inf(&cur.g));
        if norm_inf(&cur.g) <= opts.grad_tol {
            report.termination = Termination::Gradient;
            break;
        }
        if (f_old - cur.f) / f_old.abs().max(cur.f.abs()).max(1.0) <= opts.flat_tol {
            report.termination = Termination::Flat;
            break;
        }
    }
    Ok((cur.x, report))
}

fn two_loop(g: &[f64], mem: &VecDeque<(Vec<f64>, Vec<f64>, f64)>, ip: InnerProduct<'_>) -> Vec<f64> {
    let mut q = g.to_vec();
    let mut alphas = vec![0.0; mem.len()];
    for (k, (s, y, rho)) in mem.iter().enumerate().rev() {
        let a = rho * ip.dot(s, &q);
        alphas[k] = a;
        q.iter_mut().zip(y).for_each(|(qi, yi)| *qi -= a * yi);
    }
    if let Some((s, y, _)) = mem.back() {
        let h0 = ip.dot(s, y) / ip.dot(y, y);
        q.iter_mut().for_each(|v| *v *= h0);
    }
    for (k, (s, y, rho)) in mem.iter().enumerate() {
        let b = rho * ip.dot(y, &q);
        q.iter_mut().zip(s).for_each(|(qi, si)| *qi += (alphas[k] - b) * si);
    }
    q.iter_mut().for_each(|v| *v = -*v);
    q
}

struct Trial {
    a: f64,
    f: f64,
    slope: f64,
}

#[allow(clippy::too_many_arguments)]
fn line_search<F>(
    fg: &mut F,
    cur: &Point,
    d: &[f64],
    slope0: f64,
    alpha0: f64,
    ip: InnerProduct<'_>,
    opts: &LbfgsOptions,
    evals: &mut usize,
) -> Result<Option<Point>>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    let mut eval = |a: f64| -> Result<(Point, f64)> {
        let x: Vec<f64> = cur.x.iter().zip(d).map(|(xi, di)| xi + a * di).collect();
        *evals += 1;
        match fg(&x) {
            Ok((f, g)) => {
                let s = ip.dot(&g, d);
                Ok((Point { x, f, g }, s))
            }
            Err(Error::NewtonDiverged { .. }) => Ok((
                Point {
                    x,
                    f: f64::INFINITY,
                    g: vec![],
                },
                f64::NAN,
            )),
            Err(e) => Err(e),
        }
    };
    let armijo = |a: f64, f: f64| f <= cur.f + opts.c1 * a * slope0;
    let curvature = |s: f64| s.abs() <= -opts.c2 * slope0;

    let mut prev = Trial {
        a: 0.0,
        f: cur.f,
        slope: slope0,
    };
    let mut prev_point: Option<Point> = None;
    let mut a = alpha0;
    let mut budget = opts.max_line_search;
    while budget > 0 {
        budget -= 1;
        let (p, s) = eval(a)?;
        if !p.f.is_finite() || !s.is_finite() {
            a = 0.5 * (prev.a + a);
            continue;
        }
        let first = prev.a == 0.0;
        if !armijo(a, p.f) || (!first && p.f >= prev.f) {
            let hi = Trial { a, f: p.f, slope: s };
            return zoom(&mut eval, prev, hi, prev_point, &armijo, &curvature, budget);
        }
        if curvature(s) {
            return Ok(Some(p));
        }
        if s >= 0.0 {
            let lo = Trial { a, f: p.f, slope: s };
            return zoom(&mut eval, lo, prev, Some(p), &armijo, &curvature, budget);
        }
        prev = Trial { a, f: p.f, slope: s };
        prev_point = Some(p);
        a *= 2.0;
    }
    Ok(None)
}

/// Zoom phase: `lo` satisfies the sufficient-decrease condition and has the
/// lowest value seen so far; `lo_point` is its evaluated point when known.
fn zoom<E, A, C>(
    eval: &mut E,
    mut lo: Trial,
    mut hi: Trial,
    mut lo_point: Option<Point>,
    armijo: &A,
    curvature: &C,
    mut budget: usize,
) -> Result<Option<Point>>
where
    E: FnMut(f64) -> Result<(Point, f64)>,
    A: Fn(f64, f64) -> bool,
    C: Fn(f64) -> bool,
{
    while budget > 0 {
        budget -= 1;
        let (left, right) = if lo.a < hi.a { (lo.a, hi.a) } else { (hi.a, lo.a) };
        let width = right - left;
        if width <= f64::EPSILON * right.abs().max(1e-300) {
            break;
        }
        let mut a = cubic_min(&lo, &hi).unwrap_or(0.5 * (lo.a + hi.a));
        if !(a > left + 0.1 * width && a < right - 0.1 * width) {
            a = 0.5 * (lo.a + hi.a);
        }
        let (p, s) = eval(a)?;
        if !p.f.is_finite() || !s.is_finite() {
            hi = Trial {
                a,
                f: f64::INFINITY,
                slope: f64::NAN,
            };
            continue;
        }
        if !armijo(a, p.f) || p.f >= lo.f {
            hi = Trial { a, f: p.f, slope: s };
        } else {
            if curvature(s) {
                return Ok(Some(p));
            }
            if s * (hi.a - lo.a) >= 0.0 {
                hi = lo;
            }
            lo = Trial { a, f: p.f, slope: s };
            lo_point = Some(p);
        }
    }
    // Budget exhausted: accept the best point with sufficient decrease.
    Ok(lo_point.filter(|_| lo.a > 0.0))
}

/// Minimiser of the cubic interpolating values and slopes at both ends.
fn cubic_min(p: &Trial, q: &Trial) -> Option<f64> {
    if !(q.f.is_finite() && q.slope.is_finite()) {
        return None;
    }
    let d1 = p.slope + q.slope - 3.0 * (p.f - q.f) / (p.a - q.a);
    let disc = d1 * d1 - p.slope * q.slope;
    if disc < 0.0 {
        return None;
    }
    let d2 = (q.a - p.a).signum() * disc.sqrt();
    let a = q.a - (q.a - p.a) * (q.slope + d2 - d1) / (q.slope - p.slope + 2.0 * d2);
    a.is_finite().then_some(a)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cubic_recovers_quadratic_minimum() {
        // f(a) = (a − 0.3)², exact for a cubic fit.
        let f = |a: f64| (a - 0.3) * (a - 0.3);
        let s = |a: f64| 2.0 * (a - 0.3);
        let p = Trial { a: 0.0, f: f(0.0), slope: s(0.0) };
        let q = Trial { a: 1.0, f: f(1.0), slope: s(1.0) };
        assert!((cubic_min(&p, &q).unwrap() - 0.3).abs() < 1e-12);
    }

    #[test]
    fn weighted_quadratic() {
        // f(x) = ½ (x − c)ᵀ W (x − c); the W-gradient is x − c.
        let w = SparseMatrix::from_triplets(2, 2, &[(0, 0, 2.0), (0, 1, 0.5), (1, 0, 0.5), (1, 1, 1.0)]).unwrap();
        let c = [1.0, -2.0];
        let (x, r) = lbfgs_minimize(
            |x| {
                let e = [x[0] - c[0], x[1] - c[1]];
                Ok((0.5 * w.bilinear(&e, &e), e.to_vec()))
            },
            vec![0.0, 0.0],
            InnerProduct::Sparse(&w),
            &LbfgsOptions::default(),
        )
        .unwrap();
        assert_eq!(r.termination, Termination::Gradient);
        assert!((x[0] - 1.0).abs() < 1e-9 && (x[1] + 2.0).abs() < 1e-9);
    }
}
