//! Independent oracles shared by the integration tests. Nothing here calls
//! into the crate's quadrature or basis code.

#![allow(dead_code)]

use ddflow::fem::TaylorHoodSpace;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

/// Five-point Gauss–Legendre rule on [0, 1].
pub fn gauss5() -> [(f64, f64); 5] {
    let x = [
        0.0,
        -0.538_469_310_105_683_1,
        0.538_469_310_105_683_1,
        -0.906_179_845_938_664_0,
        0.906_179_845_938_664_0,
    ];
    let w = [
        0.568_888_888_888_888_9,
        0.478_628_670_499_366_5,
        0.478_628_670_499_366_5,
        0.236_926_885_056_189_1,
        0.236_926_885_056_189_1,
    ];
    std::array::from_fn(|i| (0.5 * (x[i] + 1.0), 0.5 * w[i]))
}

/// Gaussian elimination with partial pivoting on a small dense system.
pub fn dense_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for k in 0..n {
        let p = (k..n).max_by(|&i, &j| a[i][k].abs().total_cmp(&a[j][k].abs())).unwrap();
        a.swap(k, p);
        b.swap(k, p);
        for i in k + 1..n {
            let f = a[i][k] / a[k][k];
            for j in k..n {
                a[i][j] -= f * a[k][j];
            }
            b[i] -= f * b[k];
        }
    }
    let mut x = vec![0.0; n];
    for k in (0..n).rev() {
        let s: f64 = (k + 1..n).map(|j| a[k][j] * x[j]).sum();
        x[k] = (b[k] - s) / a[k][k];
    }
    x
}

/// A P2 field on one element as a quadratic in local coordinates
/// `ξ = (x − x₀)/h`, `η = (y − y₀)/h`, interpolating the six nodal values.
#[derive(Clone, Copy)]
pub struct Quadratic {
    c: [f64; 6],
    origin: [f64; 2],
    h: f64,
}

impl Quadratic {
    pub fn fit(points: &[[f64; 2]; 6], values: &[f64; 6]) -> Self {
        let origin = points[0];
        let h = points.iter().map(|&p| dist(p, origin)).fold(0.0, f64::max);
        let rows = points
            .iter()
            .map(|&[x, y]| {
                let (s, t) = ((x - origin[0]) / h, (y - origin[1]) / h);
                vec![1.0, s, t, s * s, s * t, t * t]
            })
            .collect();
        let c = dense_solve(rows, values.to_vec());
        Quadratic { c: std::array::from_fn(|i| c[i]), origin, h }
    }

    fn local(&self, x: f64, y: f64) -> (f64, f64) {
        ((x - self.origin[0]) / self.h, (y - self.origin[1]) / self.h)
    }

    pub fn value(&self, x: f64, y: f64) -> f64 {
        let (s, t) = self.local(x, y);
        let c = &self.c;
        c[0] + c[1] * s + c[2] * t + c[3] * s * s + c[4] * s * t + c[5] * t * t
    }

    pub fn grad(&self, x: f64, y: f64) -> [f64; 2] {
        let (s, t) = self.local(x, y);
        let c = &self.c;
        [(c[1] + 2.0 * c[3] * s + c[4] * t) / self.h, (c[2] + c[4] * s + 2.0 * c[5] * t) / self.h]
    }
}

/// Both components of a velocity vector on element `e`.
pub fn element_field(space: &TaylorHoodSpace, u: &[f64], e: usize) -> [Quadratic; 2] {
    let nodes = space.elem_nodes()[e];
    let nn = space.n_nodes();
    let pts = nodes.map(|n| space.node_coords()[n]);
    std::array::from_fn(|c| Quadratic::fit(&pts, &nodes.map(|n| u[c * nn + n])))
}

/// Collapsed-Gauss quadrature points and weights on the triangle `p`
/// (exact for polynomials of degree ≤ 8).
pub fn triangle_points(p: [[f64; 2]; 3]) -> Vec<([f64; 2], f64)> {
    let area2 = ((p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1])).abs();
    let mut out = Vec::with_capacity(25);
    for (xi, wx) in gauss5() {
        for (eta, wy) in gauss5() {
            let x = p[0][0] + xi * (p[1][0] - p[0][0]) + xi * eta * (p[2][0] - p[1][0]);
            let y = p[0][1] + xi * (p[1][1] - p[0][1]) + xi * eta * (p[2][1] - p[1][1]);
            out.push(([x, y], wx * wy * area2 * xi));
        }
    }
    out
}

/// `c(u, w, v) = ∫ (u·∇)w · v` by element-wise quadrature.
pub fn trilinear(space: &TaylorHoodSpace, u: &[f64], w: &[f64], v: &[f64]) -> f64 {
    let mesh = space.mesh();
    let mut total = 0.0;
    for (e, tri) in mesh.triangles.iter().enumerate() {
        let (fu, fw, fv) = (element_field(space, u, e), element_field(space, w, e), element_field(space, v, e));
        for ([x, y], wt) in triangle_points(tri.map(|i| mesh.vertices[i])) {
            let uu = [fu[0].value(x, y), fu[1].value(x, y)];
            for c in 0..2 {
                let g = fw[c].grad(x, y);
                total += wt * (uu[0] * g[0] + uu[1] * g[1]) * fv[c].value(x, y);
            }
        }
    }
    total
}

/// Quadratic Lagrange interpolant on a segment through values at t = 0, ½, 1.
pub fn edge_interp(v: [f64; 3], t: f64) -> f64 {
    let (a, m, b) = (v[0], v[1], v[2]);
    a + t * (-3.0 * a + 4.0 * m - b) + t * t * (2.0 * a - 4.0 * m + 2.0 * b)
}

pub fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

pub fn rel_diff(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}
