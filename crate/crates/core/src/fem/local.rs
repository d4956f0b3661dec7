//! Element kernels. Local velocity dof `c·6 + a` is component `c` of node `a`.

use super::quadrature::{p2_gradients, p2_values, TRI_QUAD};
use super::space::ElemGeom;

pub type Mat6 = [[f64; 6]; 6];
pub type Mat12 = [[f64; 12]; 12];

pub fn mass(g: &ElemGeom) -> Mat6 {
    let mut m = [[0.0; 6]; 6];
    for (l, w) in TRI_QUAD {
        let phi = p2_values(l);
        let w = w * g.area;
        for b in 0..6 {
            for a in 0..6 {
                m[b][a] += w * phi[a] * phi[b];
            }
        }
    }
    m
}

pub fn stiffness(g: &ElemGeom) -> Mat6 {
    let mut k = [[0.0; 6]; 6];
    for (l, w) in TRI_QUAD {
        let dphi = p2_gradients(l, &g.grad_lambda);
        let w = w * g.area;
        for b in 0..6 {
            for a in 0..6 {
                k[b][a] += w * (dphi[a][0] * dphi[b][0] + dphi[a][1] * dphi[b][1]);
            }
        }
    }
    k
}

/// `B[r][c·6+a] = -∫ ∂_c φ_a λ_r`.
pub fn divergence(g: &ElemGeom) -> [[f64; 12]; 3] {
    let mut d = [[0.0; 12]; 3];
    for (l, w) in TRI_QUAD {
        let dphi = p2_gradients(l, &g.grad_lambda);
        let w = w * g.area;
        for r in 0..3 {
            for c in 0..2 {
                for a in 0..6 {
                    d[r][c * 6 + a] -= w * dphi[a][c] * l[r];
                }
            }
        }
    }
    d
}

pub fn pressure_mass(g: &ElemGeom) -> [[f64; 3]; 3] {
    let mut m = [[0.0; 3]; 3];
    for (l, w) in TRI_QUAD {
        for i in 0..3 {
            for j in 0..3 {
                m[i][j] += w * g.area * l[i] * l[j];
            }
        }
    }
    m
}

/// `c1[b][a] = ∫ (w·∇φ_a) φ_b` only.
pub fn advection(g: &ElemGeom, wl: &[[f64; 6]; 2]) -> Mat6 {
    let mut c1 = [[0.0; 6]; 6];
    for (l, w) in TRI_QUAD {
        let phi = p2_values(l);
        let dphi = p2_gradients(l, &g.grad_lambda);
        let w = w * g.area;
        let mut wv = [0.0; 2];
        for c in 0..2 {
            for a in 0..6 {
                wv[c] += wl[c][a] * phi[a];
            }
        }
        let adv: [f64; 6] = std::array::from_fn(|a| wv[0] * dphi[a][0] + wv[1] * dphi[a][1]);
        for b in 0..6 {
            let wb = w * phi[b];
            for a in 0..6 {
                c1[b][a] += wb * adv[a];
            }
        }
    }
    c1
}

/// Convection matrices of one element for the field with local nodal values
/// `wl[c][a]`.
pub struct LocalConvection {
    /// `c1[b][a] = ∫ (w·∇φ_a) φ_b` (scalar block, same for both components).
    pub c1: Mat6,
    /// `c2[(c,b)][(c',a)] = ∫ φ_a φ_b ∂_{c'} w_c`.
    pub c2: Mat12,
    /// `c3[(c,b)][(c',a)] = ∫ φ_a ∂_{c'} φ_b w_c`.
    pub c3: Mat12,
}

pub fn convection(g: &ElemGeom, wl: &[[f64; 6]; 2], need_c3: bool) -> LocalConvection {
    let mut c1 = [[0.0; 6]; 6];
    let mut c2 = [[0.0; 12]; 12];
    let mut c3 = [[0.0; 12]; 12];
    for (l, w) in TRI_QUAD {
        let phi = p2_values(l);
        let dphi = p2_gradients(l, &g.grad_lambda);
        let w = w * g.area;
        let mut wv = [0.0; 2];
        let mut gw = [[0.0; 2]; 2]; // gw[c][c'] = ∂_{c'} w_c
        for c in 0..2 {
            for a in 0..6 {
                wv[c] += wl[c][a] * phi[a];
                gw[c][0] += wl[c][a] * dphi[a][0];
                gw[c][1] += wl[c][a] * dphi[a][1];
            }
        }
        let adv: [f64; 6] = std::array::from_fn(|a| wv[0] * dphi[a][0] + wv[1] * dphi[a][1]);
        for b in 0..6 {
            let wb = w * phi[b];
            for a in 0..6 {
                c1[b][a] += wb * adv[a];
                let mab = wb * phi[a];
                for c in 0..2 {
                    for cp in 0..2 {
                        c2[c * 6 + b][cp * 6 + a] += mab * gw[c][cp];
                    }
                }
            }
        }
        if need_c3 {
            for b in 0..6 {
                for a in 0..6 {
                    let wa = w * phi[a];
                    for c in 0..2 {
                        for cp in 0..2 {
                            c3[c * 6 + b][cp * 6 + a] += wa * dphi[b][cp] * wv[c];
                        }
                    }
                }
            }
        }
    }
    LocalConvection { c1, c2, c3 }
}

/// Local convection operator and its Jacobian contribution.
///
/// Returns `(N, J)` as 12×12 blocks where `N(w)` is the convection matrix
/// applied to the unknown (`C₁` or its skew part) and `J` the derivative of
/// `N(u)u` at `u = w`.
pub fn convection_operator(g: &ElemGeom, wl: &[[f64; 6]; 2], skew: bool) -> (Mat12, Mat12) {
    let lc = convection(g, wl, skew);
    let mut n = [[0.0; 12]; 12];
    for c in 0..2 {
        for b in 0..6 {
            for a in 0..6 {
                n[c * 6 + b][c * 6 + a] = lc.c1[b][a];
            }
        }
    }
    if skew {
        let mut s = [[0.0; 12]; 12];
        for i in 0..12 {
            for j in 0..12 {
                s[i][j] = 0.5 * (n[i][j] - n[j][i]);
            }
        }
        n = s;
    }
    let mut jac = n;
    for i in 0..12 {
        for j in 0..12 {
            jac[i][j] += if skew {
                0.5 * (lc.c2[i][j] - lc.c3[i][j])
            } else {
                lc.c2[i][j]
            };
        }
    }
    (n, jac)
}
