use super::Component;
use crate::error::{check_len, Error, Result};
use crate::linalg::{gemm, sym_eig, Cholesky, DenseMatrix, SparseMatrix};

/// Relative eigenvalue cut below which a POD mode is numerically zero.
pub const RANK_TOL: f64 = 1e-14;

/// `C = Sᵀ X S`, symmetrised.
pub fn correlation_matrix(s: &DenseMatrix, x: &SparseMatrix) -> Result<DenseMatrix> {
    check_len("correlation inner product", s.rows(), x.nrows())?;
    check_len("correlation inner product (square)", x.nrows(), x.ncols())?;
    let xs = x.mul_dense(s);
    let mut c = s.tr_matmul(&xs)?;
    c.symmetrize();
    Ok(c)
}

/// X-orthonormal POD basis.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedBasis {
    pub component: Component,
    /// `N_h × N` modes, one per column.
    pub phi: DenseMatrix,
    /// Full correlation spectrum, descending and clamped at zero.
    pub eigenvalues: Vec<f64>,
    pub inner_product: Option<SparseMatrix>,
    /// Trailing columns that are supremiser modes.
    pub supremisers: usize,
}

impl ReducedBasis {
    pub fn n(&self) -> usize {
        self.phi.cols()
    }

    pub fn full_dim(&self) -> usize {
        self.phi.rows()
    }

    /// Discarded energy fraction `Σ_{k>N} λ_k / Σ_k λ_k` of the POD modes.
    pub fn discarded_energy(&self) -> f64 {
        tail_ratio(&self.eigenvalues, self.n() - self.supremisers)
    }

    /// Coefficients `Φᵀ X v`.
    pub fn project(&self, v: &[f64]) -> Result<Vec<f64>> {
        check_len("projection vector", self.full_dim(), v.len())?;
        let xv = match &self.inner_product {
            Some(x) => x.matvec(v),
            None => v.to_vec(),
        };
        Ok(self.phi.tr_matvec(&xv))
    }

    /// `Φ c`.
    pub fn reconstruct(&self, c: &[f64]) -> Result<Vec<f64>> {
        check_len("reduced coefficients", self.n(), c.len())?;
        Ok(self.phi.matvec(c))
    }

    /// Gram matrix `Φᵀ X Φ`.
    pub fn gram(&self) -> DenseMatrix {
        match &self.inner_product {
            Some(x) => {
                let xp = x.mul_dense(&self.phi);
                self.phi.tr_matmul(&xp).expect("conforming shapes")
            }
            None => self.phi.tr_matmul(&self.phi).expect("conforming shapes"),
        }
    }

    /// `max |ΦᵀXΦ − I|`.
    pub fn orthonormality_error(&self) -> f64 {
        let g = self.gram();
        let mut e = 0.0f64;
        for i in 0..g.rows() {
            for j in 0..g.cols() {
                let t = if i == j { 1.0 } else { 0.0 };
                e = e.max((g[(i, j)] - t).abs());
            }
        }
        e
    }

    /// First `n` modes.
    pub fn truncated(&self, n: usize) -> Result<Self> {
        if n > self.n() - self.supremisers {
            return Err(Error::RankDeficient {
                requested: n,
                rank: self.n() - self.supremisers,
            });
        }
        Ok(Self {
            phi: self.phi.leading_columns(n),
            supremisers: 0,
            ..self.clone()
        })
    }
}

fn tail_ratio(eig: &[f64], n: usize) -> f64 {
    let total: f64 = eig.iter().sum();
    if total <= 0.0 {
        return 0.0;
    }
    eig.iter().skip(n).sum::<f64>() / total
}

/// Eigenpairs of the correlation matrix, descending, eigenvalues clamped at
/// zero.
#[derive(Debug, Clone)]
pub struct PodSpectrum {
    pub eigenvalues: Vec<f64>,
    pub vectors: DenseMatrix,
}

pub fn pod_spectrum(s: &DenseMatrix, x: &SparseMatrix) -> Result<PodSpectrum> {
    let (mut eigenvalues, vectors) = sym_eig(&correlation_matrix(s, x)?)?;
    eigenvalues.iter_mut().for_each(|l| *l = l.max(0.0));
    Ok(PodSpectrum { eigenvalues, vectors })
}

/// Number of eigenvalues with `λ_k ≥ RANK_TOL · λ_1` and `λ_k > 0`.
pub fn numerical_rank(eigenvalues: &[f64]) -> usize {
    let l1 = eigenvalues.first().copied().unwrap_or(0.0);
    eigenvalues.iter().take_while(|&&l| l > 0.0 && l >= RANK_TOL * l1).count()
}

/// POD of the columns of `s` in the `x` inner product, keeping `n` modes
/// `Φ_k = S v_k / √λ_k` (re-orthonormalised in `x`). Modes with `λ_k < RANK_TOL · λ_1` are rejected.
pub fn pod_basis(s: &DenseMatrix, x: &SparseMatrix, n: usize, component: Component) -> Result<ReducedBasis> {
    pod_basis_from_spectrum(s, x, &pod_spectrum(s, x)?, n, component)
}

/// As [`pod_basis`] with a precomputed spectrum of the same snapshots.
pub fn pod_basis_from_spectrum(
    s: &DenseMatrix,
    x: &SparseMatrix,
    spec: &PodSpectrum,
    n: usize,
    component: Component,
) -> Result<ReducedBasis> {
    let lam = &spec.eigenvalues;
    check_len("POD spectrum", s.cols(), lam.len())?;
    let rank = numerical_rank(lam);
    if n > rank {
        return Err(Error::RankDeficient { requested: n, rank });
    }
    let mut vn = spec.vectors.leading_columns(n);
    for k in 0..n {
        let scale = 1.0 / lam[k].sqrt();
        for r in 0..vn.rows() {
            vn.row_mut(r)[k] *= scale;
        }
    }
    let mut phi = DenseMatrix::zeros(s.rows(), n);
    gemm(1.0, s, false, &vn, false, 0.0, &mut phi);
    reorthonormalize(&mut phi, x)?;
    Ok(ReducedBasis {
        component,
        phi,
        eigenvalues: lam.clone(),
        inner_product: Some(x.clone()),
        supremisers: 0,
    })
}

/// `Φ ← Φ L⁻ᵀ` with `ΦᵀXΦ = LLᵀ`. Removes the round-off that `S v_k / √λ_k`
/// picks up for small `λ_k`; the spans of the leading columns are kept.
fn reorthonormalize(phi: &mut DenseMatrix, x: &SparseMatrix) -> Result<()> {
    if phi.cols() == 0 {
        return Ok(());
    }
    let mut g = phi.tr_matmul(&x.mul_dense(phi))?;
    g.symmetrize();
    let l = Cholesky::factor(&g)?;
    for r in 0..phi.rows() {
        let y = l.solve_lower(phi.row(r));
        phi.row_mut(r).copy_from_slice(&y);
    }
    Ok(())
}

/// Smallest `N` whose discarded energy fraction is at most `threshold`.
pub fn choose_modes_by_energy(eigenvalues: &[f64], threshold: f64) -> Result<usize> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::Invalid(format!("energy threshold must lie in (0, 1), got {threshold}")));
    }
    let total: f64 = eigenvalues.iter().map(|l| l.max(0.0)).sum();
    if total <= 0.0 {
        return Err(Error::Invalid("all-zero spectrum".into()));
    }
    let mut tail = total;
    for (n, l) in eigenvalues.iter().enumerate() {
        if tail / total <= threshold {
            return Ok(n);
        }
        tail -= l.max(0.0);
    }
    Ok(eigenvalues.len())
}

/// Velocity basis followed by the supremiser modes, without
/// re-orthonormalisation.
pub fn enrich_with_supremisers(velocity: &ReducedBasis, supremisers: &ReducedBasis) -> Result<ReducedBasis> {
    check_len("supremiser basis rows", velocity.full_dim(), supremisers.full_dim())?;
    if supremisers.n() == 0 {
        return Ok(velocity.clone());
    }
    let mut cols = velocity.phi.columns();
    cols.extend(supremisers.phi.columns());
    Ok(ReducedBasis {
        component: velocity.component,
        phi: DenseMatrix::from_columns(&cols)?,
        eigenvalues: velocity.eigenvalues.clone(),
        inner_product: velocity.inner_product.clone(),
        supremisers: velocity.supremisers + supremisers.n(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_column() {
        let s = DenseMatrix::from_columns(&[vec![3.0, 4.0]]).unwrap();
        let x = SparseMatrix::identity(2);
        let b = pod_basis(&s, &x, 1, Component::G).unwrap();
        assert!((b.eigenvalues[0] - 25.0).abs() < 1e-12);
        assert!((b.phi[(0, 0)] - 0.6).abs() < 1e-12);
    }

    #[test]
    fn energy_examples() {
        assert_eq!(choose_modes_by_energy(&[1.0, 1e-8], 1e-6).unwrap(), 1);
        assert_eq!(choose_modes_by_energy(&[1.0; 4], 1e-6).unwrap(), 4);
        assert!(choose_modes_by_energy(&[0.0, 0.0], 1e-6).is_err());
    }

    #[test]
    fn rank_rejected() {
        let s = DenseMatrix::from_columns(&[vec![1.0, 2.0], vec![1.0, 2.0]]).unwrap();
        let x = SparseMatrix::identity(2);
        assert!(matches!(
            pod_basis(&s, &x, 2, Component::G),
            Err(Error::RankDeficient { rank: 1, .. })
        ));
    }
}
