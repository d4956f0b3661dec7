use crate::error::{check_len, Error, Result};
use crate::linalg::{minimum_degree, SparseMatrix};

const NONE: usize = usize::MAX;

/// Sparse LU factorisation `P A Q = L U` (left-looking, Gilbert–Peierls).
///
/// Columns are ordered by minimum degree on `A + Aᵀ`; rows are chosen by
/// threshold partial pivoting that prefers the diagonal entry whenever it is
/// within `pivot_tol` of the column maximum. Explicitly stored zeros are
/// skipped, so eliminated couplings do not create fill.
#[derive(Debug, Clone)]
pub struct SparseLu {
    n: usize,
    q: Vec<usize>,
    pinv: Vec<usize>,
    l_ptr: Vec<usize>,
    l_idx: Vec<usize>,
    l_val: Vec<f64>,
    u_ptr: Vec<usize>,
    u_idx: Vec<usize>,
    u_val: Vec<f64>,
}

impl SparseLu {
    pub const DEFAULT_PIVOT_TOL: f64 = 0.01;

    pub fn factor(a: &SparseMatrix) -> Result<Self> {
        check_len("sparse LU (square)", a.nrows(), a.ncols())?;
        let q = minimum_degree(a);
        Self::factor_with_ordering(a, &q)
    }

    /// Factorises with a precomputed column ordering (reused across matrices
    /// sharing one sparsity pattern).
    pub fn factor_with_ordering(a: &SparseMatrix, q: &[usize]) -> Result<Self> {
        Self::factor_with(a, q, Self::DEFAULT_PIVOT_TOL)
    }

    pub fn factor_with(a: &SparseMatrix, q: &[usize], pivot_tol: f64) -> Result<Self> {
        let n = a.nrows();
        check_len("sparse LU (square)", n, a.ncols())?;
        check_len("sparse LU ordering", n, q.len())?;
        // Columns of A are the rows of Aᵀ.
        let at = a.transpose();
        let nnz = a.nnz();
        let mut l_ptr = Vec::with_capacity(n + 1);
        let mut l_idx = Vec::with_capacity(4 * nnz + n);
        let mut l_val = Vec::with_capacity(4 * nnz + n);
        let mut u_ptr = Vec::with_capacity(n + 1);
        let mut u_idx = Vec::with_capacity(4 * nnz + n);
        let mut u_val = Vec::with_capacity(4 * nnz + n);
        let mut pinv = vec![NONE; n];
        let mut x = vec![0.0; n];
        let mut xi = vec![0usize; n];
        let mut stack = vec![0usize; n];
        let mut pstack = vec![0usize; n];
        let mut mark = vec![0usize; n];
        let mut stamp = 0usize;

        for k in 0..n {
            l_ptr.push(l_idx.len());
            u_ptr.push(u_idx.len());
            let col = q[k];
            let (rows, vals) = at.row(col);

            // Symbolic: nonzero pattern of L \ A(:, col), topologically ordered.
            stamp += 1;
            let mut top = n;
            for (&r, &v) in rows.iter().zip(vals) {
                if v != 0.0 && mark[r] != stamp {
                    top = dfs(
                        r, &l_ptr, &l_idx, &pinv, &mut mark, stamp, &mut xi, top, &mut stack,
                        &mut pstack,
                    );
                }
            }

            // Numeric sparse triangular solve.
            for &j in &xi[top..n] {
                x[j] = 0.0;
            }
            for (&r, &v) in rows.iter().zip(vals) {
                x[r] = v;
            }
            for &j in &xi[top..n] {
                let jj = pinv[j];
                if jj == NONE {
                    continue;
                }
                let xj = x[j];
                if xj == 0.0 {
                    continue;
                }
                let (s, e) = (l_ptr[jj] + 1, l_ptr[jj + 1]);
                for p in s..e {
                    x[l_idx[p]] -= l_val[p] * xj;
                }
            }

            // Pivot selection.
            let mut ipiv = NONE;
            let mut amax = -1.0f64;
            for &i in &xi[top..n] {
                if pinv[i] == NONE {
                    let t = x[i].abs();
                    if t > amax {
                        amax = t;
                        ipiv = i;
                    }
                } else {
                    u_idx.push(pinv[i]);
                    u_val.push(x[i]);
                }
            }
            if ipiv == NONE || amax <= 0.0 {
                return Err(Error::Singular { column: col });
            }
            if pinv[col] == NONE && mark[col] == stamp && x[col].abs() >= amax * pivot_tol {
                ipiv = col;
            }
            let pivot = x[ipiv];
            u_idx.push(k);
            u_val.push(pivot);
            pinv[ipiv] = k;
            l_idx.push(ipiv);
            l_val.push(1.0);
            for &i in &xi[top..n] {
                if pinv[i] == NONE {
                    l_idx.push(i);
                    l_val.push(x[i] / pivot);
                }
                x[i] = 0.0;
            }
        }
        l_ptr.push(l_idx.len());
        u_ptr.push(u_idx.len());
        for r in l_idx.iter_mut() {
            *r = pinv[*r];
        }
        Ok(Self {
            n,
            q: q.to_vec(),
            pinv,
            l_ptr,
            l_idx,
            l_val,
            u_ptr,
            u_idx,
            u_val,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn ordering(&self) -> &[usize] {
        &self.q
    }

    /// Number of steps where the pivot row differs from the ordered column.
    pub fn off_diagonal_pivots(&self) -> usize {
        (0..self.n).filter(|&k| self.pinv[self.q[k]] != k).count()
    }

    /// Number of stored entries in `L` and `U`.
    pub fn fill(&self) -> usize {
        self.l_idx.len() + self.u_idx.len()
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x)?;
        Ok(x)
    }

    pub fn solve_in_place(&self, b: &mut [f64]) -> Result<()> {
        check_len("sparse LU solve", self.n, b.len())?;
        let n = self.n;
        let mut y = vec![0.0; n];
        for i in 0..n {
            y[self.pinv[i]] = b[i];
        }
        for j in 0..n {
            let yj = y[j];
            if yj != 0.0 {
                for p in self.l_ptr[j] + 1..self.l_ptr[j + 1] {
                    y[self.l_idx[p]] -= self.l_val[p] * yj;
                }
            }
        }
        for j in (0..n).rev() {
            let d = self.u_ptr[j + 1] - 1;
            y[j] /= self.u_val[d];
            let yj = y[j];
            if yj != 0.0 {
                for p in self.u_ptr[j]..d {
                    y[self.u_idx[p]] -= self.u_val[p] * yj;
                }
            }
        }
        for k in 0..n {
            b[self.q[k]] = y[k];
        }
        Ok(())
    }

    /// Solves `Aᵀ x = b`.
    pub fn solve_transpose(&self, b: &[f64]) -> Result<Vec<f64>> {
        check_len("sparse LU transpose solve", self.n, b.len())?;
        let n = self.n;
        let mut z: Vec<f64> = (0..n).map(|k| b[self.q[k]]).collect();
        for j in 0..n {
            let d = self.u_ptr[j + 1] - 1;
            let mut s = z[j];
            for p in self.u_ptr[j]..d {
                s -= self.u_val[p] * z[self.u_idx[p]];
            }
            z[j] = s / self.u_val[d];
        }
        for j in (0..n).rev() {
            let mut s = z[j];
            for p in self.l_ptr[j] + 1..self.l_ptr[j + 1] {
                s -= self.l_val[p] * z[self.l_idx[p]];
            }
            z[j] = s;
        }
        Ok((0..n).map(|i| z[self.pinv[i]]).collect())
    }
}

/// Depth-first search from row `j` through the columns of `L` computed so far.
#[allow(clippy::too_many_arguments)]
fn dfs(
    j: usize,
    l_ptr: &[usize],
    l_idx: &[usize],
    pinv: &[usize],
    mark: &mut [usize],
    stamp: usize,
    xi: &mut [usize],
    mut top: usize,
    stack: &mut [usize],
    pstack: &mut [usize],
) -> usize {
    let mut head: isize = 0;
    stack[0] = j;
    while head >= 0 {
        let h = head as usize;
        let j = stack[h];
        let jnew = pinv[j];
        if mark[j] != stamp {
            mark[j] = stamp;
            pstack[h] = if jnew == NONE { 0 } else { l_ptr[jnew] + 1 };
        }
        let end = if jnew == NONE { 0 } else { l_ptr[jnew + 1] };
        let mut done = true;
        let mut p = pstack[h];
        while p < end {
            let i = l_idx[p];
            p += 1;
            if mark[i] == stamp {
                continue;
            }
            pstack[h] = p;
            head += 1;
            stack[head as usize] = i;
            done = false;
            break;
        }
        if done {
            head -= 1;
            top -= 1;
            xi[top] = j;
        }
    }
    top
}

#[cfg(test)]
mod tests {
    use super::*;

    fn residual(a: &SparseMatrix, x: &[f64], b: &[f64]) -> f64 {
        a.matvec(x)
            .iter()
            .zip(b)
            .map(|(r, b)| (r - b).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn two_by_two() {
        let a = SparseMatrix::from_triplets(2, 2, &[(0, 0, 2.0), (0, 1, 1.0), (1, 0, 1.0), (1, 1, 3.0)])
            .unwrap();
        let x = SparseLu::factor(&a).unwrap().solve(&[3.0, 4.0]).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-14 && (x[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn needs_row_pivoting() {
        // Zero diagonal: saddle-point like.
        let a = SparseMatrix::from_triplets(
            3,
            3,
            &[(0, 0, 1.0), (0, 2, 1.0), (1, 1, 1.0), (1, 2, 2.0), (2, 0, 1.0), (2, 1, 2.0)],
        )
        .unwrap();
        let b = [1.0, 2.0, 3.0];
        let lu = SparseLu::factor(&a).unwrap();
        let x = lu.solve(&b).unwrap();
        assert!(residual(&a, &x, &b) < 1e-13);
        let xt = lu.solve_transpose(&b).unwrap();
        assert!(residual(&a.transpose(), &xt, &b) < 1e-13);
    }

    #[test]
    fn singular_reported() {
        let a = SparseMatrix::from_triplets(2, 2, &[(0, 0, 1.0), (0, 1, 2.0), (1, 0, 2.0), (1, 1, 4.0)])
            .unwrap();
        assert!(matches!(SparseLu::factor(&a), Err(Error::Singular { .. })));
        let z = SparseMatrix::from_triplets(2, 2, &[(0, 0, 1.0)]).unwrap();
        assert!(matches!(SparseLu::factor(&z), Err(Error::Singular { .. })));
    }

    #[test]
    fn shape_mismatch_reported() {
        let a = SparseMatrix::identity(3);
        let lu = SparseLu::factor(&a).unwrap();
        assert!(matches!(lu.solve(&[1.0]), Err(Error::Shape { .. })));
        let r = SparseMatrix::from_triplets(2, 3, &[(0, 0, 1.0)]).unwrap();
        assert!(matches!(SparseLu::factor(&r), Err(Error::Shape { .. })));
    }
}
