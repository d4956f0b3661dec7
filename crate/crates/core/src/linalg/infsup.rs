use crate::error::{check_len, Result};
use crate::linalg::{sym_eig, Cholesky, DenseMatrix};

/// Smallest generalised singular value of `B` (size `n_p × n_u`) with respect
/// to the inner products `X_u` and `X_p`:
///
/// `β = min_q max_v (qᵀ B v) / (‖v‖_{X_u} ‖q‖_{X_p})`,
///
/// computed as the square root of the smallest eigenvalue of
/// `L⁻¹ (B X_u⁻¹ Bᵀ) L⁻ᵀ` where `X_p = L Lᵀ`.
pub fn smallest_generalized_singular_value(
    b: &DenseMatrix,
    x_u: &DenseMatrix,
    x_p: &DenseMatrix,
) -> Result<f64> {
    check_len("inf-sup: X_u size", b.cols(), x_u.rows())?;
    check_len("inf-sup: X_u square", x_u.rows(), x_u.cols())?;
    check_len("inf-sup: X_p size", b.rows(), x_p.rows())?;
    check_len("inf-sup: X_p square", x_p.rows(), x_p.cols())?;
    let np = b.rows();
    if np == 0 {
        return Ok(f64::INFINITY);
    }
    let cu = Cholesky::factor(x_u)?;
    let cp = Cholesky::factor(x_p)?;

    // W = L_u⁻¹ Bᵀ, so B X_u⁻¹ Bᵀ = Wᵀ W.
    let mut w = DenseMatrix::zeros(b.cols(), np);
    for q in 0..np {
        w.set_column(q, &cu.solve_lower(b.row(q)));
    }
    let s = w.tr_matmul(&w)?;

    // Ŝ = L_p⁻¹ S L_p⁻ᵀ.
    let mut t = DenseMatrix::zeros(np, np);
    for j in 0..np {
        t.set_column(j, &cp.solve_lower(&s.column(j)));
    }
    let tt = t.transpose();
    let mut shat = DenseMatrix::zeros(np, np);
    for j in 0..np {
        shat.set_column(j, &cp.solve_lower(&tt.column(j)));
    }
    shat.symmetrize();
    let (vals, _) = sym_eig(&shat)?;
    Ok(vals[np - 1].max(0.0).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_inner_products_give_singular_value() {
        // B = diag(3, 0.5) padded: singular values 3 and 0.5.
        let b = DenseMatrix::from_rows(&[vec![3.0, 0.0, 0.0], vec![0.0, 0.5, 0.0]]).unwrap();
        let beta = smallest_generalized_singular_value(
            &b,
            &DenseMatrix::identity(3),
            &DenseMatrix::identity(2),
        )
        .unwrap();
        assert!((beta - 0.5).abs() < 1e-14);
    }

    #[test]
    fn scaled_inner_products() {
        let b = DenseMatrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let mut xu = DenseMatrix::identity(2);
        xu.scale(4.0);
        let beta =
            smallest_generalized_singular_value(&b, &xu, &DenseMatrix::identity(2)).unwrap();
        assert!((beta - 0.5).abs() < 1e-14);
    }

    #[test]
    fn rank_deficient_is_zero() {
        let b = DenseMatrix::from_rows(&[vec![1.0, 1.0], vec![2.0, 2.0]]).unwrap();
        let beta = smallest_generalized_singular_value(
            &b,
            &DenseMatrix::identity(2),
            &DenseMatrix::identity(2),
        )
        .unwrap();
        assert!(beta < 1e-7);
    }
}
