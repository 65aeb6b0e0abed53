//! Dense linear-algebra helpers shared by the solvers.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};

use crate::error::{Error, Result};

pub type Matrix = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Relative asymmetry ‖A − Aᵀ‖_F / ‖A‖_F (zero for the zero matrix).
pub fn symmetry_defect(a: &Matrix) -> f64 {
    let norm = a.norm();
    if norm == 0.0 {
        return 0.0;
    }
    (a - a.transpose()).norm() / norm
}

/// ½(A + Aᵀ).
pub fn symmetrize(a: &Matrix) -> Matrix {
    (a + a.transpose()) * 0.5
}

/// Eigen-decomposition of a symmetric matrix with eigenvalues in ascending
/// order and each eigenvector sign-fixed so its largest-magnitude entry is
/// positive.
pub fn sorted_symmetric_eigen(a: &Matrix) -> (Vector, Matrix) {
    let n = a.nrows();
    let eig = SymmetricEigen::new(a.clone());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = Vector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vectors = Matrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    fix_column_signs(&mut vectors);
    (values, vectors)
}

pub fn min_eigenvalue(a: &Matrix) -> f64 {
    if a.nrows() == 0 {
        return f64::INFINITY;
    }
    SymmetricEigen::new(symmetrize(a))
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// Spectral norm of a symmetric matrix (largest |eigenvalue|).
pub fn symmetric_norm2(a: &Matrix) -> f64 {
    if a.nrows() == 0 {
        return 0.0;
    }
    SymmetricEigen::new(symmetrize(a))
        .eigenvalues
        .iter()
        .fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

/// Flip column signs so that the largest-magnitude entry of every column is
/// positive. Ties resolve to the first such entry.
pub fn fix_column_signs(m: &mut Matrix) {
    for mut col in m.column_iter_mut() {
        let mut best = 0.0_f64;
        let mut sign = 1.0;
        for v in col.iter() {
            if v.abs() > best {
                best = v.abs();
                sign = v.signum();
            }
        }
        if sign < 0.0 {
            col.neg_mut();
        }
    }
}

/// Cholesky factorization with a named error on failure.
pub fn cholesky(a: &Matrix, name: &str) -> Result<Cholesky<f64, Dyn>> {
    Cholesky::new(a.clone()).ok_or_else(|| Error::Singular(format!("Cholesky of {name}")))
}

/// Checks symmetry (relative tolerance `sym_tol`) and positive definiteness.
pub fn check_spd(a: &Matrix, name: &str, sym_tol: f64) -> Result<()> {
    let defect = symmetry_defect(a);
    if defect > sym_tol {
        return Err(Error::NotSymmetric {
            name: name.to_string(),
            defect,
        });
    }
    let min = min_eigenvalue(a);
    if !(min > 0.0) {
        return Err(Error::NotPositiveDefinite {
            name: name.to_string(),
            min_eigenvalue: min,
        });
    }
    Ok(())
}

/// Numerical rank from singular values using the usual `max(m, n)·ε·σ₁` cutoff.
pub fn numerical_rank(singular_values: &[f64], rows: usize, cols: usize) -> usize {
    let smax = singular_values.iter().copied().fold(0.0_f64, f64::max);
    if smax == 0.0 {
        return 0;
    }
    let cutoff = smax * (rows.max(cols) as f64) * f64::EPSILON;
    singular_values.iter().filter(|&&s| s > cutoff).count()
}

/// Minimum-norm least-squares solution of `A X ≈ B` through an SVD.
/// Returns the solution and the numerical rank of `A`.
pub fn lstsq_min_norm(a: &Matrix, b: &Matrix) -> Result<(Matrix, usize)> {
    if a.nrows() != b.nrows() {
        return Err(Error::dims("least squares", a.nrows(), b.nrows()));
    }
    if a.ncols() == 0 {
        return Ok((Matrix::zeros(0, b.ncols()), 0));
    }
    let svd = a.clone().svd(true, true);
    let sv: Vec<f64> = svd.singular_values.iter().copied().collect();
    let rank = numerical_rank(&sv, a.nrows(), a.ncols());
    let u = svd.u.as_ref().expect("requested U");
    let vt = svd.v_t.as_ref().expect("requested Vᵀ");
    let smax = sv.iter().copied().fold(0.0_f64, f64::max);
    let cutoff = smax * (a.nrows().max(a.ncols()) as f64) * f64::EPSILON;
    let mut x = Matrix::zeros(a.ncols(), b.ncols());
    for (i, &s) in sv.iter().enumerate() {
        if s <= cutoff || s == 0.0 {
            continue;
        }
        let coeff = u.column(i).transpose() * b / s;
        x += vt.row(i).transpose() * coeff;
    }
    Ok((x, rank))
}

/// Generalized symmetric-definite eigenproblem `K x = ω² M x`.
///
/// Eigenvalues ascend; eigenvectors are M-orthonormal (`XᵀMX = I`) and
/// sign-fixed.
pub fn generalized_eigen(k: &Matrix, m: &Matrix) -> Result<(Vector, Matrix)> {
    let chol = cholesky(m, "mass matrix")?;
    let l = chol.l();
    let linv_k = l
        .solve_lower_triangular(k)
        .ok_or_else(|| Error::Singular("mass factor".into()))?;
    let c = l
        .solve_lower_triangular(&linv_k.transpose())
        .ok_or_else(|| Error::Singular("mass factor".into()))?;
    let (values, y) = sorted_symmetric_eigen(&symmetrize(&c));
    let mut x = l
        .transpose()
        .solve_upper_triangular(&y)
        .ok_or_else(|| Error::Singular("mass factor".into()))?;
    fix_column_signs(&mut x);
    Ok((values, x))
}

/// Largest absolute entry.
pub fn max_abs(a: &Matrix) -> f64 {
    a.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

pub fn relative_frobenius(a: &Matrix, reference: &Matrix) -> f64 {
    let denom = reference.norm();
    if denom == 0.0 {
        return (a - reference).norm();
    }
    (a - reference).norm() / denom
}
