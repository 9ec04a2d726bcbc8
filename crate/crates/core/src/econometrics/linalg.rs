//! Small dense helpers shared by the estimators.

use alloc::string::String;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::{Error, Result};

/// Relative squared-norm threshold below which a column counts as a linear
/// combination of the ones before it.
const COLLINEAR_TOL: f64 = 1e-12;

/// Modified Gram-Schmidt pass over `cols`; the first column whose residual
/// norm² falls below `COLLINEAR_TOL · reference[j]` is reported by name.
pub fn check_full_rank(cols: &[&[f64]], reference: &[f64], names: &[String]) -> Result<()> {
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(cols.len());
    for (j, col) in cols.iter().enumerate() {
        let mut v = col.to_vec();
        for q in &basis {
            let d = dot(&v, q);
            v.iter_mut().zip(q).for_each(|(a, b)| *a -= d * b);
        }
        let norm2 = dot(&v, &v);
        if !(norm2 > COLLINEAR_TOL * reference[j].max(f64::MIN_POSITIVE)) {
            return Err(Error::Collinear(names[j].clone()));
        }
        let norm = libm::sqrt(norm2);
        v.iter_mut().for_each(|a| *a /= norm);
        basis.push(v);
    }
    Ok(())
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn matrix_from_columns(n: usize, cols: &[&[f64]]) -> DMatrix<f64> {
    DMatrix::from_fn(n, cols.len(), |i, j| cols[j][i])
}

/// Inverse of a symmetric positive definite matrix.
pub fn spd_inverse(a: &DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    a.clone()
        .cholesky()
        .map(|c| c.inverse())
        .ok_or_else(|| Error::Collinear(String::from(what)))
}

/// Least-squares coefficients via the normal equations.
pub fn ols(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let bread = spd_inverse(&(x.transpose() * x), "design matrix")?;
    let beta = &bread * (x.transpose() * y);
    Ok((beta, bread))
}

/// Σ_g s_g s_g' with s_g = Σ_{i∈g} x_i u_i.
pub fn cluster_meat(x: &DMatrix<f64>, u: &DVector<f64>, groups: &[usize], n_groups: usize) -> DMatrix<f64> {
    let k = x.ncols();
    let mut scores = DMatrix::<f64>::zeros(n_groups, k);
    for (i, &g) in groups.iter().enumerate() {
        for j in 0..k {
            scores[(g, j)] += x[(i, j)] * u[i];
        }
    }
    scores.transpose() * scores
}

/// Σ_i x_i x_i' u_i², the heteroskedasticity-robust meat.
pub fn hetero_meat(x: &DMatrix<f64>, u: &DVector<f64>) -> DMatrix<f64> {
    let mut xu = x.clone();
    for (i, mut row) in xu.row_iter_mut().enumerate() {
        row *= u[i];
    }
    xu.transpose() * xu
}

pub fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn rank_check_names_column() {
        let a = [1.0, 2.0, 3.0];
        let b = [2.0, 4.0, 6.0];
        let c = [1.0, 0.0, 0.0];
        let names = vec!["a".into(), "b".into(), "c".into()];
        let refs = [14.0, 56.0, 1.0];
        assert_eq!(
            check_full_rank(&[&a, &b, &c], &refs, &names).unwrap_err(),
            Error::Collinear("b".into())
        );
        assert!(check_full_rank(&[&a, &c], &[14.0, 1.0], &names).is_ok());
    }

    #[test]
    fn ols_exact_line() {
        let x = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 1.0, 1.0, 1.0, 2.0]);
        let y = DVector::from_vec(vec![1.0, 3.0, 5.0]);
        let (b, _) = ols(&x, &y).unwrap();
        assert!((b[0] - 1.0).abs() < 1e-12 && (b[1] - 2.0).abs() < 1e-12);
    }
}
