//! Small dense linear-algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;

/// Eigenpairs of a symmetric matrix sorted by decreasing eigenvalue. Ties keep
/// the solver's original order.
pub fn sorted_eigen(m: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(m.clone());
    let n = m.nrows();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = DVector::from_iterator(n, idx.iter().map(|&i| eig.eigenvalues[i]));
    let mut vectors = DMatrix::zeros(n, n);
    for (c, &i) in idx.iter().enumerate() {
        vectors.set_column(c, &eig.eigenvectors.column(i));
    }
    (values, vectors)
}

pub fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

pub fn is_symmetric(m: &DMatrix<f64>, tol: f64) -> bool {
    m.is_square()
        && (0..m.nrows()).all(|i| (0..i).all(|j| (m[(i, j)] - m[(j, i)]).abs() <= tol))
}

/// Largest absolute eigenvalue of a symmetric matrix.
pub fn spectral_norm_sym(m: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(m.clone())
        .eigenvalues
        .iter()
        .fold(0.0f64, |acc, v| acc.max(v.abs()))
}

/// Best rank-`r` approximation of a symmetric matrix in Frobenius norm: keeps
/// the `r` eigenpairs of largest absolute eigenvalue.
pub fn truncate_rank(m: &DMatrix<f64>, r: usize) -> DMatrix<f64> {
    let n = m.nrows();
    if r >= n {
        return m.clone();
    }
    let eig = SymmetricEigen::new(m.clone());
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| eig.eigenvalues[b].abs().total_cmp(&eig.eigenvalues[a].abs()));
    let mut out = DMatrix::zeros(n, n);
    for &i in idx.iter().take(r) {
        let v = eig.eigenvectors.column(i);
        out.ger(eig.eigenvalues[i], &v, &v, 1.0);
    }
    symmetrize(&mut out);
    out
}

/// Count of eigenvalues with magnitude above `rel_tol * |||m|||`.
pub fn numerical_rank(m: &DMatrix<f64>, rel_tol: f64) -> usize {
    let eig = SymmetricEigen::new(m.clone());
    let top = eig.eigenvalues.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if top == 0.0 {
        return 0;
    }
    eig.eigenvalues
        .iter()
        .filter(|v| v.abs() > rel_tol * top)
        .count()
}

/// Symmetric PSD square root; negative eigenvalues (rounding) are clipped to 0.
pub fn psd_sqrt(m: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(m.clone());
    let n = m.nrows();
    let mut out = DMatrix::zeros(n, n);
    for i in 0..n {
        let v = eig.eigenvectors.column(i);
        out.ger(eig.eigenvalues[i].max(0.0).sqrt(), &v, &v, 1.0);
    }
    symmetrize(&mut out);
    out
}

pub fn random_unit<R: Rng + ?Sized>(rng: &mut R, d: usize) -> DVector<f64> {
    loop {
        let v = DVector::from_iterator(d, (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)));
        let norm = v.norm();
        if norm > 0.0 {
            return v / norm;
        }
    }
}

/// Indices of the `s` largest-magnitude entries; ties go to the lower index.
pub fn top_indices(v: &DVector<f64>, s: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[b].abs().total_cmp(&v[a].abs()).then(a.cmp(&b)));
    idx.truncate(s);
    idx.sort_unstable();
    idx
}

/// Keeps the `s` largest-magnitude entries and zeroes the rest.
pub fn hard_threshold(v: &DVector<f64>, s: usize) -> DVector<f64> {
    let mut out = DVector::zeros(v.len());
    for i in top_indices(v, s) {
        out[i] = v[i];
    }
    out
}

pub fn count_nonzero(v: &DVector<f64>) -> usize {
    v.iter().filter(|x| **x != 0.0).count()
}

/// Frobenius inner product.
pub fn frob_dot(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

/// `u^T m u`.
pub fn quad_form(m: &DMatrix<f64>, u: &DVector<f64>) -> f64 {
    let mut acc = 0.0;
    for j in 0..m.ncols() {
        let col = m.column(j);
        acc += u[j] * col.dot(u);
    }
    acc
}
