//! Small dense linear-algebra helpers shared across the crate.
//!
//! Everything operates on `nalgebra` dynamic matrices. Symmetric inputs are
//! expected to be exactly symmetric; use [`sym`] after any product that is
//! only symmetric up to roundoff.

use nalgebra::{Complex, DMatrix, DVector};

use crate::{Error, Result};

/// `(x + xᵀ)/2`.
pub fn sym(x: &DMatrix<f64>) -> DMatrix<f64> {
    let mut s = x.clone();
    s += x.transpose();
    s *= 0.5;
    s
}

/// Relative asymmetry `‖X − Xᵀ‖∞ / max(1, ‖X‖∞)`.
pub fn rel_asymmetry(x: &DMatrix<f64>) -> f64 {
    let diff = x - x.transpose();
    diff.amax() / x.amax().max(1.0)
}

/// Eigenvalues (ascending) and eigenvectors of a symmetric matrix.
pub fn sym_eigen(x: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    if x.nrows() == 0 {
        return (DVector::zeros(0), DMatrix::zeros(0, 0));
    }
    let se = sym(x).symmetric_eigen();
    let n = x.nrows();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| se.eigenvalues[a].total_cmp(&se.eigenvalues[b]));
    let vals = DVector::from_fn(n, |i, _| se.eigenvalues[idx[i]]);
    let mut vecs = DMatrix::zeros(n, n);
    for (k, &j) in idx.iter().enumerate() {
        vecs.set_column(k, &se.eigenvectors.column(j));
    }
    (vals, vecs)
}

/// Smallest eigenvalue of a symmetric matrix (`+∞` for 0×0).
pub fn min_eig_sym(x: &DMatrix<f64>) -> f64 {
    if x.nrows() == 0 {
        return f64::INFINITY;
    }
    sym(x).symmetric_eigen().eigenvalues.min()
}

/// PSD test with relative tolerance: min eigenvalue ≥ −tol·‖X‖.
pub fn is_psd(x: &DMatrix<f64>, tol: f64) -> bool {
    if x.nrows() == 0 {
        return true;
    }
    min_eig_sym(x) >= -tol * x.amax().max(1e-300)
}

/// PD test: min eigenvalue > tol·max(1, ‖X‖).
pub fn is_pd(x: &DMatrix<f64>, tol: f64) -> bool {
    if x.nrows() == 0 {
        return true;
    }
    min_eig_sym(x) > tol * x.amax().max(1.0)
}

/// Symmetric PSD square root, eigenvalues floored at 0.
pub fn psd_sqrt(x: &DMatrix<f64>) -> DMatrix<f64> {
    if x.nrows() == 0 {
        return x.clone();
    }
    let (vals, vecs) = sym_eigen(x);
    let d = DMatrix::from_diagonal(&vals.map(|v| v.max(0.0).sqrt()));
    sym(&(&vecs * d * vecs.transpose()))
}

/// Nearest-PSD projection: negative eigenvalues clipped to 0.
pub fn psd_project(x: &DMatrix<f64>) -> DMatrix<f64> {
    if x.nrows() == 0 {
        return x.clone();
    }
    let (vals, vecs) = sym_eigen(x);
    let d = DMatrix::from_diagonal(&vals.map(|v| v.max(0.0)));
    sym(&(&vecs * d * vecs.transpose()))
}

/// `log det X` of a symmetric PSD matrix, eigenvalues floored at 1e-300.
/// A 0×0 matrix has determinant 1, so the result is 0.
pub fn ln_det_floored(x: &DMatrix<f64>) -> f64 {
    if x.nrows() == 0 {
        return 0.0;
    }
    let se = sym(x).symmetric_eigen();
    se.eigenvalues.iter().map(|&v| v.max(1e-300).ln()).sum()
}

/// Inverse of a symmetric PD matrix via Cholesky.
pub fn pd_inverse(x: &DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    if x.nrows() == 0 {
        return Ok(x.clone());
    }
    sym(x)
        .cholesky()
        .map(|c| sym(&c.inverse()))
        .ok_or_else(|| Error::Singular(format!("{what} is not positive definite")))
}

/// Solve `X · Z = B` for symmetric PD `X`.
pub fn pd_solve(x: &DMatrix<f64>, b: &DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    sym(x)
        .cholesky()
        .map(|c| c.solve(b))
        .ok_or_else(|| Error::Singular(format!("{what} is not positive definite")))
}

/// Eigenvalues of a general square real matrix, sorted by modulus descending.
pub fn eigenvalues(a: &DMatrix<f64>) -> Vec<Complex<f64>> {
    let mut ev: Vec<Complex<f64>> = a.clone().complex_eigenvalues().iter().copied().collect();
    ev.sort_by(|x, y| y.norm().total_cmp(&x.norm()).then(y.re.total_cmp(&x.re)));
    ev
}

/// Spectral radius `max |λᵢ(A)|` (0 for a 0×0 matrix).
pub fn spectral_radius(a: &DMatrix<f64>) -> f64 {
    if a.nrows() == 0 {
        return 0.0;
    }
    eigenvalues(a).first().map(|l| l.norm()).unwrap_or(0.0)
}

/// Numerical rank of a complex matrix from its singular values.
fn complex_rank(m: DMatrix<Complex<f64>>) -> usize {
    let sv = m.svd(false, false).singular_values;
    let tol = 1e-10 * sv.max().max(1.0);
    sv.iter().filter(|&&s| s > tol).count()
}

/// PBH test: `rank [A − λI; C] = n` at every eigenvalue λ of A selected by
/// `select`. `C` is stacked below. Returns the first failing eigenvalue.
pub fn pbh_observable_at(
    a: &DMatrix<f64>,
    c: &DMatrix<f64>,
    select: impl Fn(&Complex<f64>) -> bool,
) -> Option<Complex<f64>> {
    let n = a.nrows();
    for lam in eigenvalues(a).into_iter().filter(|l| select(l)) {
        let mut m = DMatrix::<Complex<f64>>::zeros(n + c.nrows(), n);
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] = Complex::new(a[(i, j)], 0.0);
            }
            m[(i, i)] -= lam;
        }
        for i in 0..c.nrows() {
            for j in 0..n {
                m[(n + i, j)] = Complex::new(c[(i, j)], 0.0);
            }
        }
        if complex_rank(m) < n {
            return Some(lam);
        }
    }
    None
}

/// PBH test: `rank [A − λI, B] = n` at every eigenvalue selected by `select`.
pub fn pbh_controllable_at(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    select: impl Fn(&Complex<f64>) -> bool,
) -> Option<Complex<f64>> {
    pbh_observable_at(&a.transpose(), &b.transpose(), select)
}
