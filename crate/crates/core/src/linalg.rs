//! Small dense complex linear-algebra helpers on top of `nalgebra`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

/// Relative tolerance below which a negative eigenvalue is treated as rounding noise.
const PSD_TOLERANCE: f64 = 1e-10;

/// Eigendecomposition of a Hermitian matrix, eigenvalues sorted in descending order.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    /// Column `i` is the eigenvector of `values[i]`.
    pub vectors: CMatrix,
}

pub fn hermitian_eigen(a: &CMatrix) -> Result<HermitianEigen> {
    if a.nrows() != a.ncols() {
        return Err(Error::Dimension(format!(
            "expected a square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    let n = a.nrows();
    if n == 0 {
        return Ok(HermitianEigen {
            values: vec![],
            vectors: CMatrix::zeros(0, 0),
        });
    }
    // Symmetrize so that round-off in the input cannot leak into the solver.
    let sym = (a + a.adjoint()).map(|z| z * 0.5);
    let eig = sym.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = CMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    Ok(HermitianEigen { values, vectors })
}

/// Eigendecomposition of a Hermitian positive semidefinite matrix.
///
/// Eigenvalues that are negative only by round-off are clamped to zero.
pub fn psd_eigen(a: &CMatrix) -> Result<HermitianEigen> {
    let mut eig = hermitian_eigen(a)?;
    let scale = eig.values.first().copied().unwrap_or(0.0).abs().max(1.0);
    for v in &mut eig.values {
        if *v < -PSD_TOLERANCE * scale {
            return Err(Error::NotPositiveSemidefinite { eigenvalue: *v });
        }
        *v = v.max(0.0);
    }
    Ok(eig)
}

/// Hermitian square root of a positive semidefinite matrix.
pub fn psd_sqrt(a: &CMatrix) -> Result<CMatrix> {
    let eig = psd_eigen(a)?;
    let n = a.nrows();
    let mut scaled = eig.vectors.clone();
    for c in 0..n {
        let s = eig.values[c].sqrt();
        for r in 0..n {
            scaled[(r, c)] *= s;
        }
    }
    Ok(&scaled * eig.vectors.adjoint())
}

/// Orthonormal basis of the null space of `a`, computed from a full SVD.
///
/// Singular values below `rel_tol * max(rows, cols) * sigma_max` count as zero.
/// The returned flag is true when the null space is larger than `cols - rows`.
pub fn null_space(a: &CMatrix, rel_tol: f64) -> (CMatrix, bool) {
    let (rows, cols) = a.shape();
    // Pad to a square matrix so that the SVD returns the full right factor.
    let dim = rows.max(cols);
    let mut padded = CMatrix::zeros(dim, cols);
    padded.view_mut((0, 0), (rows, cols)).copy_from(a);
    let svd = padded.svd(false, true);
    let v_t = svd.v_t.expect("right singular vectors were requested");
    let smax = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let cutoff = rel_tol * dim as f64 * smax.max(f64::MIN_POSITIVE);
    let rank = svd
        .singular_values
        .iter()
        .filter(|&&s| s > cutoff)
        .count();
    let nullity = cols - rank;
    let basis = CMatrix::from_fn(cols, nullity, |r, c| v_t[(rank + c, r)].conj());
    let expected = cols.saturating_sub(rows);
    (basis, nullity > expected)
}

/// Unit-norm right singular vector for the largest singular value.
pub fn dominant_right_singular_vector(a: &CMatrix) -> CVector {
    let cols = a.ncols();
    let dim = a.nrows().max(cols);
    let mut padded = CMatrix::zeros(dim, cols);
    padded.view_mut((0, 0), a.shape()).copy_from(a);
    let svd = padded.svd(false, true);
    let v_t = svd.v_t.expect("right singular vectors were requested");
    CVector::from_fn(cols, |r, _| v_t[(0, r)].conj())
}

/// Draws a circularly-symmetric complex Gaussian with unit variance.
pub fn sample_cn<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

pub fn sample_cn_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> CMatrix {
    // Column-major fill order keeps draws reproducible across nalgebra versions.
    let mut m = CMatrix::zeros(rows, cols);
    for c in 0..cols {
        for r in 0..rows {
            m[(r, c)] = sample_cn(rng);
        }
    }
    m
}

pub fn frobenius_norm_sqr(a: &CMatrix) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum()
}

/// Real trace of a Hermitian matrix.
pub fn trace_re(a: &CMatrix) -> f64 {
    (0..a.nrows().min(a.ncols())).map(|i| a[(i, i)].re).sum()
}

/// Quadratic form `x^H A x`, real part.
pub fn quad_form(a: &CMatrix, x: &CVector) -> f64 {
    x.dotc(&(a * x)).re
}
