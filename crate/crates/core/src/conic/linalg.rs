//! Complex-to-real machinery shared by the solver and the SDP builders:
//! symmetric vectorization, the Hermitian real embedding, Kronecker products
//! and column-major matrix vectorization.
//!
//! Conventions, fixed once here and relied on everywhere else:
//! - `svec` stores the upper triangle column by column with off-diagonal
//!   entries scaled by sqrt(2), so `svec(a) . svec(b) = tr(a b)` for
//!   symmetric `a`, `b`.
//! - `vec_cm` stacks columns, so `vec(a x b) = (b^T kron a) vec(x)`.
//! - `hermitian_embed(h) = [[re h, -im h], [im h, re h]]`, which is PSD
//!   exactly when `h` is PSD and doubles every eigenvalue's multiplicity.

use ndarray::{Array1, Array2};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Length of the symmetric vectorization of an `n x n` matrix.
pub fn svec_len(n: usize) -> usize {
    n * (n + 1) / 2
}

/// Position of upper-triangular entry `(i, j)`, `i <= j`, in svec storage.
pub fn svec_index(i: usize, j: usize) -> usize {
    debug_assert!(i <= j);
    j * (j + 1) / 2 + i
}

const SQRT2: f64 = std::f64::consts::SQRT_2;

/// Symmetric vectorization with sqrt(2)-scaled off-diagonals.
///
/// The input must be symmetric; only the upper triangle is read.
pub fn svec(a: &Array2<f64>) -> Array1<f64> {
    let n = a.nrows();
    debug_assert_eq!(n, a.ncols());
    let mut out = Array1::zeros(svec_len(n));
    let mut idx = 0;
    for j in 0..n {
        for i in 0..=j {
            out[idx] = if i == j { a[(i, j)] } else { SQRT2 * a[(i, j)] };
            idx += 1;
        }
    }
    out
}

/// Inverse of [`svec`]: rebuilds the full symmetric matrix.
pub fn smat(v: &Array1<f64>, n: usize) -> Array2<f64> {
    debug_assert_eq!(v.len(), svec_len(n));
    let mut a = Array2::zeros((n, n));
    let mut idx = 0;
    for j in 0..n {
        for i in 0..=j {
            if i == j {
                a[(i, j)] = v[idx];
            } else {
                let x = v[idx] / SQRT2;
                a[(i, j)] = x;
                a[(j, i)] = x;
            }
            idx += 1;
        }
    }
    a
}

/// Real embedding of a Hermitian matrix: `[[re, -im], [im, re]]`.
///
/// Fails if the input is not Hermitian within `1e-9` (absolute, relative to
/// the largest entry magnitude).
pub fn hermitian_embed(h: &ndarray::ArrayView2<Complex64>) -> Result<Array2<f64>> {
    let n = h.nrows();
    if n != h.ncols() {
        return Err(Error::Dimension(format!(
            "hermitian_embed expects square input, got {}x{}",
            n,
            h.ncols()
        )));
    }
    let scale = h.iter().map(|c| c.norm()).fold(1.0_f64, f64::max);
    let mut asym = 0.0_f64;
    for i in 0..n {
        for j in 0..n {
            asym = asym.max((h[(i, j)] - h[(j, i)].conj()).norm());
        }
    }
    if asym > 1e-9 * scale {
        return Err(Error::NotHermitian(asym));
    }
    Ok(embed_unchecked(h))
}

/// Real embedding without the Hermitian check, for matrices that are
/// Hermitian by construction.
pub fn embed_unchecked(h: &ndarray::ArrayView2<Complex64>) -> Array2<f64> {
    let n = h.nrows();
    let mut out = Array2::zeros((2 * n, 2 * n));
    for i in 0..n {
        for j in 0..n {
            let c = h[(i, j)];
            out[(i, j)] = c.re;
            out[(i, j + n)] = -c.im;
            out[(i + n, j)] = c.im;
            out[(i + n, j + n)] = c.re;
        }
    }
    out
}

/// Recovers the Hermitian matrix a solver-side real PSD block represents:
/// `a = (x11 + x22)/2`, `b = (x21 - x12)/2`, result `a + i b`.
///
/// For an exact embedding this inverts [`embed_unchecked`]; for a general
/// PSD `x` it is the projection onto embedding structure, and the result is
/// PSD whenever `x` is.
pub fn extract_hermitian(x: &Array2<f64>) -> Array2<Complex64> {
    let n2 = x.nrows();
    debug_assert_eq!(n2 % 2, 0);
    let n = n2 / 2;
    let mut out = Array2::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            let re = 0.5 * (x[(i, j)] + x[(i + n, j + n)]);
            let im = 0.5 * (x[(i + n, j)] - x[(i, j + n)]);
            out[(i, j)] = Complex64::new(re, im);
        }
    }
    // exact Hermitian symmetrization, so downstream eigensolves see clean input
    for i in 0..n {
        out[(i, i)] = Complex64::new(out[(i, i)].re, 0.0);
        for j in 0..i {
            let avg = 0.5 * (out[(i, j)] + out[(j, i)].conj());
            out[(i, j)] = avg;
            out[(j, i)] = avg.conj();
        }
    }
    out
}

/// Eigendecomposition of a Hermitian matrix whose returned columns satisfy
/// `m v = lambda v` for the matrix as stored, eigenvalues ascending.
///
/// LAPACK reads the buffer in column-major order while `ndarray` stores
/// row-major, so the raw routine decomposes the transpose; for a Hermitian
/// matrix that is the conjugate, and conjugating the returned basis
/// restores eigenvectors of `m` itself. The input is copied into row-major
/// layout first so this correction is always the right one.
pub fn hermitian_eig(m: &Array2<Complex64>) -> Result<(Array1<f64>, Array2<Complex64>)> {
    use ndarray_linalg::{Eigh, UPLO};
    let owned = m.as_standard_layout().into_owned();
    let (vals, vecs) = owned
        .eigh(UPLO::Lower)
        .map_err(|e| Error::AccuracyLimit(format!("hermitian eigendecomposition: {e}")))?;
    Ok((vals, vecs.mapv(|v| v.conj())))
}

/// Kronecker product with column-major-compatible ordering:
/// `kron(a, b)[(i1*rb + i2, j1*cb + j2)] = a[(i1, j1)] * b[(i2, j2)]`.
pub fn kron(a: &ndarray::ArrayView2<Complex64>, b: &ndarray::ArrayView2<Complex64>) -> Array2<Complex64> {
    let (ra, ca) = a.dim();
    let (rb, cb) = b.dim();
    let mut out = Array2::zeros((ra * rb, ca * cb));
    for i1 in 0..ra {
        for j1 in 0..ca {
            let aij = a[(i1, j1)];
            if aij == Complex64::new(0.0, 0.0) {
                continue;
            }
            for i2 in 0..rb {
                for j2 in 0..cb {
                    out[(i1 * rb + i2, j1 * cb + j2)] = aij * b[(i2, j2)];
                }
            }
        }
    }
    out
}

/// Column-major vectorization: `vec_cm(a)[i + j*rows] = a[(i, j)]`.
pub fn vec_cm(a: &ndarray::ArrayView2<Complex64>) -> Array1<Complex64> {
    let (r, c) = a.dim();
    let mut out = Array1::zeros(r * c);
    for j in 0..c {
        for i in 0..r {
            out[i + j * r] = a[(i, j)];
        }
    }
    out
}

/// Hermitian inner product `tr(a b)` for Hermitian `a`, `b` (real-valued).
pub fn herm_inner(a: &ndarray::ArrayView2<Complex64>, b: &ndarray::ArrayView2<Complex64>) -> f64 {
    let n = a.nrows();
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            // tr(ab) = sum_ij a_ij b_ji; for Hermitian inputs the sum is real
            acc += (a[(i, j)] * b[(j, i)]).re;
        }
    }
    acc
}
