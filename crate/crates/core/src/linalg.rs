//! Dense complex matrix helpers on top of `faer`.

use alloc::vec::Vec;

use faer::{Mat, Side};
#[allow(unused_imports)]
use num_traits::Float;

pub use faer::c64;

use crate::error::{Error, Result};

/// Dense complex square matrix acting on the `2^N`-dimensional chain space.
pub type Operator = Mat<c64>;

pub const ZERO: c64 = c64 { re: 0.0, im: 0.0 };
pub const ONE: c64 = c64 { re: 1.0, im: 0.0 };
pub const I: c64 = c64 { re: 0.0, im: 1.0 };

/// `|z|`
pub fn abs(z: c64) -> f64 {
    z.re.hypot(z.im)
}

pub fn zeros(dim: usize) -> Operator {
    Mat::zeros(dim, dim)
}

pub fn identity(dim: usize) -> Operator {
    Mat::identity(dim, dim)
}

pub fn adjoint(a: &Operator) -> Operator {
    a.adjoint().to_owned()
}

pub fn matmul(a: &Operator, b: &Operator) -> Operator {
    a * b
}

/// `[a, b] = ab - ba`
pub fn commutator(a: &Operator, b: &Operator) -> Operator {
    let mut out = a * b;
    out -= b * a;
    out
}

/// `out += scale * a`
pub fn add_scaled(out: &mut Operator, scale: c64, a: &Operator) {
    debug_assert_eq!(out.nrows(), a.nrows());
    debug_assert_eq!(out.ncols(), a.ncols());
    for j in 0..a.ncols() {
        let src = a.col_as_slice(j);
        let dst = out.col_as_slice_mut(j);
        for (d, s) in dst.iter_mut().zip(src) {
            *d += scale * *s;
        }
    }
}

pub fn scaled(scale: c64, a: &Operator) -> Operator {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| scale * a[(i, j)])
}

pub fn trace(a: &Operator) -> c64 {
    (0..a.nrows().min(a.ncols())).map(|i| a[(i, i)]).sum()
}

/// `Tr[a b]` without forming the product.
pub fn trace_product(a: &Operator, b: &Operator) -> c64 {
    let mut acc = ZERO;
    for i in 0..a.nrows() {
        for k in 0..a.ncols() {
            acc += a[(i, k)] * b[(k, i)];
        }
    }
    acc
}

pub fn frobenius_norm(a: &Operator) -> f64 {
    a.norm_l2()
}

pub fn max_abs(a: &Operator) -> f64 {
    a.norm_max()
}

/// `max_ij |a_ij - conj(a_ji)|`
pub fn hermiticity_defect(a: &Operator) -> f64 {
    let n = a.nrows();
    let mut worst = 0.0f64;
    for j in 0..n {
        for i in 0..=j {
            let d = abs(a[(i, j)] - a[(j, i)].conj());
            worst = worst.max(d);
        }
    }
    worst
}

/// Replaces `a` by `(a + a†)/2`.
pub fn hermitize(a: &mut Operator) {
    let n = a.nrows();
    for j in 0..n {
        a[(j, j)] = c64::new(a[(j, j)].re, 0.0);
        for i in 0..j {
            let avg = (a[(i, j)] + a[(j, i)].conj()) * 0.5;
            a[(i, j)] = avg;
            a[(j, i)] = avg.conj();
        }
    }
}

pub fn ensure_square(a: &Operator, dim: usize) -> Result<()> {
    if a.nrows() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: a.nrows(),
        });
    }
    if a.ncols() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: a.ncols(),
        });
    }
    Ok(())
}

/// Ascending eigenvalues of a Hermitian matrix (lower triangle is read).
pub fn hermitian_eigenvalues(a: &Operator) -> Result<Vec<f64>> {
    a.self_adjoint_eigenvalues(Side::Lower)
        .map_err(|_| Error::EigenDecomposition)
}

/// Ascending eigenvalues and matching orthonormal eigenvectors (as columns).
pub fn hermitian_eigen(a: &Operator) -> Result<(Vec<f64>, Operator)> {
    let evd = a
        .self_adjoint_eigen(Side::Lower)
        .map_err(|_| Error::EigenDecomposition)?;
    let values = (0..a.nrows()).map(|i| evd.S()[i].re).collect();
    Ok((values, evd.U().to_owned()))
}

/// True when every eigenvalue of the Hermitian matrix `a` exceeds `-margin`,
/// decided by a Cholesky attempt on `a + margin·I`.
pub fn exceeds_negative_margin(a: &Operator, margin: f64) -> bool {
    let n = a.nrows();
    let shifted = Mat::from_fn(n, n, |i, j| {
        if i == j {
            c64::new(a[(i, i)].re + margin, 0.0)
        } else {
            a[(i, j)]
        }
    });
    shifted.llt(Side::Lower).is_ok()
}

/// Column-stacking vectorization: `vec(ρ)[i + j·d] = ρ_ij`.
pub fn vectorize(a: &Operator) -> Vec<c64> {
    let d = a.nrows();
    let mut out = Vec::with_capacity(d * d);
    for j in 0..a.ncols() {
        out.extend_from_slice(a.col_as_slice(j));
    }
    out
}

pub fn unvectorize(v: &[c64], dim: usize) -> Operator {
    Mat::from_fn(dim, dim, |i, j| v[i + j * dim])
}

/// Adds `scale · vec(A ρ B)` to a column-stacked superoperator, i.e.
/// `scale · (Bᵀ ⊗ A)`. `None` stands for the identity.
pub(crate) fn add_sandwich(
    sup: &mut Operator,
    scale: c64,
    left: Option<&Operator>,
    right: Option<&Operator>,
) {
    let d = match (left, right) {
        (Some(a), _) => a.nrows(),
        (_, Some(b)) => b.nrows(),
        (None, None) => {
            let d2 = sup.nrows();
            for k in 0..d2 {
                sup[(k, k)] += scale;
            }
            return;
        }
    };
    // L[i + j d, p + q d] += scale · A_ip · B_qj
    match (left, right) {
        (Some(a), None) => {
            for j in 0..d {
                for p in 0..d {
                    for i in 0..d {
                        let v = a[(i, p)];
                        if v != ZERO {
                            sup[(i + j * d, p + j * d)] += scale * v;
                        }
                    }
                }
            }
        }
        (None, Some(b)) => {
            for q in 0..d {
                for j in 0..d {
                    let v = b[(q, j)];
                    if v != ZERO {
                        for i in 0..d {
                            sup[(i + j * d, i + q * d)] += scale * v;
                        }
                    }
                }
            }
        }
        (Some(a), Some(b)) => {
            for q in 0..d {
                for j in 0..d {
                    let bv = b[(q, j)];
                    if bv == ZERO {
                        continue;
                    }
                    for p in 0..d {
                        for i in 0..d {
                            let av = a[(i, p)];
                            if av != ZERO {
                                sup[(i + j * d, p + q * d)] += scale * av * bv;
                            }
                        }
                    }
                }
            }
        }
        (None, None) => unreachable!(),
    }
}
