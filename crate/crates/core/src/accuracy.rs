//! A priori bound on the expected objective loss from privatizing `A`:
//! `L * ||x_bar||_2 * H(A) * xi`, where `L = ||c||_2`, `x_bar` is a max-norm
//! feasible point, `H(A)` is the 2-norm Hoffman constant of the original
//! matrix, and `xi` bounds the expected Frobenius size of the perturbation.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::lp::{max_norm_point, MaxNorm};
use crate::matrix::Matrix;
use crate::mechanism::support_width;
use crate::problem::{ConstraintSystem, LinearProgram, PrivacyParams};

/// Largest row count accepted by [`hoffman_constant`] (`2^14 - 1` subsets).
pub const HOFFMAN_MAX_ROWS: usize = 14;

/// Row subsets whose inner-cone minimum is at or below this are treated as
/// not surjective.
pub const HOFFMAN_ADMISSION_TOL: f64 = 1e-9;

const SIGN_TOL: f64 = 1e-10;

/// Smallest `||M_S^T v||_2` over unit eigenvectors `v` of `(M M^T)_{S,S}`
/// that can be signed nonnegative, where `S` is the row set of `mask`.
/// `INFINITY` if there are none. The norm is evaluated directly rather than
/// as the square root of the eigenvalue, which would inflate round-off
/// near zero.
fn support_candidate(mat: &DMatrix<f64>, gram: &DMatrix<f64>, mask: usize) -> f64 {
    let idx: Vec<usize> = (0..gram.nrows()).filter(|i| mask >> i & 1 == 1).collect();
    let sub = DMatrix::from_fn(idx.len(), idx.len(), |r, c| gram[(idx[r], idx[c])]);
    let eig = SymmetricEigen::new(sub);
    let mut best = f64::INFINITY;
    for k in 0..idx.len() {
        let v = eig.eigenvectors.column(k);
        let sign = if v.sum() < 0.0 { -1.0 } else { 1.0 };
        if !v.iter().all(|&x| sign * x >= -SIGN_TOL) {
            continue;
        }
        let w: Vec<f64> = v.iter().map(|x| (sign * x).max(0.0)).collect();
        let mut image = DVector::<f64>::zeros(mat.ncols());
        for (&wi, &i) in w.iter().zip(&idx) {
            image += wi * mat.row(i).transpose();
        }
        let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        best = best.min(image.norm() / norm);
    }
    best
}

/// For every nonempty row subset `J` (as a bitmask), the minimum of
/// `||M_J^T v||_2` over unit `v >= 0`. Entry 0 is unused.
///
/// The minimizer over `J` has some support `S` within `J`, on which it is an
/// eigenvector of the principal submatrix `(M M^T)_{S,S}`; so each subset's
/// value is the minimum of the eigen-candidates over its own subsets.
fn subset_minima(m: &Matrix) -> Vec<f64> {
    let rows = m.nrows();
    let mat = m.to_nalgebra();
    let gram = &mat * mat.transpose();
    let full = 1usize << rows;
    let mut best: Vec<f64> = (0..full)
        .into_par_iter()
        .map(|mask| {
            if mask == 0 {
                f64::INFINITY
            } else {
                support_candidate(&mat, &gram, mask)
            }
        })
        .collect();
    for mask in 1..full {
        for i in 0..rows {
            if mask >> i & 1 == 1 {
                let sub = mask & !(1 << i);
                if sub != 0 && best[sub] < best[mask] {
                    best[mask] = best[sub];
                }
            }
        }
    }
    best
}

/// `min { ||M^T v||_2 : v >= 0, ||v||_2 = 1 }`.
pub fn inner_cone_min(m: &Matrix) -> f64 {
    assert!(m.nrows() > 0, "inner_cone_min needs at least one row");
    assert!(
        m.nrows() <= 20,
        "inner_cone_min enumerates supports; {} rows is too many",
        m.nrows()
    );
    let minima = subset_minima(m);
    minima[(1 << m.nrows()) - 1]
}

/// 2-norm Hoffman constant: the largest reciprocal inner-cone minimum over
/// row subsets `J` for which `x -> A_J x + R_+^J` is surjective. Surjectivity
/// is equivalent to a positive inner-cone minimum.
pub fn hoffman_constant(a: &Matrix) -> Result<f64> {
    let rows = a.nrows();
    if rows > HOFFMAN_MAX_ROWS {
        return Err(Error::HoffmanSizeCap {
            rows,
            cap: HOFFMAN_MAX_ROWS,
        });
    }
    if rows == 0 {
        return Err(Error::DegenerateHoffman);
    }
    let minima = subset_minima(a);
    minima[1..]
        .iter()
        .filter(|&&v| v > HOFFMAN_ADMISSION_TOL)
        .map(|v| 1.0 / v)
        .fold(None, |acc: Option<f64>, h| {
            Some(acc.map_or(h, |b| b.max(h)))
        })
        .ok_or(Error::DegenerateHoffman)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum XiCase {
    /// No privatized entry can reach its supremum: closed form.
    Interior,
    /// Some entry may be clipped: Frobenius distance to the supremum matrix.
    Clipped,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct XiTerm {
    pub xi: f64,
    pub case: XiCase,
}

/// The perturbation-size term.
///
/// Interior case: `sqrt(sum_j 2 m (k/eps)^2 n0_j + (n0_j s_j)^2)` over rows
/// with privatized entries, `m` the row count. Clipped case (some
/// `a_ij + 2 s_i >= sup_ij`): `||A - sup_A||_F`.
pub fn xi_term(sys: &ConstraintSystem, p: &PrivacyParams) -> Result<XiTerm> {
    let m = sys.nrows() as f64;
    let sigma = p.sigma();
    let mut clipped = false;
    let mut sum = 0.0;
    for i in 0..sys.nrows() {
        let n0 = sys.nonzero_count(i);
        if n0 == 0 {
            continue;
        }
        let s = support_width(p.k, p.epsilon, p.delta, n0)?;
        let a = sys.a().row(i);
        let sup = sys.sup_a().row(i);
        let mask = sys.zero_mask().row(i);
        clipped |= (0..a.len()).any(|j| !mask[j] && a[j] + 2.0 * s >= sup[j]);
        let n0 = n0 as f64;
        sum += 2.0 * m * sigma * sigma * n0 + (n0 * s).powi(2);
    }
    Ok(if clipped {
        XiTerm {
            xi: sys.a().frobenius_distance(sys.sup_a()),
            case: XiCase::Clipped,
        }
    } else {
        XiTerm {
            xi: sum.sqrt(),
            case: XiCase::Interior,
        }
    })
}

fn finite_or_inf<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_f64(*v)
    } else {
        s.serialize_str("inf")
    }
}

/// Bound components; non-finite values serialize as `"inf"`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AccuracyReport {
    #[serde(rename = "L")]
    pub lipschitz: f64,
    #[serde(serialize_with = "finite_or_inf")]
    pub x_bar_norm: f64,
    pub hoffman: f64,
    pub xi: f64,
    pub xi_case: XiCase,
    #[serde(serialize_with = "finite_or_inf")]
    pub bound: f64,
}

impl AccuracyReport {
    /// Multiplies the factors; a zero factor wins over an infinite one.
    pub fn assemble(lipschitz: f64, x_bar_norm: f64, hoffman: f64, xi: XiTerm) -> Self {
        let factors = [lipschitz, x_bar_norm, hoffman, xi.xi];
        let bound = if factors.contains(&0.0) {
            0.0
        } else {
            factors.iter().product()
        };
        Self {
            lipschitz,
            x_bar_norm,
            hoffman,
            xi: xi.xi,
            xi_case: xi.case,
            bound,
        }
    }
}

/// Expected-loss bound for privatizing `lp` at level `p`.
pub fn cost_bound(lp: &LinearProgram, p: &PrivacyParams) -> Result<AccuracyReport> {
    let sys = &lp.system;
    let x_bar_norm = match max_norm_point(sys)? {
        MaxNorm::Bounded { norm, .. } => norm,
        MaxNorm::Unbounded => f64::INFINITY,
    };
    let hoffman = hoffman_constant(sys.a())?;
    let xi = xi_term(sys, p)?;
    Ok(AccuracyReport::assemble(
        lp.lipschitz(),
        x_bar_norm,
        hoffman,
        xi,
    ))
}
