//! Truncated Laplace noise and row-wise privatization of the constraint
//! matrix.
//!
//! Each non-zero entry `a` of row `i` becomes `min(a + s_i + z, sup)` where
//! `z` is truncated Laplace on `[-s_i, s_i]` with scale `k / epsilon`. Since
//! `z >= -s_i` the entry can only grow, so the private constraints are never
//! looser than the originals. Rows are independent, giving parallel
//! composition over rows.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::Value;

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::problem::{problem_to_json, ConstraintSystem, LinearProgram, PrivacyParams};

/// Half-width of the noise support for a row with `n0` privatized entries:
/// `(k / epsilon) * ln(n0 * (e^epsilon - 1) / delta + 1)`.
pub fn support_width(k: f64, epsilon: f64, delta: f64, n0: usize) -> Result<f64> {
    if n0 == 0 {
        return Err(Error::EmptyRow);
    }
    let n0 = n0 as f64;
    // ln(n0 (e^eps - 1)/delta + 1) without overflowing e^eps
    let log_term = if epsilon > 30.0 {
        epsilon + (n0 * (-(-epsilon).exp_m1()) / delta + (-epsilon).exp()).ln()
    } else {
        (n0 * epsilon.exp_m1() / delta).ln_1p()
    };
    Ok(k / epsilon * log_term)
}

/// Laplace density restricted to `[-s, s]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TruncLaplace {
    sigma: f64,
    s: f64,
}

impl TruncLaplace {
    pub fn new(sigma: f64, s: f64) -> Result<Self> {
        if !(sigma.is_finite() && sigma > 0.0 && s.is_finite() && s > 0.0) {
            return Err(Error::InvalidPrivacy(format!(
                "truncated Laplace needs sigma > 0 and s > 0, got sigma={sigma}, s={s}"
            )));
        }
        Ok(Self { sigma, s })
    }

    /// Mechanism parameters for a row with `n0` privatized entries.
    pub fn for_row(p: &PrivacyParams, n0: usize) -> Result<Self> {
        Self::new(p.sigma(), support_width(p.k, p.epsilon, p.delta, n0)?)
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn support(&self) -> f64 {
        self.s
    }

    /// `1 - exp(-s / sigma)`, the mass of one half of the untruncated
    /// Laplace over the support (times two).
    fn half_mass(&self) -> f64 {
        -(-self.s / self.sigma).exp_m1()
    }

    pub fn pdf(&self, z: f64) -> f64 {
        if z.abs() > self.s {
            return 0.0;
        }
        (-z.abs() / self.sigma).exp() / (2.0 * self.sigma * self.half_mass())
    }

    pub fn cdf(&self, z: f64) -> f64 {
        if z <= -self.s {
            return 0.0;
        }
        if z >= self.s {
            return 1.0;
        }
        let t = self.half_mass();
        let tail = -(-z.abs() / self.sigma).exp_m1() / t;
        0.5 + 0.5 * z.signum() * tail
    }

    /// Maps a uniform `u` in `[0, 1]` to the support through the inverse
    /// CDF. `u = 0` gives `-s`.
    pub fn quantile(&self, u: f64) -> f64 {
        if u <= 0.0 {
            return -self.s;
        }
        let t = self.half_mass();
        let centered = 1.0 - 2.0 * u;
        let z = if centered > 0.0 {
            self.sigma * (-t * centered).ln_1p()
        } else {
            -self.sigma * (t * centered).ln_1p()
        };
        z.clamp(-self.s, self.s)
    }

    /// One draw, consuming exactly one uniform from `rng`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.quantile(rng.gen::<f64>())
    }
}

/// Output of [`privatize_row`].
#[derive(Debug, Clone, PartialEq)]
pub struct PrivateRow {
    pub values: Vec<f64>,
    /// `None` when every entry is structurally zero.
    pub support: Option<f64>,
    /// Noise draw per entry; zero on masked entries.
    pub noise: Vec<f64>,
}

/// Privatizes one row. Masked entries pass through; the others are shifted
/// by the support width, perturbed, and clipped at their supremum. Draws
/// one uniform per non-masked entry, left to right.
pub fn privatize_row<R: Rng + ?Sized>(
    row: &[f64],
    mask_row: &[bool],
    sup_row: &[f64],
    p: &PrivacyParams,
    rng: &mut R,
) -> Result<PrivateRow> {
    if row.len() != mask_row.len() || row.len() != sup_row.len() {
        return Err(Error::Dimension(format!(
            "row, mask, and supremum lengths differ: {}, {}, {}",
            row.len(),
            mask_row.len(),
            sup_row.len()
        )));
    }
    let n0 = mask_row.iter().filter(|&&z| !z).count();
    if n0 == 0 {
        return Ok(PrivateRow {
            values: row.to_vec(),
            support: None,
            noise: vec![0.0; row.len()],
        });
    }
    let dist = TruncLaplace::for_row(p, n0)?;
    let s = dist.support();
    let mut values = row.to_vec();
    let mut noise = vec![0.0; row.len()];
    for j in 0..row.len() {
        if mask_row[j] {
            continue;
        }
        let z = dist.sample(rng);
        noise[j] = z;
        // s + z >= 0 in floating point as well, so a + (s + z) >= a.
        values[j] = (row[j] + (s + z)).min(sup_row[j]);
    }
    Ok(PrivateRow {
        values,
        support: Some(s),
        noise,
    })
}

/// A privatized coefficient matrix with per-row mechanism metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct PrivatizedSystem {
    pub a_tilde: Matrix,
    /// Support half-width per row; `0.0` for fully masked rows, which are
    /// left untouched.
    pub row_supports: Vec<f64>,
    pub row_nonzero_counts: Vec<usize>,
    pub noise_log: Matrix,
    pub params: PrivacyParams,
    pub seed: u64,
}

impl PrivatizedSystem {
    /// The source system with `A` replaced by the private matrix.
    pub fn system(&self, source: &ConstraintSystem) -> Result<ConstraintSystem> {
        source.with_matrix(self.a_tilde.clone())
    }

    /// The problem document with the private matrix plus a `mechanism`
    /// block.
    pub fn to_json(&self, lp: &LinearProgram) -> Result<Value> {
        let private = LinearProgram::new(lp.c.clone(), self.system(&lp.system)?)?;
        let mut doc = problem_to_json(&private, Some(&self.params));
        doc["mechanism"] = serde_json::json!({
            "row_supports": self.row_supports,
            "sigma": self.params.sigma(),
            "seed": self.seed,
        });
        Ok(doc)
    }
}

/// Row generator for `seed`: one ChaCha stream per row index, so output is
/// independent of the order rows are processed in.
pub fn row_rng(seed: u64, row: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(row as u64);
    rng
}

/// Privatizes every row of `sys.a()` independently.
pub fn privatize_matrix(
    sys: &ConstraintSystem,
    p: &PrivacyParams,
    seed: u64,
) -> Result<PrivatizedSystem> {
    let a = sys.a();
    let rows: Vec<PrivateRow> = (0..sys.nrows())
        .into_par_iter()
        .map(|i| {
            privatize_row(
                a.row(i),
                sys.zero_mask().row(i),
                sys.sup_a().row(i),
                p,
                &mut row_rng(seed, i),
            )
        })
        .collect::<Result<_>>()?;

    let n = sys.ncols();
    let a_tilde = Matrix::from_fn(sys.nrows(), n, |i, j| rows[i].values[j]);
    let noise_log = Matrix::from_fn(sys.nrows(), n, |i, j| rows[i].noise[j]);
    Ok(PrivatizedSystem {
        a_tilde,
        row_supports: rows.iter().map(|r| r.support.unwrap_or(0.0)).collect(),
        row_nonzero_counts: (0..sys.nrows()).map(|i| sys.nonzero_count(i)).collect(),
        noise_log,
        params: *p,
        seed,
    })
}
