//! Problem data: the constraint system `A x <= b`, its public bound set, the
//! linear objective, and the privacy parameters.
//!
//! The bound set of admissible constraint matrices is represented by its
//! entrywise supremum `sup_A` together with the public zero pattern. That is
//! the only functional of the bound set the mechanism and the accuracy bound
//! consume.

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::lp;
use crate::matrix::{norm2, BoolMatrix, Matrix};

/// Privacy level `(epsilon, delta)` under the adjacency bound `k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPrivacy")]
pub struct PrivacyParams {
    pub epsilon: f64,
    pub delta: f64,
    pub k: f64,
}

#[derive(Deserialize)]
struct RawPrivacy {
    epsilon: f64,
    delta: f64,
    k: f64,
}

impl TryFrom<RawPrivacy> for PrivacyParams {
    type Error = Error;

    fn try_from(raw: RawPrivacy) -> Result<Self> {
        PrivacyParams::new(raw.epsilon, raw.delta, raw.k)
    }
}

impl PrivacyParams {
    /// `delta` must lie strictly inside `(0, 1/2)`: zero makes the noise
    /// support infinite.
    pub fn new(epsilon: f64, delta: f64, k: f64) -> Result<Self> {
        if !(epsilon.is_finite() && epsilon > 0.0) {
            return Err(Error::InvalidPrivacy(format!(
                "epsilon must be > 0, got {epsilon}"
            )));
        }
        if !(delta > 0.0 && delta < 0.5) {
            return Err(Error::InvalidPrivacy(format!(
                "delta must lie in (0, 1/2), got {delta}"
            )));
        }
        if !(k.is_finite() && k > 0.0) {
            return Err(Error::InvalidPrivacy(format!("k must be > 0, got {k}")));
        }
        Ok(Self { epsilon, delta, k })
    }

    /// Laplace scale `k / epsilon`.
    pub fn sigma(&self) -> f64 {
        self.k / self.epsilon
    }
}

/// Constraint data `A x <= b` plus the public information about `A`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConstraintSystem {
    #[serde(rename = "A")]
    a: Matrix,
    b: Vec<f64>,
    zero_mask: BoolMatrix,
    sup_a: Matrix,
}

impl ConstraintSystem {
    /// Checks shapes and the zero pattern. Supremum entries on structurally
    /// zero positions are forced to zero, since such entries are zero in
    /// every admissible matrix.
    pub fn new(a: Matrix, b: Vec<f64>, zero_mask: BoolMatrix, mut sup_a: Matrix) -> Result<Self> {
        let (m, n) = a.shape();
        if b.len() != m {
            return Err(Error::Dimension(format!(
                "A has {m} rows but b has length {}",
                b.len()
            )));
        }
        if sup_a.shape() != (m, n) {
            return Err(Error::Dimension(format!(
                "sup_A is {:?} but A is {:?}",
                sup_a.shape(),
                (m, n)
            )));
        }
        if zero_mask.shape() != (m, n) {
            return Err(Error::Dimension(format!(
                "zero_mask is {:?} but A is {:?}",
                zero_mask.shape(),
                (m, n)
            )));
        }
        for ((i, j), &masked) in zero_mask.iter_indexed() {
            if masked {
                if a[(i, j)] != 0.0 {
                    return Err(Error::MaskViolation {
                        row: i,
                        col: j,
                        value: a[(i, j)],
                    });
                }
                sup_a[(i, j)] = 0.0;
            }
        }
        Ok(Self {
            a,
            b,
            zero_mask,
            sup_a,
        })
    }

    /// Infers the zero pattern from the zero entries of `a`.
    pub fn with_inferred_mask(a: Matrix, b: Vec<f64>, sup_a: Matrix) -> Result<Self> {
        let mask = a.map(|&v| v == 0.0);
        Self::new(a, b, mask, sup_a)
    }

    pub fn a(&self) -> &Matrix {
        &self.a
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    pub fn zero_mask(&self) -> &BoolMatrix {
        &self.zero_mask
    }

    pub fn sup_a(&self) -> &Matrix {
        &self.sup_a
    }

    pub fn nrows(&self) -> usize {
        self.a.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.a.ncols()
    }

    /// Number of privatizable (non-masked) entries in row `i`.
    pub fn nonzero_count(&self, i: usize) -> usize {
        self.zero_mask.row(i).iter().filter(|&&z| !z).count()
    }

    /// Same bounds and pattern with a different coefficient matrix.
    pub fn with_matrix(&self, a: Matrix) -> Result<Self> {
        Self::new(
            a,
            self.b.clone(),
            self.zero_mask.clone(),
            self.sup_a.clone(),
        )
    }

    /// The system with every coefficient at its supremum. Its feasible
    /// region is the intersection of the regions of all admissible matrices.
    pub fn worst_case(&self) -> Self {
        Self {
            a: self.sup_a.clone(),
            ..self.clone()
        }
    }
}

/// `maximize c . x  s.t.  A x <= b, x >= 0`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinearProgram {
    pub c: Vec<f64>,
    #[serde(flatten)]
    pub system: ConstraintSystem,
}

impl LinearProgram {
    pub fn new(c: Vec<f64>, system: ConstraintSystem) -> Result<Self> {
        if c.len() != system.ncols() {
            return Err(Error::Dimension(format!(
                "c has length {} but A has {} columns",
                c.len(),
                system.ncols()
            )));
        }
        Ok(Self { c, system })
    }

    /// Lipschitz constant of the linear objective in the Euclidean norm.
    pub fn lipschitz(&self) -> f64 {
        norm2(&self.c)
    }
}

/// A problem that passed [`validate`], with a witness point of the
/// worst-case region.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidatedProblem {
    lp: LinearProgram,
    witness: Vec<f64>,
}

impl ValidatedProblem {
    pub fn lp(&self) -> &LinearProgram {
        &self.lp
    }

    pub fn system(&self) -> &ConstraintSystem {
        &self.lp.system
    }

    /// A point with `x >= 0` and `sup_A x <= b`.
    pub fn witness(&self) -> &[f64] {
        &self.witness
    }

    pub fn into_inner(self) -> LinearProgram {
        self.lp
    }
}

/// Checks membership `A <= sup_A`, finiteness of `sup_A`, and that the
/// worst-case region `{x >= 0 : sup_A x <= b}` is nonempty.
pub fn validate(p: &LinearProgram) -> Result<ValidatedProblem> {
    let sys = &p.system;
    for ((i, j), &sup) in sys.sup_a.iter_indexed() {
        if !sup.is_finite() {
            return Err(Error::UnboundedSupremum { row: i, col: j });
        }
        let value = sys.a[(i, j)];
        if value > sup {
            return Err(Error::Membership {
                row: i,
                col: j,
                value,
                sup,
            });
        }
    }
    let witness = lp::phase1_feasible(&sys.worst_case()).ok_or(Error::WorstCaseInfeasible)?;
    Ok(ValidatedProblem {
        lp: p.clone(),
        witness,
    })
}

/// Parses a problem document, ignoring any privacy block.
pub fn load_problem(text: &str) -> Result<LinearProgram> {
    load_problem_with_privacy(text).map(|(lp, _)| lp)
}

/// Parses a problem document:
///
/// ```json
/// { "c": [..], "A": [[..]], "b": [..], "sup_A": [[..]],
///   "zero_mask": [[..]], "privacy": {"epsilon": .., "delta": .., "k": ..} }
/// ```
///
/// `zero_mask` and `privacy` are optional. A missing mask is inferred from
/// the zero entries of `A`.
pub fn load_problem_with_privacy(text: &str) -> Result<(LinearProgram, Option<PrivacyParams>)> {
    let value: Value = serde_json::from_str(text).map_err(|e| Error::Parse {
        field: "<document>".into(),
        message: e.to_string(),
    })?;
    let obj = value.as_object().ok_or_else(|| Error::Parse {
        field: "<document>".into(),
        message: "expected a JSON object".into(),
    })?;

    let c: Vec<f64> = required(obj, "c")?;
    let a = matrix_field(obj, "A")?;
    let b: Vec<f64> = required(obj, "b")?;
    let sup_a = matrix_field(obj, "sup_A")?;
    let mask: Option<Vec<Vec<bool>>> = optional(obj, "zero_mask")?;
    let privacy: Option<PrivacyParams> = optional(obj, "privacy")?;

    let system = match mask {
        Some(rows) => {
            let mask = Matrix::from_rows(rows)
                .ok_or_else(|| Error::Dimension("zero_mask has rows of differing length".into()))?;
            ConstraintSystem::new(a, b, mask, sup_a)?
        }
        None => ConstraintSystem::with_inferred_mask(a, b, sup_a)?,
    };
    Ok((LinearProgram::new(c, system)?, privacy))
}

fn required<T: serde::de::DeserializeOwned>(obj: &Map<String, Value>, field: &str) -> Result<T> {
    optional(obj, field)?.ok_or_else(|| Error::Parse {
        field: field.into(),
        message: "missing".into(),
    })
}

fn optional<T: serde::de::DeserializeOwned>(
    obj: &Map<String, Value>,
    field: &str,
) -> Result<Option<T>> {
    match obj.get(field) {
        None | Some(Value::Null) => Ok(None),
        Some(v) => T::deserialize(v).map(Some).map_err(|e| Error::Parse {
            field: field.into(),
            message: e.to_string(),
        }),
    }
}

fn matrix_field(obj: &Map<String, Value>, field: &str) -> Result<Matrix> {
    let rows: Vec<Vec<f64>> = required(obj, field)?;
    Matrix::from_rows(rows)
        .ok_or_else(|| Error::Dimension(format!("{field} has rows of differing length")))
}

/// Serializes a problem back into the document schema.
pub fn problem_to_json(lp: &LinearProgram, privacy: Option<&PrivacyParams>) -> Value {
    let sys = &lp.system;
    let mut obj = Map::new();
    obj.insert("c".into(), serde_json::json!(lp.c));
    obj.insert("A".into(), serde_json::json!(sys.a));
    obj.insert("b".into(), serde_json::json!(sys.b));
    obj.insert("sup_A".into(), serde_json::json!(sys.sup_a));
    obj.insert("zero_mask".into(), serde_json::json!(sys.zero_mask));
    if let Some(p) = privacy {
        obj.insert("privacy".into(), serde_json::json!(p));
    }
    Value::Object(obj)
}
