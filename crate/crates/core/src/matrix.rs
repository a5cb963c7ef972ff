//! Dense matrix kernels: sub-intensity validation, matrix exponential, and a
//! partial-pivot linear solver.  Everything here works on `ndarray::Array2<f64>`.

use ndarray::{Array1, Array2};
use thiserror::Error;

/// Relative tolerance used when checking sign and row-sum constraints.
const VALIDATE_TOL: f64 = 1e-12;

/// A pivot smaller than this fraction of the matrix scale is treated as zero.
const PIVOT_TOL: f64 = 1e-13;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum MatrixError {
    #[error("matrix is {rows}x{cols}, expected square")]
    NotSquare { rows: usize, cols: usize },
    #[error("dimension mismatch: left is {left}, right is {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("entry ({row},{col}) = {value} violates the sub-intensity sign pattern")]
    SignViolation { row: usize, col: usize, value: f64 },
    #[error("row {row} sums to {sum} > 0; rates out of a state cannot exceed rates in")]
    RowSumPositive { row: usize, sum: f64 },
    #[error("every row is conservative; the chain can never be absorbed")]
    AllRowsConservative,
    #[error("matrix is singular to working precision")]
    Singular,
    #[error("matrix contains a non-finite entry")]
    NonFinite,
    #[error("matrix exponential overflowed")]
    Overflow,
}

/// A validated sub-intensity matrix `T` together with its exit-rate vector
/// `t0 = -T * 1`.  Diagonal entries are non-positive, off-diagonal entries
/// non-negative, row sums non-positive, and at least one row sum is strictly
/// negative so the absorbing state is reachable.
#[derive(Debug, Clone, PartialEq)]
pub struct SubIntensity {
    t: Array2<f64>,
    exit: Array1<f64>,
}

impl SubIntensity {
    pub fn dim(&self) -> usize {
        self.t.nrows()
    }

    /// The sub-intensity matrix `T` itself.
    pub fn matrix(&self) -> &Array2<f64> {
        &self.t
    }

    /// Exit rates to the absorbing state, `t0 = -T * 1`.
    pub fn exit_rates(&self) -> &Array1<f64> {
        &self.exit
    }

    /// Build without requiring a reachable absorbing state.  Sign and row-sum
    /// constraints are still enforced; use this for conservative generators
    /// (e.g. a toy model with no death) that `validate_subintensity` rejects.
    pub fn from_raw(t: Array2<f64>) -> Result<Self, MatrixError> {
        build(t, false)
    }
}

/// Check the sub-intensity sign pattern and row sums, returning the validated
/// matrix with its exit-rate vector.
pub fn validate_subintensity(t: &Array2<f64>) -> Result<SubIntensity, MatrixError> {
    build(t.clone(), true)
}

fn build(t: Array2<f64>, require_exit: bool) -> Result<SubIntensity, MatrixError> {
    let (rows, cols) = t.dim();
    if rows != cols {
        return Err(MatrixError::NotSquare { rows, cols });
    }
    if t.iter().any(|v| !v.is_finite()) {
        return Err(MatrixError::NonFinite);
    }
    // Scale for the sign/row-sum tolerance: the largest absolute entry.
    let scale = t.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let tol = VALIDATE_TOL * scale.max(1.0);
    for ((i, j), &v) in t.indexed_iter() {
        let bad = if i == j { v > tol } else { v < -tol };
        if bad {
            return Err(MatrixError::SignViolation {
                row: i,
                col: j,
                value: v,
            });
        }
    }
    let mut exit = Array1::zeros(rows);
    let mut any_strict = false;
    for i in 0..rows {
        let sum: f64 = t.row(i).sum();
        if sum > tol {
            return Err(MatrixError::RowSumPositive { row: i, sum });
        }
        if sum < -tol {
            any_strict = true;
        }
        // Clamp tiny negative noise so exit rates are exactly non-negative.
        exit[i] = (-sum).max(0.0);
    }
    if require_exit && !any_strict {
        return Err(MatrixError::AllRowsConservative);
    }
    Ok(SubIntensity { t, exit })
}

// Degree-13 Pade approximant coefficients (numerator; the denominator uses the
// same coefficients with alternating signs).
const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

/// 1-norm bound below which the degree-13 approximant alone is accurate to
/// machine precision (Higham's theta_13).
const THETA13: f64 = 5.371920351148152;

/// Compute `exp(t * A)` by scaling and squaring with a degree-13 Pade
/// approximant.
pub fn expm(a: &Array2<f64>, t: f64) -> Result<Array2<f64>, MatrixError> {
    let (rows, cols) = a.dim();
    if rows != cols {
        return Err(MatrixError::NotSquare { rows, cols });
    }
    if !t.is_finite() || a.iter().any(|v| !v.is_finite()) {
        return Err(MatrixError::NonFinite);
    }
    let n = rows;
    if n == 0 {
        return Ok(Array2::zeros((0, 0)));
    }
    let mut b = a * t;
    if n == 1 {
        return Ok(Array2::from_elem((1, 1), b[[0, 0]].exp()));
    }
    // 1-norm: maximum absolute column sum.
    let norm1 = (0..n)
        .map(|j| b.column(j).iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0_f64, f64::max);
    if norm1 == 0.0 {
        return Ok(Array2::eye(n));
    }
    let squarings = if norm1 > THETA13 {
        (norm1 / THETA13).log2().ceil() as u32
    } else {
        0
    };
    if squarings > 0 {
        b /= 2f64.powi(squarings as i32);
    }

    let eye: Array2<f64> = Array2::eye(n);
    let b2 = b.dot(&b);
    let b4 = b2.dot(&b2);
    let b6 = b4.dot(&b2);

    let u_inner = b6.dot(&(&b6 * PADE13[13] + &b4 * PADE13[11] + &b2 * PADE13[9]))
        + &b6 * PADE13[7]
        + &b4 * PADE13[5]
        + &b2 * PADE13[3]
        + &eye * PADE13[1];
    let u = b.dot(&u_inner);
    let v = b6.dot(&(&b6 * PADE13[12] + &b4 * PADE13[10] + &b2 * PADE13[8]))
        + &b6 * PADE13[6]
        + &b4 * PADE13[4]
        + &b2 * PADE13[2]
        + &eye * PADE13[0];

    // exp(B) = (V - U)^-1 (V + U)
    let mut result = solve(&(&v - &u), &(&v + &u))?;
    for _ in 0..squarings {
        result = result.dot(&result);
    }
    if result.iter().any(|v| !v.is_finite()) {
        return Err(MatrixError::Overflow);
    }
    Ok(result)
}

/// Solve `A X = B` for a dense square `A` by LU decomposition with partial
/// pivoting.  `B` may have any number of columns.
pub fn solve(a: &Array2<f64>, b: &Array2<f64>) -> Result<Array2<f64>, MatrixError> {
    let (rows, cols) = a.dim();
    if rows != cols {
        return Err(MatrixError::NotSquare { rows, cols });
    }
    if b.nrows() != rows {
        return Err(MatrixError::DimensionMismatch {
            left: rows,
            right: b.nrows(),
        });
    }
    if a.iter().any(|v| !v.is_finite()) || b.iter().any(|v| !v.is_finite()) {
        return Err(MatrixError::NonFinite);
    }
    let n = rows;
    let mut lu = a.clone();
    let mut x = b.clone();
    let scale = a.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let pivot_floor = PIVOT_TOL * scale.max(f64::MIN_POSITIVE);

    for col in 0..n {
        // Find the largest pivot in this column.
        let mut pivot_row = col;
        let mut pivot_val = lu[[col, col]].abs();
        for row in col + 1..n {
            let v = lu[[row, col]].abs();
            if v > pivot_val {
                pivot_val = v;
                pivot_row = row;
            }
        }
        if pivot_val < pivot_floor {
            return Err(MatrixError::Singular);
        }
        if pivot_row != col {
            for j in 0..n {
                lu.swap([col, j], [pivot_row, j]);
            }
            for j in 0..x.ncols() {
                x.swap([col, j], [pivot_row, j]);
            }
        }
        let inv_pivot = 1.0 / lu[[col, col]];
        for row in col + 1..n {
            let factor = lu[[row, col]] * inv_pivot;
            if factor == 0.0 {
                continue;
            }
            lu[[row, col]] = factor;
            for j in col + 1..n {
                lu[[row, j]] -= factor * lu[[col, j]];
            }
            for j in 0..x.ncols() {
                x[[row, j]] -= factor * x[[col, j]];
            }
        }
    }
    // Back substitution.
    for col in (0..n).rev() {
        let inv_pivot = 1.0 / lu[[col, col]];
        for j in 0..x.ncols() {
            x[[col, j]] *= inv_pivot;
        }
        for row in 0..col {
            let factor = lu[[row, col]];
            if factor == 0.0 {
                continue;
            }
            for j in 0..x.ncols() {
                x[[row, j]] -= factor * x[[col, j]];
            }
        }
    }
    Ok(x)
}

/// Solve `A x = b` for a single right-hand side.
pub fn solve_vec(a: &Array2<f64>, b: &Array1<f64>) -> Result<Array1<f64>, MatrixError> {
    let col = b
        .clone()
        .into_shape_with_order((b.len(), 1))
        .expect("vector reshapes to a column");
    let x = solve(a, &col)?;
    Ok(x.column(0).to_owned())
}
