//! Phase-type distributions: the absorption time of a finite-state CTMC with
//! initial vector `alpha` and sub-intensity matrix `T`.  No atom at zero is
//! allowed, i.e. `alpha` sums to one over the transient states.

use crate::matrix::{expm, solve_vec, MatrixError, SubIntensity};
use ndarray::{Array1, Array2};
use rand::Rng;
use thiserror::Error;

const ALPHA_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum PhaseError {
    #[error("initial vector has length {got}, matrix dimension is {expected}")]
    InitialVectorLength { expected: usize, got: usize },
    #[error("initial vector entry {index} = {value} is negative")]
    InitialVectorNegative { index: usize, value: f64 },
    #[error("initial vector sums to {sum}, expected 1")]
    InitialVectorSum { sum: f64 },
    #[error("time argument {value} is negative")]
    NegativeTime { value: f64 },
    #[error("Laplace argument {value} is negative")]
    NegativeLaplaceArgument { value: f64 },
    #[error(transparent)]
    Matrix(#[from] MatrixError),
}

/// A phase-type distribution `PH(alpha, T)`.
#[derive(Debug, Clone)]
pub struct PhaseType {
    alpha: Array1<f64>,
    sub: SubIntensity,
}

impl PhaseType {
    pub fn new(alpha: Array1<f64>, sub: SubIntensity) -> Result<Self, PhaseError> {
        check_initial_vector(&alpha, sub.dim())?;
        Ok(PhaseType { alpha, sub })
    }

    pub fn alpha(&self) -> &Array1<f64> {
        &self.alpha
    }

    pub fn sub_intensity(&self) -> &SubIntensity {
        &self.sub
    }

    /// `P[Y > y] = alpha exp(yT) 1`.
    pub fn survival(&self, y: f64) -> Result<f64, PhaseError> {
        if y < 0.0 {
            return Err(PhaseError::NegativeTime { value: y });
        }
        let e = expm(self.sub.matrix(), y)?;
        Ok(self.alpha.dot(&e).sum())
    }

    pub fn cdf(&self, y: f64) -> Result<f64, PhaseError> {
        Ok(1.0 - self.survival(y)?)
    }

    /// Density `alpha exp(yT) t0`.
    pub fn density(&self, y: f64) -> Result<f64, PhaseError> {
        if y < 0.0 {
            return Err(PhaseError::NegativeTime { value: y });
        }
        let e = expm(self.sub.matrix(), y)?;
        Ok(self.alpha.dot(&e).dot(self.sub.exit_rates()))
    }

    /// `E[Y^k] = k! alpha (-T)^{-k} 1`, computed by repeated linear solves.
    pub fn moment(&self, k: u32) -> Result<f64, PhaseError> {
        if k == 0 {
            return Ok(1.0);
        }
        let neg_t = -self.sub.matrix();
        let mut v = Array1::ones(self.sub.dim());
        let mut factorial = 1.0;
        for i in 1..=k {
            v = solve_vec(&neg_t, &v)?;
            factorial *= i as f64;
        }
        Ok(factorial * self.alpha.dot(&v))
    }

    /// Laplace transform `E[e^{-sY}] = alpha (sI - T)^{-1} t0` for `s >= 0`.
    pub fn laplace(&self, s: f64) -> Result<f64, PhaseError> {
        if s < 0.0 {
            return Err(PhaseError::NegativeLaplaceArgument { value: s });
        }
        let n = self.sub.dim();
        let shifted = Array2::eye(n) * s - self.sub.matrix();
        let x = solve_vec(&shifted, &self.sub.exit_rates().to_owned())?;
        Ok(self.alpha.dot(&x))
    }

    /// Draw one absorption path: visited states, exponential holding times,
    /// and whether the chain was absorbed (a conservative sub-chain can trap
    /// it forever, in which case the final hold is infinite).
    pub fn sample<R: Rng>(&self, rng: &mut R) -> PathSample {
        sample_path(&self.sub, &self.alpha, f64::INFINITY, rng)
    }
}

pub(crate) fn check_initial_vector(alpha: &Array1<f64>, dim: usize) -> Result<(), PhaseError> {
    if alpha.len() != dim {
        return Err(PhaseError::InitialVectorLength {
            expected: dim,
            got: alpha.len(),
        });
    }
    for (index, &value) in alpha.iter().enumerate() {
        if value < 0.0 {
            return Err(PhaseError::InitialVectorNegative { index, value });
        }
    }
    let sum = alpha.sum();
    if (sum - 1.0).abs() > ALPHA_TOL {
        return Err(PhaseError::InitialVectorSum { sum });
    }
    Ok(())
}

/// One simulated trajectory of the underlying chain.
#[derive(Debug, Clone)]
pub struct PathSample {
    /// States visited, in order; starts with the initial draw.
    pub states: Vec<usize>,
    /// Holding time in each visited state (same length as `states`).
    pub holds: Vec<f64>,
    /// Whether the path ended in the absorbing state.
    pub absorbed: bool,
}

impl PathSample {
    pub fn total_time(&self) -> f64 {
        self.holds.iter().sum()
    }
}

/// Simulate the chain from a categorical draw over `start_weights` until
/// absorption or until the cumulative time first exceeds `horizon`.  The
/// final holding time is the full exponential draw, so the path may overshoot
/// the horizon; callers that bin events by time should stop at the horizon.
pub fn sample_path<R: Rng>(
    sub: &SubIntensity,
    start_weights: &Array1<f64>,
    horizon: f64,
    rng: &mut R,
) -> PathSample {
    let t = sub.matrix();
    let exit = sub.exit_rates();
    let mut state = categorical(start_weights, rng);
    let mut states = vec![state];
    let mut holds = Vec::new();
    let mut elapsed = 0.0_f64;
    loop {
        let rate = -t[[state, state]];
        if rate <= 0.0 {
            // No way out of this state: the chain is stuck forever.
            holds.push(f64::INFINITY);
            return PathSample {
                states,
                holds,
                absorbed: false,
            };
        }
        let hold = -rng.gen::<f64>().max(f64::MIN_POSITIVE).ln() / rate;
        holds.push(hold);
        elapsed += hold;
        if elapsed > horizon {
            return PathSample {
                states,
                holds,
                absorbed: false,
            };
        }
        // Jump: absorbing with probability exit/rate, otherwise proportional
        // to the off-diagonal row entries.
        let mut u = rng.gen::<f64>() * rate;
        u -= exit[state];
        if u < 0.0 {
            return PathSample {
                states,
                holds,
                absorbed: true,
            };
        }
        let mut next = state;
        let n = t.nrows();
        for j in 0..n {
            if j == state {
                continue;
            }
            u -= t[[state, j]];
            if u < 0.0 {
                next = j;
                break;
            }
        }
        // Rounding can leave u barely positive after the loop; fall back to
        // the last positive-rate column.
        if next == state {
            next = (0..n)
                .rev()
                .find(|&j| j != state && t[[state, j]] > 0.0)
                .unwrap_or(state);
        }
        state = next;
        states.push(state);
    }
}

fn categorical<R: Rng>(weights: &Array1<f64>, rng: &mut R) -> usize {
    let total: f64 = weights.sum();
    let mut u = rng.gen::<f64>() * total;
    for (i, &w) in weights.iter().enumerate() {
        u -= w;
        if u < 0.0 {
            return i;
        }
    }
    weights.len() - 1
}
