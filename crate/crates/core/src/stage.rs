//! The staged model: `k` observable stages, each containing `n` latent phases,
//! over a single absorbing death state.  States are numbered stage-major, so
//! stage `i` (0-based) occupies rows/columns `i*n .. (i+1)*n` of the full
//! sub-intensity matrix.

use crate::matrix::{expm, solve, validate_subintensity, MatrixError, SubIntensity};
use crate::phase::{check_initial_vector, PhaseError};
use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Stage-occupancy probabilities below this are treated as "cannot happen"
/// when conditioning.
const MASS_FLOOR: f64 = 1e-300;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum StageError {
    #[error("stage index {index} out of range; model has {stages} stages")]
    StageIndexOutOfRange { index: usize, stages: usize },
    #[error("stage {stage} has probability zero at time {at}; cannot condition on it")]
    ZeroProbabilityStage { stage: usize, at: f64 },
    #[error("matrix is {got}x{got}, expected {expected}x{expected} for {stages} stages of {states} states")]
    DimensionMismatch {
        expected: usize,
        got: usize,
        stages: usize,
        states: usize,
    },
    #[error("expected {expected} stage labels, got {got}")]
    BadLabels { expected: usize, got: usize },
    #[error("stage count and state count must both be at least 1")]
    EmptyModel,
    #[error("time argument {value} is negative")]
    NegativeTime { value: f64 },
    #[error("model document is not valid JSON: {0}")]
    Json(String),
    #[error(transparent)]
    InitialVector(#[from] PhaseError),
    #[error(transparent)]
    Matrix(#[from] MatrixError),
}

/// Where a stage transition can end up: another observable stage, or death.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Destination {
    Stage(usize),
    Death,
}

#[derive(Debug, Clone)]
pub struct StageModel {
    stages: usize,
    states_per_stage: usize,
    full: SubIntensity,
    alpha: Array1<f64>,
    stage_labels: Vec<String>,
    time_unit: String,
}

/// Serialized form of a [`StageModel`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelDocument {
    pub k: usize,
    pub n: usize,
    pub alpha: Vec<f64>,
    #[serde(rename = "T")]
    pub t: Vec<Vec<f64>>,
    pub stage_labels: Vec<String>,
    pub time_unit: String,
}

impl StageModel {
    /// Validate and build.  `t` must be a `(k*n) x (k*n)` sub-intensity matrix
    /// with a reachable absorbing state.
    pub fn new(
        stages: usize,
        states_per_stage: usize,
        t: &Array2<f64>,
        alpha: Array1<f64>,
        stage_labels: Vec<String>,
        time_unit: impl Into<String>,
    ) -> Result<Self, StageError> {
        let expected = stages * states_per_stage;
        if t.nrows() != expected || t.ncols() != expected {
            return Err(StageError::DimensionMismatch {
                expected,
                got: t.nrows(),
                stages,
                states: states_per_stage,
            });
        }
        let full = validate_subintensity(t)?;
        Self::from_parts(stages, states_per_stage, full, alpha, stage_labels, time_unit)
    }

    /// Build from an already-validated sub-intensity matrix.  Accepts
    /// conservative generators built with [`SubIntensity::from_raw`], which is
    /// useful for deathless toy models.
    pub fn from_parts(
        stages: usize,
        states_per_stage: usize,
        full: SubIntensity,
        alpha: Array1<f64>,
        stage_labels: Vec<String>,
        time_unit: impl Into<String>,
    ) -> Result<Self, StageError> {
        if stages == 0 || states_per_stage == 0 {
            return Err(StageError::EmptyModel);
        }
        let expected = stages * states_per_stage;
        if full.dim() != expected {
            return Err(StageError::DimensionMismatch {
                expected,
                got: full.dim(),
                stages,
                states: states_per_stage,
            });
        }
        if stage_labels.len() != stages {
            return Err(StageError::BadLabels {
                expected: stages,
                got: stage_labels.len(),
            });
        }
        check_initial_vector(&alpha, expected)?;
        Ok(StageModel {
            stages,
            states_per_stage,
            full,
            alpha,
            stage_labels,
            time_unit: time_unit.into(),
        })
    }

    pub fn stages(&self) -> usize {
        self.stages
    }

    pub fn states_per_stage(&self) -> usize {
        self.states_per_stage
    }

    pub fn alpha(&self) -> &Array1<f64> {
        &self.alpha
    }

    pub fn full(&self) -> &SubIntensity {
        &self.full
    }

    pub fn stage_labels(&self) -> &[String] {
        &self.stage_labels
    }

    pub fn time_unit(&self) -> &str {
        &self.time_unit
    }

    /// Resolve a stage label (or 1-based stage number as a fallback) to a
    /// 0-based index.
    pub fn stage_by_label(&self, label: &str) -> Option<usize> {
        if let Some(i) = self.stage_labels.iter().position(|l| l == label) {
            return Some(i);
        }
        label
            .parse::<usize>()
            .ok()
            .filter(|&i| i >= 1 && i <= self.stages)
            .map(|i| i - 1)
    }

    fn check_stage(&self, index: usize) -> Result<(), StageError> {
        if index >= self.stages {
            return Err(StageError::StageIndexOutOfRange {
                index,
                stages: self.stages,
            });
        }
        Ok(())
    }

    fn stage_range(&self, i: usize) -> std::ops::Range<usize> {
        i * self.states_per_stage..(i + 1) * self.states_per_stage
    }

    /// The `n x n` rate block from stage `i` to stage `j` (both 0-based).
    pub fn block(&self, i: usize, j: usize) -> Result<ArrayView2<'_, f64>, StageError> {
        self.check_stage(i)?;
        self.check_stage(j)?;
        let r = self.stage_range(i);
        let c = self.stage_range(j);
        Ok(self.full.matrix().slice(s![r, c]))
    }

    /// Death rates out of stage `i`: the exit-rate vector restricted to that
    /// stage's states.
    pub fn exit_to_death(&self, i: usize) -> Result<ArrayView1<'_, f64>, StageError> {
        self.check_stage(i)?;
        let r = self.stage_range(i);
        Ok(self.full.exit_rates().slice(s![r]))
    }

    /// Distribution over all transient states at time `u`, starting from
    /// `alpha`: the row vector `alpha exp(uT)`.
    pub fn state_distribution(&self, u: f64) -> Result<Array1<f64>, StageError> {
        if u < 0.0 {
            return Err(StageError::NegativeTime { value: u });
        }
        if u == 0.0 {
            return Ok(self.alpha.clone());
        }
        let e = expm(self.full.matrix(), u)?;
        Ok(self.alpha.dot(&e))
    }

    /// Initial vector over stage `i`'s phases conditioned on occupying stage
    /// `i` at time `u`.
    pub fn conditioned_alpha(&self, i: usize, u: f64) -> Result<Array1<f64>, StageError> {
        self.check_stage(i)?;
        let w = self.state_distribution(u)?;
        let slice = w.slice(s![self.stage_range(i)]);
        let mass: f64 = slice.sum();
        if mass < MASS_FLOOR {
            return Err(StageError::ZeroProbabilityStage { stage: i, at: u });
        }
        Ok(slice.to_owned() / mass)
    }

    /// Expected time spent in stage `i` during `[u, u+t]`, conditional on
    /// occupying stage `i` at time `u` and counting only the sojourn until the
    /// first departure from the stage:
    /// `alpha_hat T_i^{-1} (exp(t T_i) - I) 1`.
    pub fn expected_sojourn(&self, i: usize, u: f64, t: f64) -> Result<f64, StageError> {
        if t < 0.0 {
            return Err(StageError::NegativeTime { value: t });
        }
        let alpha_hat = self.conditioned_alpha(i, u)?;
        let ti = self.block(i, i)?.to_owned();
        let n = self.states_per_stage;
        let grown = expm(&ti, t)? - Array2::<f64>::eye(n);
        // T_i^{-1} (e^{tT_i} - I) is the integral of the sub-stochastic
        // semigroup, entrywise non-negative.
        let integral = solve(&ti, &grown).map_err(MatrixError::from)?;
        Ok(alpha_hat.dot(&integral).sum())
    }

    /// Probability of occupying `to` at time `u+t` conditional on occupying
    /// stage `from` at time `u`.  `Destination::Death` gives the probability
    /// of having died by `u+t`.
    pub fn stage_transition_prob(
        &self,
        from: usize,
        to: Destination,
        u: f64,
        t: f64,
    ) -> Result<f64, StageError> {
        self.check_stage(from)?;
        if let Destination::Stage(j) = to {
            self.check_stage(j)?;
        }
        if t < 0.0 {
            return Err(StageError::NegativeTime { value: t });
        }
        let w = self.state_distribution(u)?;
        let from_slice = w.slice(s![self.stage_range(from)]);
        let mass: f64 = from_slice.sum();
        if mass < MASS_FLOOR {
            return Err(StageError::ZeroProbabilityStage {
                stage: from,
                at: u,
            });
        }
        // Embed the conditioned stage occupancy into the full state space and
        // propagate it forward by t.
        let mut row = Array1::zeros(self.full.dim());
        row.slice_mut(s![self.stage_range(from)]).assign(&from_slice);
        let propagated = if t == 0.0 {
            row
        } else {
            row.dot(&expm(self.full.matrix(), t)?)
        };
        let prob = match to {
            Destination::Stage(j) => propagated.slice(s![self.stage_range(j)]).sum() / mass,
            // Whatever mass is no longer among the transient states has died.
            Destination::Death => 1.0 - propagated.sum() / mass,
        };
        Ok(prob.clamp(0.0, 1.0))
    }

    pub fn to_document(&self) -> ModelDocument {
        let t = self
            .full
            .matrix()
            .rows()
            .into_iter()
            .map(|r| r.to_vec())
            .collect();
        ModelDocument {
            k: self.stages,
            n: self.states_per_stage,
            alpha: self.alpha.to_vec(),
            t,
            stage_labels: self.stage_labels.clone(),
            time_unit: self.time_unit.clone(),
        }
    }

    pub fn from_document(doc: &ModelDocument) -> Result<Self, StageError> {
        let dim = doc.k * doc.n;
        if doc.t.len() != dim || doc.t.iter().any(|row| row.len() != dim) {
            return Err(StageError::DimensionMismatch {
                expected: dim,
                got: doc.t.len(),
                stages: doc.k,
                states: doc.n,
            });
        }
        let mut t = Array2::zeros((dim, dim));
        for (i, row) in doc.t.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                t[[i, j]] = v;
            }
        }
        StageModel::new(
            doc.k,
            doc.n,
            &t,
            Array1::from_vec(doc.alpha.clone()),
            doc.stage_labels.clone(),
            doc.time_unit.clone(),
        )
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(&self.to_document()).expect("model serializes")
    }

    pub fn from_json_str(json: &str) -> Result<Self, StageError> {
        let doc: ModelDocument =
            serde_json::from_str(json).map_err(|e| StageError::Json(e.to_string()))?;
        Self::from_document(&doc)
    }
}
