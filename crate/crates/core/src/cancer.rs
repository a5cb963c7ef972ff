//! The six-stage cancer example: one recovery stage (R) plus cancer stages
//! 0..4, five aging states each.  Rates follow fixed families: within-stage
//! advance λ, recovery γ·0.1^l, back-steps β·0.1^l, forward progression
//! (l+1)(a+q·i^p), recovery relapse 0.1^l(a+q·i^p), and mortality
//! 0.1^{4−l}+a+q·i^p.  Time unit: months.

use crate::counting::{count_distribution, count_prob_between, CountError, CountOptions};
use crate::stage::{Destination, StageError, StageModel};
use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const STAGES: usize = 6;
pub const PHASES: usize = 5;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum CancerError {
    #[error("parameter {name} = {value} must be finite and nonnegative")]
    BadParameter { name: &'static str, value: f64 },
    #[error("input stage {got} out of range (0..{max})", max = STAGES - 1)]
    InputStageOutOfRange { got: usize },
    #[error(transparent)]
    Stage(#[from] StageError),
    #[error(transparent)]
    Count(#[from] CountError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CancerParams {
    pub lambda: f64,
    pub gamma: f64,
    pub beta: f64,
    pub a: f64,
    pub q: f64,
    pub p: f64,
}

impl Default for CancerParams {
    fn default() -> Self {
        CancerParams {
            lambda: 0.2,
            gamma: 0.1,
            beta: 0.2,
            a: 1e-3,
            q: 1e-6,
            p: 4.5,
        }
    }
}

/// Which range the forward-progression family spans.  `Standard` keeps the
/// printed l = 1..4 (cancer 0→1 through 3→4); `ShiftedDown` is the l = 0..3
/// alternative, which drops the 3→4 arc and doubles the relapse arc into
/// cancer 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ForwardRange {
    Standard,
    ShiftedDown,
}

/// Build the 30-state generator with all mass on the first state of
/// `input_stage` (0 = recovery, 1..=5 = cancer stages 0..4).
pub fn build_cancer_generator(
    params: &CancerParams,
    input_stage: usize,
    forward: ForwardRange,
) -> Result<StageModel, CancerError> {
    for (name, value) in [
        ("lambda", params.lambda),
        ("gamma", params.gamma),
        ("beta", params.beta),
        ("a", params.a),
        ("q", params.q),
        ("p", params.p),
    ] {
        if !value.is_finite() || value < 0.0 {
            return Err(CancerError::BadParameter { name, value });
        }
    }
    if input_stage >= STAGES {
        return Err(CancerError::InputStageOutOfRange { got: input_stage });
    }

    let dim = STAGES * PHASES;
    let mut rates = Array2::zeros((dim, dim));
    let mut death = Array1::zeros(dim);
    // Phase-dependent progression/mortality load, indexed by phase 1..=5.
    let load = |i: usize| params.a + params.q * (i as f64).powf(params.p);

    // Within-stage advance: states 1..29 skipping each stage's last phase
    // (1-based bookkeeping mirrors the rate-family definitions).
    for i in 1..dim {
        if i % PHASES != 0 {
            rates[[i - 1, i]] = params.lambda;
        }
    }
    // Recovery from every cancer stage straight back to R, phase kept.
    for i in 6..=10usize {
        for l in 0..=4usize {
            rates[[i + 5 * l - 1, i - 5 - 1]] = params.gamma * 0.1f64.powi(l as i32);
        }
    }
    // One stage back.
    for i in 11..=15usize {
        for l in 0..=3usize {
            rates[[i + 5 * l - 1, i + 5 * l - 5 - 1]] = params.beta * 0.1f64.powi(l as i32);
        }
    }
    // Forward progression between cancer stages.
    let forward_ls: &[usize] = match forward {
        ForwardRange::Standard => &[1, 2, 3, 4],
        ForwardRange::ShiftedDown => &[0, 1, 2, 3],
    };
    for i in 1..=5usize {
        for &l in forward_ls {
            let from = i + 5 * l - 1;
            let to = i + 5 * (l + 1) - 1;
            rates[[from, to]] += (l as f64 + 1.0) * load(i);
        }
    }
    // Relapse from recovery into each cancer stage.
    for i in 1..=5usize {
        for l in 0..=4usize {
            rates[[i - 1, i + 5 * (l + 1) - 1]] += 0.1f64.powi(l as i32) * load(i);
        }
    }
    // Mortality.
    for i in 1..=5usize {
        death[i - 1] = 0.1f64.powi(5) + load(i);
        for l in 0..=4usize {
            death[i + 5 * (l + 1) - 1] = 0.1f64.powi(4 - l as i32) + load(i);
        }
    }
    // Close the rows.
    let mut t = rates;
    for i in 0..dim {
        let off: f64 = t.row(i).sum();
        t[[i, i]] = -(off + death[i]);
    }

    let mut alpha = Array1::zeros(dim);
    alpha[input_stage * PHASES] = 1.0;
    let labels = vec![
        "R".to_string(),
        "0".to_string(),
        "1".to_string(),
        "2".to_string(),
        "3".to_string(),
        "4".to_string(),
    ];
    Ok(StageModel::new(STAGES, PHASES, &t, alpha, labels, "month")?)
}

/// Horizons (months) for the count and sojourn tables.
pub const TABLE_HORIZONS: [f64; 4] = [6.0, 12.0, 24.0, 36.0];
/// Waiting times (months) for the one-transition table.
pub const TRANSITION_HORIZONS: [f64; 2] = [6.0, 12.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CancerTables {
    /// `count[s][l][h]` = P[N(horizon h) = l] from cancer input stage s.
    pub count: [[[f64; 4]; 3]; 5],
    /// `sojourn[s][h]` = expected months continuously in the input stage.
    pub sojourn: [[f64; 4]; 5],
    /// `one_transition[s][w][d]`: single-transition probability to
    /// destination d (R, cancer 0..4, then death) within waiting time w.
    pub one_transition: [[[f64; 7]; 2]; 5],
}

/// Reproduce the three reference tables for cancer input stages 0..4.
pub fn cancer_tables(
    params: &CancerParams,
    forward: ForwardRange,
) -> Result<CancerTables, CancerError> {
    let opts = CountOptions::default();
    let mut out = CancerTables {
        count: [[[0.0; 4]; 3]; 5],
        sojourn: [[0.0; 4]; 5],
        one_transition: [[[0.0; 7]; 2]; 5],
    };
    for s in 0..5 {
        let stage = s + 1;
        let model = build_cancer_generator(params, stage, forward)?;
        let dist = count_distribution(&model, stage, &TABLE_HORIZONS, 2, &opts)?;
        for l in 0..3 {
            for h in 0..4 {
                out.count[s][l][h] = dist.prob(h, l);
            }
        }
        for h in 0..4 {
            out.sojourn[s][h] = model.expected_sojourn(stage, 0.0, TABLE_HORIZONS[h])?;
        }
        for (w, &t) in TRANSITION_HORIZONS.iter().enumerate() {
            for dest in 0..STAGES {
                out.one_transition[s][w][dest] = if dest == stage {
                    0.0
                } else {
                    count_prob_between(&model, stage, Destination::Stage(dest), t, &opts)?
                };
            }
            out.one_transition[s][w][STAGES] =
                count_prob_between(&model, stage, Destination::Death, t, &opts)?;
        }
    }
    Ok(out)
}
