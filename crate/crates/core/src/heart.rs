//! The Stanford heart transplant model: two stages (disease, post-transplant)
//! of `n` aging phases each, with covariate-driven death rates, plus the
//! start/stop/event data ingest and the four likelihood contributions.
//!
//! Death rates follow `q1_i = a + b + q * i^e` before transplant and
//! `q2_i = a + q * i^e` after, with the exponent
//! `e = p + g1*age + g2*year + g3*surgery`.  `lambda0` moves a patient to the
//! next aging phase, `lambda1` is the transplant rate (phase-preserving).

use crate::counting::{count_prob_zero, CountError};
use crate::matrix::{expm, MatrixError};
use crate::stage::{StageError, StageModel};
use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};
use std::path::Path;
use thiserror::Error;

/// Days per month and per year used for the table horizons (Julian calendar
/// average: 365.25-day years).
pub const DAYS_PER_MONTH: f64 = 365.25 / 12.0;
pub const DAYS_PER_YEAR: f64 = 365.25;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum HeartError {
    #[error("model has {got} stages; the disease/transplant formulas need exactly 2")]
    WrongStageCount { got: usize },
    #[error("parameter {name} = {value} is outside its domain")]
    BadParameter { name: &'static str, value: f64 },
    #[error("patient {id}: likelihood contribution is zero or not finite")]
    NonPositiveLikelihood { id: u32 },
    #[error("no patients provided")]
    NoPatients,
    #[error(transparent)]
    Stage(#[from] StageError),
    #[error(transparent)]
    Matrix(#[from] MatrixError),
    #[error(transparent)]
    Count(#[from] CountError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeartParams {
    pub a: f64,
    pub b: f64,
    pub q: f64,
    pub p: f64,
    pub lambda0: f64,
    pub lambda1: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    pub gamma3: f64,
}

/// Order used whenever the parameters travel as a flat vector.
pub const PARAM_NAMES: [&str; 9] = [
    "a", "b", "q", "p", "lambda0", "lambda1", "gamma1", "gamma2", "gamma3",
];

impl HeartParams {
    /// Reference estimates for the bundled Stanford data (n = 3 phases,
    /// time in days, age centered at 48).
    pub fn reference() -> Self {
        HeartParams {
            a: 4.9e-4,
            b: 0.0034,
            q: 6.4e-8,
            p: 9.3,
            lambda0: 0.50,
            lambda1: 0.0115,
            gamma1: 0.098,
            gamma2: -0.02,
            gamma3: -0.92,
        }
    }

    pub fn to_array(self) -> [f64; 9] {
        [
            self.a,
            self.b,
            self.q,
            self.p,
            self.lambda0,
            self.lambda1,
            self.gamma1,
            self.gamma2,
            self.gamma3,
        ]
    }

    pub fn from_array(v: [f64; 9]) -> Self {
        HeartParams {
            a: v[0],
            b: v[1],
            q: v[2],
            p: v[3],
            lambda0: v[4],
            lambda1: v[5],
            gamma1: v[6],
            gamma2: v[7],
            gamma3: v[8],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Covariates {
    pub age: f64,
    pub year: f64,
    pub surgery: f64,
}

/// How raw covariates map into the rate exponent.  The reference estimates
/// were calibrated with age centered at 48 years; `AsIs` uses file values
/// untouched.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum CovariateScale {
    AsIs,
    AgeCentered(f64),
}

impl CovariateScale {
    pub fn apply(&self, cov: &Covariates) -> Covariates {
        match *self {
            CovariateScale::AsIs => *cov,
            CovariateScale::AgeCentered(offset) => Covariates {
                age: cov.age - offset,
                ..*cov
            },
        }
    }
}

/// Which intensity vector plays the death density in `f10`: the stage-1 death
/// rates alone, or the whole row-sum deficit of `T_1` (which also contains the
/// transplant rate and therefore counts transplants as deaths).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DeathExit {
    StageDeath,
    TotalExit,
}

/// Build the two-stage generator for one patient's (already scaled)
/// covariates.  Time unit: days.
pub fn build_generator(
    params: &HeartParams,
    cov: &Covariates,
    n: usize,
) -> Result<StageModel, HeartError> {
    for (name, value) in [
        ("a", params.a),
        ("b", params.b),
        ("q", params.q),
        ("lambda0", params.lambda0),
        ("lambda1", params.lambda1),
    ] {
        if !value.is_finite() || value < 0.0 {
            return Err(HeartError::BadParameter { name, value });
        }
    }
    for (name, value) in [
        ("p", params.p),
        ("gamma1", params.gamma1),
        ("gamma2", params.gamma2),
        ("gamma3", params.gamma3),
    ] {
        if !value.is_finite() {
            return Err(HeartError::BadParameter { name, value });
        }
    }
    if n == 0 {
        return Err(HeartError::BadParameter {
            name: "n",
            value: 0.0,
        });
    }
    let e = params.p + params.gamma1 * cov.age + params.gamma2 * cov.year
        + params.gamma3 * cov.surgery;
    let dim = 2 * n;
    let mut t = Array2::zeros((dim, dim));
    for i in 0..n {
        let phase = (i + 1) as f64;
        let q1 = params.a + params.b + params.q * phase.powf(e);
        let q2 = params.a + params.q * phase.powf(e);
        if !q1.is_finite() || !q2.is_finite() {
            return Err(HeartError::BadParameter {
                name: "p",
                value: e,
            });
        }
        let lambda0 = if i + 1 < n { params.lambda0 } else { 0.0 };
        // Disease stage.
        t[[i, i]] = -(q1 + lambda0 + params.lambda1);
        if i + 1 < n {
            t[[i, i + 1]] = params.lambda0;
        }
        t[[i, n + i]] = params.lambda1;
        // Transplant stage.
        t[[n + i, n + i]] = -(q2 + lambda0);
        if i + 1 < n {
            t[[n + i, n + i + 1]] = params.lambda0;
        }
    }
    let mut alpha = Array1::zeros(dim);
    alpha[0] = 1.0;
    Ok(StageModel::new(
        2,
        n,
        &t,
        alpha,
        vec!["disease".into(), "transplant".into()],
        "day",
    )?)
}

fn two_stages(model: &StageModel) -> Result<usize, HeartError> {
    if model.stages() != 2 {
        return Err(HeartError::WrongStageCount {
            got: model.stages(),
        });
    }
    Ok(model.states_per_stage())
}

/// Still in the disease stage at `t` (censored, no transplant).
pub fn f1(model: &StageModel, t: f64) -> Result<f64, HeartError> {
    two_stages(model)?;
    Ok(count_prob_zero(model, 0, t)?)
}

/// Transplanted at `s` (density) and still alive at `t`.
pub fn f12(model: &StageModel, s: f64, t: f64) -> Result<f64, HeartError> {
    let n = two_stages(model)?;
    let alpha = model.conditioned_alpha(0, 0.0)?;
    let t1 = model.block(0, 0)?.to_owned();
    let t12 = model.block(0, 1)?.to_owned();
    let t2 = model.block(1, 1)?.to_owned();
    let row = alpha.dot(&expm(&t1, s)?);
    let tail = expm(&t2, t - s)?.dot(&Array1::ones(n));
    Ok(row.dot(&t12.dot(&tail)))
}

/// Died in the disease stage at `t` (density).
pub fn f10(model: &StageModel, t: f64, death_exit: DeathExit) -> Result<f64, HeartError> {
    two_stages(model)?;
    let alpha = model.conditioned_alpha(0, 0.0)?;
    let t1 = model.block(0, 0)?.to_owned();
    let row = alpha.dot(&expm(&t1, t)?);
    let intensity = match death_exit {
        DeathExit::StageDeath => model.exit_to_death(0)?.to_owned(),
        DeathExit::TotalExit => {
            // -T_1 1: the full departure intensity of the disease block.
            let mut v = Array1::zeros(t1.nrows());
            for i in 0..t1.nrows() {
                v[i] = -t1.row(i).sum();
            }
            v
        }
    };
    Ok(row.dot(&intensity))
}

/// Transplanted at `s` and died at `t` (density in both arguments).
pub fn f20(model: &StageModel, s: f64, t: f64) -> Result<f64, HeartError> {
    two_stages(model)?;
    let alpha = model.conditioned_alpha(0, 0.0)?;
    let t1 = model.block(0, 0)?.to_owned();
    let t12 = model.block(0, 1)?.to_owned();
    let t2 = model.block(1, 1)?.to_owned();
    let row = alpha.dot(&expm(&t1, s)?);
    let exit2 = model.exit_to_death(1)?.to_owned();
    let tail = expm(&t2, t - s)?.dot(&exit2);
    Ok(row.dot(&t12.dot(&tail)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PatientRecord {
    pub id: u32,
    pub covariates: Covariates,
    /// Days from acceptance to transplant, if transplanted.
    pub transplant: Option<f64>,
    /// Days from acceptance to death or censoring.
    pub end: f64,
    pub died: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    CensoredNoTransplant,
    CensoredAfterTransplant,
    DiedNoTransplant,
    DiedAfterTransplant,
}

impl PatientRecord {
    pub fn scenario(&self) -> Scenario {
        match (self.transplant.is_some(), self.died) {
            (false, false) => Scenario::CensoredNoTransplant,
            (true, false) => Scenario::CensoredAfterTransplant,
            (false, true) => Scenario::DiedNoTransplant,
            (true, true) => Scenario::DiedAfterTransplant,
        }
    }
}

/// Counts per scenario, in the order censored/transplant-censored/
/// died-untransplanted/died-transplanted.
pub fn scenario_counts(patients: &[PatientRecord]) -> [usize; 4] {
    let mut counts = [0usize; 4];
    for p in patients {
        let idx = match p.scenario() {
            Scenario::CensoredNoTransplant => 0,
            Scenario::CensoredAfterTransplant => 1,
            Scenario::DiedNoTransplant => 2,
            Scenario::DiedAfterTransplant => 3,
        };
        counts[idx] += 1;
    }
    counts
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LikelihoodOptions {
    /// Aging phases per stage.
    pub n: usize,
    pub scale: CovariateScale,
    pub death_exit: DeathExit,
}

impl Default for LikelihoodOptions {
    fn default() -> Self {
        LikelihoodOptions {
            n: 3,
            scale: CovariateScale::AgeCentered(48.0),
            death_exit: DeathExit::StageDeath,
        }
    }
}

/// Log-likelihood of the parameters over all patients.
pub fn log_likelihood(
    params: &HeartParams,
    patients: &[PatientRecord],
    opts: &LikelihoodOptions,
) -> Result<f64, HeartError> {
    if patients.is_empty() {
        return Err(HeartError::NoPatients);
    }
    let mut total = 0.0;
    for patient in patients {
        let cov = opts.scale.apply(&patient.covariates);
        let model = build_generator(params, &cov, opts.n)?;
        let value = match patient.scenario() {
            Scenario::CensoredNoTransplant => f1(&model, patient.end)?,
            Scenario::CensoredAfterTransplant => {
                f12(&model, patient.transplant.unwrap(), patient.end)?
            }
            Scenario::DiedNoTransplant => f10(&model, patient.end, opts.death_exit)?,
            Scenario::DiedAfterTransplant => {
                f20(&model, patient.transplant.unwrap(), patient.end)?
            }
        };
        if !(value.is_finite() && value > 0.0) {
            return Err(HeartError::NonPositiveLikelihood { id: patient.id });
        }
        total += value.ln();
    }
    Ok(total)
}

/// `-2 (l_restricted - l_full)`.
pub fn likelihood_ratio(full: f64, restricted: f64) -> f64 {
    2.0 * (full - restricted)
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum IngestError {
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
    #[error("line {line}: {message}")]
    MalformedRow { line: usize, message: String },
    #[error("patient {id}: {message}")]
    InconsistentPair { id: u32, message: String },
    #[error("patient {id}: interval endpoints do not advance")]
    NonmonotoneInterval { id: u32 },
}

const EXPECTED_HEADER: &str = "id,start,stop,event,transplant,age,year,surgery";

struct RawRow {
    line: usize,
    id: u32,
    start: f64,
    stop: f64,
    event: u8,
    transplant: u8,
    age: f64,
    year: f64,
    surgery: u8,
}

/// Load the start/stop/event counting-process file.  Each patient appears as
/// one row (never transplanted) or two rows (pre- and post-transplant, split
/// at the transplant day).
pub fn load_patients(path: &Path) -> Result<Vec<PatientRecord>, IngestError> {
    let text = std::fs::read_to_string(path).map_err(|e| IngestError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    parse_patients(&text)
}

pub fn parse_patients(text: &str) -> Result<Vec<PatientRecord>, IngestError> {
    let mut lines = text.lines().enumerate();
    let header = lines.next().ok_or(IngestError::MalformedRow {
        line: 1,
        message: "empty file".into(),
    })?;
    if header.1.trim() != EXPECTED_HEADER {
        return Err(IngestError::MalformedRow {
            line: 1,
            message: format!("header must be `{EXPECTED_HEADER}`"),
        });
    }

    let mut rows: Vec<RawRow> = Vec::new();
    for (index, raw_line) in lines {
        let line = index + 1;
        let trimmed = raw_line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let fields: Vec<&str> = trimmed.split(',').collect();
        if fields.len() != 8 {
            return Err(IngestError::MalformedRow {
                line,
                message: format!("expected 8 fields, found {}", fields.len()),
            });
        }
        let parse_f = |idx: usize, name: &str| -> Result<f64, IngestError> {
            fields[idx].trim().parse::<f64>().map_err(|_| {
                IngestError::MalformedRow {
                    line,
                    message: format!("{name} `{}` is not numeric", fields[idx]),
                }
            })
        };
        let parse_flag = |idx: usize, name: &str| -> Result<u8, IngestError> {
            match fields[idx].trim() {
                "0" => Ok(0),
                "1" => Ok(1),
                other => Err(IngestError::MalformedRow {
                    line,
                    message: format!("{name} `{other}` must be 0 or 1"),
                }),
            }
        };
        rows.push(RawRow {
            line,
            id: fields[0].trim().parse().map_err(|_| IngestError::MalformedRow {
                line,
                message: format!("id `{}` is not an integer", fields[0]),
            })?,
            start: parse_f(1, "start")?,
            stop: parse_f(2, "stop")?,
            event: parse_flag(3, "event")?,
            transplant: parse_flag(4, "transplant")?,
            age: parse_f(5, "age")?,
            year: parse_f(6, "year")?,
            surgery: parse_flag(7, "surgery")?,
        });
    }

    // Group rows by id, keeping first-appearance order.
    let mut groups: Vec<(u32, Vec<RawRow>)> = Vec::new();
    for row in rows {
        match groups.iter_mut().find(|(id, _)| *id == row.id) {
            Some((_, g)) => g.push(row),
            None => groups.push((row.id, vec![row])),
        }
    }

    let mut patients = Vec::with_capacity(groups.len());
    for (id, mut group) in groups {
        group.sort_by(|a, b| a.start.total_cmp(&b.start));
        let record = match group.len() {
            1 => {
                let r = &group[0];
                if r.transplant != 0 {
                    return Err(IngestError::InconsistentPair {
                        id,
                        message: "single row flagged as post-transplant".into(),
                    });
                }
                if r.start != 0.0 || r.stop <= r.start {
                    return Err(IngestError::NonmonotoneInterval { id });
                }
                PatientRecord {
                    id,
                    covariates: Covariates {
                        age: r.age,
                        year: r.year,
                        surgery: r.surgery as f64,
                    },
                    transplant: None,
                    end: r.stop,
                    died: r.event == 1,
                }
            }
            2 => {
                let (pre, post) = (&group[0], &group[1]);
                if pre.transplant != 0 || post.transplant != 1 {
                    return Err(IngestError::InconsistentPair {
                        id,
                        message: "two rows must be pre- then post-transplant".into(),
                    });
                }
                if pre.event != 0 {
                    return Err(IngestError::InconsistentPair {
                        id,
                        message: "pre-transplant row cannot end in death".into(),
                    });
                }
                if (pre.age, pre.year, pre.surgery) != (post.age, post.year, post.surgery) {
                    return Err(IngestError::InconsistentPair {
                        id,
                        message: "covariates differ between rows".into(),
                    });
                }
                if pre.start != 0.0
                    || pre.stop <= pre.start
                    || post.start != pre.stop
                    || post.stop <= post.start
                {
                    return Err(IngestError::NonmonotoneInterval { id });
                }
                PatientRecord {
                    id,
                    covariates: Covariates {
                        age: pre.age,
                        year: pre.year,
                        surgery: pre.surgery as f64,
                    },
                    transplant: Some(pre.stop),
                    end: post.stop,
                    died: post.event == 1,
                }
            }
            _ => {
                return Err(IngestError::InconsistentPair {
                    id,
                    message: format!("{} rows (line {})", group.len(), group[0].line),
                })
            }
        };
        patients.push(record);
    }
    Ok(patients)
}

/// Covariate combinations (age, acceptance year, prior surgery) used by the
/// summary tables.
pub const TABLE_COMBOS: [(f64, f64, f64); 8] = [
    (30.0, 3.0, 0.0),
    (30.0, 3.0, 1.0),
    (30.0, 5.0, 0.0),
    (30.0, 5.0, 1.0),
    (50.0, 3.0, 0.0),
    (50.0, 3.0, 1.0),
    (50.0, 5.0, 0.0),
    (50.0, 5.0, 1.0),
];

/// Table horizons in months (converted to days internally).
pub const TABLE_HORIZONS_MONTHS: [f64; 5] = [1.0, 3.0, 6.0, 12.0, 36.0];

/// Ages for the expected-sojourn table (year 3, no prior surgery).
pub const SOJOURN_AGES: [f64; 4] = [30.0, 40.0, 50.0, 60.0];

/// Summary tables for one parameter vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeartTables {
    /// `count[c][l][h]`: P(N = l by horizon h) for covariate combo c, where N
    /// counts transplant and death events.
    pub count: [[[f64; 5]; 3]; 8],
    /// `sojourn[a][h]`: expected days spent in the disease stage by horizon h
    /// for age `SOJOURN_AGES[a]`.
    pub sojourn: [[f64; 5]; 4],
    /// `single[r][h]` for age 30: rows disease->transplant, disease->death,
    /// disease->transplant->death.
    pub single: [[f64; 5]; 3],
}

/// Compute all three summary tables.
pub fn heart_tables(
    params: &HeartParams,
    opts: &LikelihoodOptions,
) -> Result<HeartTables, HeartError> {
    use crate::counting::{count_distribution, count_prob_between, CountOptions};
    use crate::stage::Destination;

    let horizons: Vec<f64> = TABLE_HORIZONS_MONTHS
        .iter()
        .map(|m| m * DAYS_PER_MONTH)
        .collect();
    let count_opts = CountOptions::default();

    let mut count = [[[0.0; 5]; 3]; 8];
    for (c, &(age, year, surgery)) in TABLE_COMBOS.iter().enumerate() {
        let cov = opts.scale.apply(&Covariates { age, year, surgery });
        let model = build_generator(params, &cov, opts.n)?;
        let dist = count_distribution(&model, 0, &horizons, 2, &count_opts)?;
        for l in 0..3 {
            for h in 0..5 {
                count[c][l][h] = dist.prob(h, l);
            }
        }
    }

    let mut sojourn = [[0.0; 5]; 4];
    for (a, &age) in SOJOURN_AGES.iter().enumerate() {
        let cov = opts.scale.apply(&Covariates {
            age,
            year: 3.0,
            surgery: 0.0,
        });
        let model = build_generator(params, &cov, opts.n)?;
        for (h, &t) in horizons.iter().enumerate() {
            sojourn[a][h] = model.expected_sojourn(0, 0.0, t)?;
        }
    }

    let mut single = [[0.0; 5]; 3];
    let cov = opts.scale.apply(&Covariates {
        age: 30.0,
        year: 3.0,
        surgery: 0.0,
    });
    let model = build_generator(params, &cov, opts.n)?;
    let dist = count_distribution(&model, 0, &horizons, 2, &count_opts)?;
    for (h, &t) in horizons.iter().enumerate() {
        single[0][h] = count_prob_between(&model, 0, Destination::Stage(1), t, &count_opts)?;
        single[1][h] = count_prob_between(&model, 0, Destination::Death, t, &count_opts)?;
        single[2][h] = dist.prob(h, 2);
    }

    Ok(HeartTables {
        count,
        sojourn,
        single,
    })
}
