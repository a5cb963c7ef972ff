//! Maximum-likelihood calibration for the heart model: a Nelder-Mead simplex
//! over box-transformed coordinates, quasi-random multi-start, restricted
//! fits with pinned parameters, and a nonparametric bootstrap over patients.

use crate::heart::{
    log_likelihood, HeartError, HeartParams, LikelihoodOptions, PatientRecord,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum FitError {
    #[error("no free parameters to optimize")]
    NothingFree,
    #[error("configuration: {0}")]
    BadConfig(&'static str),
    #[error("{failed} of {total} bootstrap replicates failed to converge")]
    TooManyFailures { failed: usize, total: usize },
    #[error(transparent)]
    Heart(#[from] HeartError),
}

/// Box constraint for one parameter.  `log` selects a log-scaled interior
/// parameterization, appropriate for rates spanning many decades.
#[derive(Debug, Clone, Copy)]
pub struct Bound {
    pub lo: f64,
    pub hi: f64,
    pub log: bool,
}

impl Bound {
    fn rate(lo: f64, hi: f64) -> Self {
        Bound { lo, hi, log: true }
    }

    fn linear(lo: f64, hi: f64) -> Self {
        Bound { lo, hi, log: false }
    }

    /// Unconstrained coordinate -> box interior.
    pub fn decode(&self, z: f64) -> f64 {
        let u = sigmoid(z);
        if self.log {
            (self.lo.ln() + (self.hi.ln() - self.lo.ln()) * u).exp()
        } else {
            self.lo + (self.hi - self.lo) * u
        }
    }

    /// Box interior -> unconstrained coordinate (clamped slightly inside).
    pub fn encode(&self, x: f64) -> f64 {
        let u = if self.log {
            (x.ln() - self.lo.ln()) / (self.hi.ln() - self.lo.ln())
        } else {
            (x - self.lo) / (self.hi - self.lo)
        };
        logit(u.clamp(1e-12, 1.0 - 1e-12))
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn logit(u: f64) -> f64 {
    (u / (1.0 - u)).ln()
}

/// Search box for the nine heart parameters, in flat-vector order.
pub fn heart_bounds() -> [Bound; 9] {
    [
        Bound::rate(1e-12, 1.0),  // a
        Bound::rate(1e-12, 1.0),  // b
        Bound::rate(1e-12, 1.0),  // q
        Bound::linear(0.0, 20.0), // p
        Bound::rate(1e-12, 5.0),  // lambda0
        Bound::rate(1e-12, 5.0),  // lambda1
        Bound::linear(-5.0, 5.0), // gamma1
        Bound::linear(-5.0, 5.0), // gamma2
        Bound::linear(-5.0, 5.0), // gamma3
    ]
}

#[derive(Debug, Clone, Copy)]
pub struct NmOptions {
    pub max_evals: usize,
    /// Absolute spread tolerance on the simplex values, scaled by 1 + |best|.
    pub ftol: f64,
    /// Sup-norm tolerance on the simplex diameter in internal coordinates.
    pub xtol: f64,
    /// Initial simplex displacement per coordinate.
    pub step: f64,
}

impl Default for NmOptions {
    fn default() -> Self {
        NmOptions {
            max_evals: 6000,
            ftol: 1e-10,
            xtol: 1e-7,
            step: 0.4,
        }
    }
}

#[derive(Debug, Clone)]
pub struct NmResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub evals: usize,
    pub converged: bool,
}

/// Downhill-simplex minimization of `f` from `x0`.  Unconstrained; pair with
/// [`Bound::decode`] inside the objective for box problems.
pub fn nelder_mead<F: FnMut(&[f64]) -> f64>(
    mut f: F,
    x0: &[f64],
    opts: &NmOptions,
) -> NmResult {
    let dim = x0.len();
    let mut evals = 0usize;
    let mut eval = |x: &[f64], evals: &mut usize| -> f64 {
        *evals += 1;
        let v = f(x);
        if v.is_finite() {
            v
        } else {
            PENALTY
        }
    };

    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(dim + 1);
    simplex.push(x0.to_vec());
    for i in 0..dim {
        let mut v = x0.to_vec();
        v[i] += opts.step;
        simplex.push(v);
    }
    let mut values: Vec<f64> = simplex
        .iter()
        .map(|v| eval(v, &mut evals))
        .collect();

    let (rho, chi, gamma, sigma) = (1.0, 2.0, 0.5, 0.5);
    let mut converged = false;
    while evals < opts.max_evals {
        // Order best..worst.
        let mut order: Vec<usize> = (0..=dim).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        let best = order[0];
        let worst = order[dim];
        let second_worst = order[dim - 1];

        let spread = values[worst] - values[best];
        let mut diameter: f64 = 0.0;
        for i in 0..=dim {
            for j in 0..dim {
                diameter = diameter.max((simplex[i][j] - simplex[best][j]).abs());
            }
        }
        if spread <= opts.ftol * (1.0 + values[best].abs()) && diameter <= opts.xtol {
            converged = true;
            break;
        }

        // Centroid of all but the worst vertex.
        let mut centroid = vec![0.0; dim];
        for (i, v) in simplex.iter().enumerate() {
            if i == worst {
                continue;
            }
            for j in 0..dim {
                centroid[j] += v[j];
            }
        }
        for c in centroid.iter_mut() {
            *c /= dim as f64;
        }

        let blend = |from: &[f64], coeff: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(from)
                .map(|(&c, &w)| c + coeff * (c - w))
                .collect()
        };

        let reflected = blend(&simplex[worst], rho);
        let f_r = eval(&reflected, &mut evals);
        if f_r < values[best] {
            let expanded = blend(&simplex[worst], rho * chi);
            let f_e = eval(&expanded, &mut evals);
            if f_e < f_r {
                simplex[worst] = expanded;
                values[worst] = f_e;
            } else {
                simplex[worst] = reflected;
                values[worst] = f_r;
            }
        } else if f_r < values[second_worst] {
            simplex[worst] = reflected;
            values[worst] = f_r;
        } else {
            let (point, f_c) = if f_r < values[worst] {
                let outside = blend(&simplex[worst], rho * gamma);
                let v = eval(&outside, &mut evals);
                (outside, v)
            } else {
                let inside = blend(&simplex[worst], -gamma);
                let v = eval(&inside, &mut evals);
                (inside, v)
            };
            if f_c < values[worst].min(f_r) {
                simplex[worst] = point;
                values[worst] = f_c;
            } else {
                // Shrink toward the best vertex.
                let anchor = simplex[best].clone();
                for i in 0..=dim {
                    if i == best {
                        continue;
                    }
                    for j in 0..dim {
                        simplex[i][j] = anchor[j] + sigma * (simplex[i][j] - anchor[j]);
                    }
                    values[i] = eval(&simplex[i].clone(), &mut evals);
                }
            }
        }
    }

    let mut best = 0;
    for i in 1..values.len() {
        if values[i] < values[best] {
            best = i;
        }
    }
    NmResult {
        x: simplex[best].clone(),
        value: values[best],
        evals,
        converged,
    }
}

const PENALTY: f64 = 1e12;

/// Halton low-discrepancy point `index` in `dim` dimensions, shifted by a
/// seeded Cranley-Patterson rotation so different seeds explore differently.
fn halton_point(index: usize, shift: &[f64]) -> Vec<f64> {
    const PRIMES: [usize; 9] = [2, 3, 5, 7, 11, 13, 17, 19, 23];
    shift
        .iter()
        .enumerate()
        .map(|(d, &s)| {
            let mut u = 0.0;
            let base = PRIMES[d % PRIMES.len()] as f64;
            let mut f = 1.0 / base;
            let mut i = index + 1;
            while i > 0 {
                u += f * (i % PRIMES[d % PRIMES.len()]) as f64;
                i /= PRIMES[d % PRIMES.len()];
                f /= base;
            }
            let v: f64 = u + s;
            v.fract()
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct FitConfig {
    /// Number of quasi-random starts (in addition to any warm start).
    pub starts: usize,
    pub seed: u64,
    pub nm: NmOptions,
    pub likelihood: LikelihoodOptions,
    /// `(index, value)` pairs pinning parameters out of the optimization.
    pub frozen: Vec<(usize, f64)>,
    /// Optional initial guess treated as an extra start.
    pub warm: Option<HeartParams>,
    /// Restarted-simplex polish rounds applied to the leading candidates.
    /// Nelder-Mead simplexes collapse near flat ridges; restarting with a
    /// fresh, smaller simplex at the incumbent routinely buys a few more
    /// digits and occasionally escapes a premature stall.
    pub polish_rounds: usize,
    /// How many of the best start results get the polish treatment.
    pub polish_top: usize,
}

impl FitConfig {
    pub fn new(likelihood: LikelihoodOptions) -> Self {
        FitConfig {
            starts: 32,
            seed: 0x9e3779b97f4a7c15,
            nm: NmOptions::default(),
            likelihood,
            frozen: Vec::new(),
            warm: None,
            polish_rounds: 4,
            polish_top: 3,
        }
    }
}

#[derive(Debug, Clone)]
pub struct FitResult {
    pub params: HeartParams,
    pub loglik: f64,
    pub converged: bool,
    /// Objective evaluations summed over every start.
    pub evals: usize,
    pub starts: usize,
}

fn free_indices(frozen: &[(usize, f64)]) -> Result<Vec<usize>, FitError> {
    for &(idx, _) in frozen {
        if idx >= 9 {
            return Err(FitError::BadConfig("frozen index out of range"));
        }
    }
    let free: Vec<usize> = (0..9)
        .filter(|i| !frozen.iter().any(|&(idx, _)| idx == *i))
        .collect();
    if free.is_empty() {
        return Err(FitError::NothingFree);
    }
    Ok(free)
}

fn assemble(free: &[usize], frozen: &[(usize, f64)], z: &[f64], bounds: &[Bound; 9]) -> [f64; 9] {
    let mut theta = [0.0; 9];
    for &(idx, value) in frozen {
        theta[idx] = value;
    }
    for (slot, &idx) in free.iter().enumerate() {
        theta[idx] = bounds[idx].decode(z[slot]);
    }
    theta
}

/// Maximize the heart log-likelihood by multi-start Nelder-Mead.
pub fn fit(patients: &[PatientRecord], config: &FitConfig) -> Result<FitResult, FitError> {
    if patients.is_empty() {
        return Err(FitError::Heart(HeartError::NoPatients));
    }
    if config.starts == 0 && config.warm.is_none() {
        return Err(FitError::BadConfig("no starts requested"));
    }
    let bounds = heart_bounds();
    let free = free_indices(&config.frozen)?;

    let mut starts: Vec<Vec<f64>> = Vec::new();
    if let Some(warm) = config.warm {
        let theta = warm.to_array();
        starts.push(free.iter().map(|&i| bounds[i].encode(theta[i])).collect());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let shift: Vec<f64> = (0..free.len()).map(|_| rng.gen::<f64>()).collect();
    for s in 0..config.starts {
        let u = halton_point(s, &shift);
        starts.push(u.iter().map(|&ui| logit(ui.clamp(1e-9, 1.0 - 1e-9))).collect());
    }

    let make_objective = || {
        |z: &[f64]| -> f64 {
            let theta = assemble(&free, &config.frozen, z, &bounds);
            match log_likelihood(
                &HeartParams::from_array(theta),
                patients,
                &config.likelihood,
            ) {
                Ok(ll) => -ll,
                Err(_) => PENALTY,
            }
        }
    };

    let runs: Vec<NmResult> = starts
        .par_iter()
        .map(|z0| nelder_mead(make_objective(), z0, &config.nm))
        .collect();
    let mut evals: usize = runs.iter().map(|r| r.evals).sum();

    let mut order: Vec<usize> = (0..runs.len()).collect();
    order.sort_by(|&a, &b| runs[a].value.total_cmp(&runs[b].value));
    order.truncate(config.polish_top.max(1).min(runs.len()));

    let polished: Vec<NmResult> = order
        .par_iter()
        .map(|&idx| {
            let mut current = runs[idx].clone();
            for round in 0..config.polish_rounds {
                let opts = NmOptions {
                    step: config.nm.step * 0.5f64.powi(round as i32 + 1),
                    ..config.nm
                };
                let next = nelder_mead(make_objective(), &current.x, &opts);
                let gained = current.value - next.value;
                let keep = next.value < current.value;
                let evals_so_far = current.evals + next.evals;
                if keep {
                    current = next;
                }
                current.evals = evals_so_far;
                if gained < 1e-9 {
                    break;
                }
            }
            current
        })
        .collect();
    evals += polished
        .iter()
        .zip(order.iter())
        .map(|(p, &idx)| p.evals - runs[idx].evals)
        .sum::<usize>();

    let best = polished
        .iter()
        .min_by(|a, b| a.value.total_cmp(&b.value))
        .expect("at least one start");
    let theta = assemble(&free, &config.frozen, &best.x, &bounds);
    Ok(FitResult {
        params: HeartParams::from_array(theta),
        loglik: -best.value,
        converged: best.converged && best.value < PENALTY,
        evals,
        starts: starts.len(),
    })
}

/// Convenience wrapper: fit with the given parameters pinned.
pub fn fit_restricted(
    patients: &[PatientRecord],
    config: &FitConfig,
    frozen: &[(usize, f64)],
) -> Result<FitResult, FitError> {
    let mut cfg = config.clone();
    cfg.frozen = frozen.to_vec();
    fit(patients, &cfg)
}

#[derive(Debug, Clone)]
pub struct BootstrapConfig {
    pub replicates: usize,
    pub seed: u64,
    pub nm: NmOptions,
    pub likelihood: LikelihoodOptions,
    /// Random starts per replicate, in addition to the warm start at the
    /// full-data estimate.
    pub extra_starts: usize,
    /// Abort if more than this fraction of replicates fail.
    pub max_failure_rate: f64,
}

impl BootstrapConfig {
    pub fn new(likelihood: LikelihoodOptions) -> Self {
        BootstrapConfig {
            replicates: 200,
            seed: 0x5851f42d4c957f2d,
            nm: NmOptions {
                max_evals: 4000,
                ..NmOptions::default()
            },
            likelihood,
            extra_starts: 1,
            max_failure_rate: 0.10,
        }
    }
}

#[derive(Debug, Clone)]
pub struct BootstrapResult {
    /// Parameter estimates from each replicate that converged.
    pub estimates: Vec<HeartParams>,
    /// Sample standard deviation (ddof = 1) per parameter.
    pub std: [f64; 9],
    /// Empirical 2.5%/97.5% interval per parameter.
    pub ci95: [(f64, f64); 9],
    pub failed: usize,
}

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e3779b97f4a7c15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Nonparametric bootstrap: resample patients with replacement, refit each
/// replicate (warm start at `center` plus `extra_starts` random starts), and
/// summarize the spread of the estimates.  Deterministic for a fixed seed
/// regardless of thread count.
pub fn bootstrap(
    patients: &[PatientRecord],
    center: &HeartParams,
    config: &BootstrapConfig,
) -> Result<BootstrapResult, FitError> {
    if patients.is_empty() {
        return Err(FitError::Heart(HeartError::NoPatients));
    }
    if config.replicates < 2 {
        return Err(FitError::BadConfig("need at least 2 replicates"));
    }
    let results: Vec<Option<HeartParams>> = (0..config.replicates)
        .into_par_iter()
        .map(|r| {
            let mut rng =
                ChaCha8Rng::seed_from_u64(splitmix(config.seed ^ (r as u64)));
            let sample: Vec<PatientRecord> = (0..patients.len())
                .map(|_| patients[rng.gen_range(0..patients.len())])
                .collect();
            let cfg = FitConfig {
                starts: config.extra_starts,
                seed: splitmix(config.seed.wrapping_add(0xd1b54a32d192ed03) ^ (r as u64)),
                nm: config.nm,
                likelihood: config.likelihood,
                frozen: Vec::new(),
                warm: Some(*center),
                polish_rounds: 1,
                polish_top: 1,
            };
            match fit(&sample, &cfg) {
                Ok(res) if res.converged => Some(res.params),
                _ => None,
            }
        })
        .collect();

    let estimates: Vec<HeartParams> = results.iter().flatten().copied().collect();
    let failed = config.replicates - estimates.len();
    if (failed as f64) > config.max_failure_rate * (config.replicates as f64) {
        return Err(FitError::TooManyFailures {
            failed,
            total: config.replicates,
        });
    }

    let m = estimates.len();
    let mut std = [0.0; 9];
    let mut ci95 = [(0.0, 0.0); 9];
    for j in 0..9 {
        let col: Vec<f64> = estimates.iter().map(|p| p.to_array()[j]).collect();
        let mean = col.iter().sum::<f64>() / m as f64;
        let var = col.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (m - 1) as f64;
        std[j] = var.sqrt();
        let mut sorted = col;
        sorted.sort_by(f64::total_cmp);
        ci95[j] = (percentile(&sorted, 0.025), percentile(&sorted, 0.975));
    }
    Ok(BootstrapResult {
        estimates,
        std,
        ci95,
        failed,
    })
}

/// Linear-interpolation percentile of an already sorted slice.
fn percentile(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let pos = q * (n - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let w = pos - lo as f64;
    sorted[lo] * (1.0 - w) + sorted[hi] * w
}
