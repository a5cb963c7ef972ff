//! Monte Carlo simulation of the staged chain.  This is the independent
//! cross-check for the analytic count distribution, sojourn, and transition
//! formulas: it never touches the matrix exponential or the ODE integrator.
//!
//! Results are bit-for-bit reproducible for a given seed regardless of thread
//! count: paths are processed in fixed chunks, each path draws its own
//! counter-based RNG, and the per-chunk partial results are folded in chunk
//! order.

use crate::stage::{StageError, StageModel};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

const CHUNK: usize = 8192;

/// Standard error of a binomial frequency estimate.
pub fn binomial_se(p: f64, paths: usize) -> f64 {
    (p.clamp(0.0, 1.0) * (1.0 - p.clamp(0.0, 1.0)) / paths as f64).sqrt()
}

/// SplitMix64 scramble of (seed, index) into a per-path RNG seed.
fn path_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Empirical distribution of the transition count `N(t)` at each horizon,
/// plus stage occupancy.
#[derive(Debug, Clone, PartialEq)]
pub struct CountSimSummary {
    pub paths: usize,
    pub horizons: Vec<f64>,
    pub lmax: usize,
    /// Tally of paths with `N(horizon) = l`, indexed `[horizon][l]`;
    /// the last column (`lmax + 1`) collects all larger counts.
    tally: Array2<u64>,
    /// Tally of the occupied stage at each horizon: `k` stage columns then a
    /// death column.
    occupancy: Array2<u64>,
}

impl CountSimSummary {
    /// Empirical `P[N(t) = l]`; `l = lmax + 1` gives the overflow bucket.
    pub fn freq(&self, horizon_index: usize, l: usize) -> f64 {
        self.tally[[horizon_index, l]] as f64 / self.paths as f64
    }

    /// Empirical probability of occupying `stage` (use `stages()` for death).
    pub fn occupancy_freq(&self, horizon_index: usize, stage: usize) -> f64 {
        self.occupancy[[horizon_index, stage]] as f64 / self.paths as f64
    }
}

/// Simulate `paths` trajectories from the stage-`start` conditioned initial
/// vector and tally `N(t)` at each horizon.  Horizons must be ascending.
pub fn simulate_counts(
    model: &StageModel,
    start: usize,
    horizons: &[f64],
    lmax: usize,
    paths: usize,
    seed: u64,
) -> Result<CountSimSummary, StageError> {
    let alpha = model.conditioned_alpha(start, 0.0)?;
    let n = model.states_per_stage();
    let k = model.stages();
    let n_h = horizons.len();
    let n_cols = lmax + 2;
    let chunks = paths.div_ceil(CHUNK);

    let partials: Vec<(Array2<u64>, Array2<u64>)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut tally = Array2::<u64>::zeros((n_h, n_cols));
            let mut occ = Array2::<u64>::zeros((n_h, k + 1));
            let t = model.full().matrix();
            let exit = model.full().exit_rates();
            let lo = c * CHUNK;
            let hi = ((c + 1) * CHUNK).min(paths);
            for idx in lo..hi {
                let mut rng = ChaCha8Rng::seed_from_u64(path_seed(seed, idx as u64));
                // Initial state: conditioned stage draw embedded at the
                // stage's offset.
                let mut state = start * n + draw(&alpha, &mut rng);
                let mut time = 0.0_f64;
                let mut jumps = 0usize;
                let mut h_ptr = 0usize;
                'path: loop {
                    let rate = -t[[state, state]];
                    let hold = if rate > 0.0 {
                        -rng.gen::<f64>().max(f64::MIN_POSITIVE).ln() / rate
                    } else {
                        f64::INFINITY
                    };
                    time += hold;
                    while h_ptr < n_h && horizons[h_ptr] < time {
                        tally[[h_ptr, jumps.min(lmax + 1)]] += 1;
                        occ[[h_ptr, state / n]] += 1;
                        h_ptr += 1;
                    }
                    if h_ptr == n_h {
                        break 'path;
                    }
                    // Resolve the jump at `time`.
                    match jump(t, exit, state, &mut rng) {
                        None => {
                            // Death: the count freezes one higher.
                            jumps += 1;
                            while h_ptr < n_h {
                                tally[[h_ptr, jumps.min(lmax + 1)]] += 1;
                                occ[[h_ptr, k]] += 1;
                                h_ptr += 1;
                            }
                            break 'path;
                        }
                        Some(next) => {
                            if next / n != state / n {
                                jumps += 1;
                            }
                            state = next;
                        }
                    }
                }
            }
            (tally, occ)
        })
        .collect();

    let mut tally = Array2::<u64>::zeros((n_h, n_cols));
    let mut occupancy = Array2::<u64>::zeros((n_h, k + 1));
    for (t_part, o_part) in partials {
        tally += &t_part;
        occupancy += &o_part;
    }
    Ok(CountSimSummary {
        paths,
        horizons: horizons.to_vec(),
        lmax,
        tally,
        occupancy,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SojournEstimate {
    pub mean: f64,
    /// Standard error of the mean.
    pub se: f64,
    /// Attempts that actually occupied the conditioning stage at time `u`.
    pub paths_used: usize,
}

/// Estimate the expected time spent in `stage` during `[u, u+t]` before first
/// leaving it, conditional on occupying `stage` at time `u`.  `paths` counts
/// attempts; with `u > 0` a rejection step discards paths found elsewhere.
pub fn simulate_sojourn(
    model: &StageModel,
    stage: usize,
    u: f64,
    t: f64,
    paths: usize,
    seed: u64,
) -> Result<SojournEstimate, StageError> {
    let n = model.states_per_stage();
    // Validates the stage index and that the stage is reachable at u.
    model.conditioned_alpha(stage, u)?;
    let full_alpha = model.alpha();
    let chunks = paths.div_ceil(CHUNK);

    let partials: Vec<(f64, f64, usize)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let t_mat = model.full().matrix();
            let exit = model.full().exit_rates();
            let mut sum = 0.0_f64;
            let mut sum_sq = 0.0_f64;
            let mut used = 0usize;
            let lo = c * CHUNK;
            let hi = ((c + 1) * CHUNK).min(paths);
            for idx in lo..hi {
                let mut rng = ChaCha8Rng::seed_from_u64(path_seed(seed, idx as u64));
                // Walk to time u from the unconditioned start.
                let mut state = draw(full_alpha, &mut rng);
                let mut dead = false;
                let mut carry = 0.0_f64; // unexpired part of the straddling hold
                if u > 0.0 {
                    let mut elapsed = 0.0_f64;
                    loop {
                        let rate = -t_mat[[state, state]];
                        let hold = if rate > 0.0 {
                            -rng.gen::<f64>().max(f64::MIN_POSITIVE).ln() / rate
                        } else {
                            f64::INFINITY
                        };
                        if elapsed + hold > u {
                            carry = elapsed + hold - u;
                            break;
                        }
                        elapsed += hold;
                        match jump(t_mat, exit, state, &mut rng) {
                            Some(next) => state = next,
                            None => {
                                dead = true;
                                break;
                            }
                        }
                    }
                }
                if dead || state / n != stage {
                    continue; // not in the conditioning stage at u
                }
                used += 1;
                // Accumulate time within the stage until first departure.
                let mut remaining = t;
                let mut acc = 0.0_f64;
                let mut first = true;
                loop {
                    let hold = if first && u > 0.0 {
                        first = false;
                        carry
                    } else {
                        first = false;
                        let rate = -t_mat[[state, state]];
                        if rate > 0.0 {
                            -rng.gen::<f64>().max(f64::MIN_POSITIVE).ln() / rate
                        } else {
                            f64::INFINITY
                        }
                    };
                    if hold >= remaining {
                        acc += remaining;
                        break;
                    }
                    acc += hold;
                    remaining -= hold;
                    match jump(t_mat, exit, state, &mut rng) {
                        Some(next) if next / n == stage => state = next,
                        _ => break, // left the stage or died
                    }
                }
                sum += acc;
                sum_sq += acc * acc;
            }
            (sum, sum_sq, used)
        })
        .collect();

    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    let mut used = 0usize;
    for (s, s2, n_used) in partials {
        sum += s;
        sum_sq += s2;
        used += n_used;
    }
    if used == 0 {
        return Err(StageError::ZeroProbabilityStage { stage, at: u });
    }
    let mean = sum / used as f64;
    let var = (sum_sq / used as f64 - mean * mean).max(0.0);
    Ok(SojournEstimate {
        mean,
        se: (var / used as f64).sqrt(),
        paths_used: used,
    })
}

fn draw<R: Rng>(weights: &ndarray::Array1<f64>, rng: &mut R) -> usize {
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

/// One embedded-chain jump out of `state`; `None` means absorption.
fn jump<R: Rng>(
    t: &Array2<f64>,
    exit: &ndarray::Array1<f64>,
    state: usize,
    rng: &mut R,
) -> Option<usize> {
    let rate = -t[[state, state]];
    let mut u = rng.gen::<f64>() * rate - exit[state];
    if u < 0.0 {
        return None;
    }
    let dim = t.nrows();
    for j in 0..dim {
        if j == state {
            continue;
        }
        u -= t[[state, j]];
        if u < 0.0 {
            return Some(j);
        }
    }
    (0..dim)
        .rev()
        .find(|&j| j != state && t[[state, j]] > 0.0)
        .or(Some(state))
}
