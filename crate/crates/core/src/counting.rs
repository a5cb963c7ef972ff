//! Distribution of the number of stage transitions `N(t)`: death and moves
//! between stages count, moves between latent phases inside a stage do not.
//!
//! For a start stage `i`, every possible sequence of visited stages
//! `i -> i_1 -> ... -> i_l` (allowing a terminal death) contributes a matrix
//! function `x_{i_1..i_l}(t)` that solves a linear matrix ODE coupled to its
//! prefix: the empty sequence is the semigroup `exp(t T_i)`, and each
//! extension feeds on its parent through the corresponding rate block.
//! Summing `alpha_i x 1` over all sequences of length `l` gives `P[N(t) = l]`.
//! The sequences form a tree, and the whole tree is integrated as one stacked
//! ODE system with dense output at the requested horizons.

use crate::matrix::{expm, MatrixError};
use crate::ode::{integrate, OdeError, OdeOptions};
use crate::stage::{Destination, StageError, StageModel};
use ndarray::{Array2, ArrayView2};
use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum CountError {
    #[error("horizons must be non-empty, ascending, and non-negative")]
    BadHorizons,
    #[error("stage-sequence tree has {sequences} nodes, more than the cap of {cap}; raise the cap or set a pruning threshold")]
    SequenceExplosion { sequences: usize, cap: usize },
    #[error(transparent)]
    Stage(#[from] StageError),
    #[error(transparent)]
    Ode(#[from] OdeError),
    #[error(transparent)]
    Matrix(#[from] MatrixError),
}

#[derive(Debug, Clone)]
pub struct CountOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Hard limit on the number of stage sequences integrated at once.
    pub sequence_cap: usize,
    /// If set, subtrees whose total possible contribution (by an a-priori
    /// bound) stays below this are dropped; the sum of dropped bounds is
    /// reported on the result.
    pub prune_threshold: Option<f64>,
}

impl Default for CountOptions {
    fn default() -> Self {
        CountOptions {
            rtol: 1e-8,
            atol: 1e-10,
            sequence_cap: 100_000,
            prune_threshold: None,
        }
    }
}

/// `P[N(t) = l]` for each requested horizon and `l = 0..=lmax`.
#[derive(Debug, Clone)]
pub struct CountDistribution {
    pub start_stage: usize,
    pub horizons: Vec<f64>,
    pub lmax: usize,
    probs: Array2<f64>,
    /// Upper bound on probability mass lost to threshold pruning.
    pub pruned_mass_bound: f64,
}

impl CountDistribution {
    pub fn prob(&self, horizon_index: usize, l: usize) -> f64 {
        self.probs[[horizon_index, l]]
    }

    /// All count probabilities at one horizon, `l = 0..=lmax`.
    pub fn row(&self, horizon_index: usize) -> ndarray::ArrayView1<'_, f64> {
        self.probs.row(horizon_index)
    }

    /// `P[N(t) > lmax]`, by complement.
    pub fn tail(&self, horizon_index: usize) -> f64 {
        (1.0 - self.probs.row(horizon_index).sum()).max(0.0)
    }
}

/// `P[N(t) = 0]` starting from the stage-`i` conditioned initial vector:
/// `alpha_i exp(t T_i) 1`, evaluated by matrix exponential.
pub fn count_prob_zero(model: &StageModel, start: usize, t: f64) -> Result<f64, CountError> {
    if t < 0.0 {
        return Err(CountError::Stage(StageError::NegativeTime { value: t }));
    }
    let alpha = model.conditioned_alpha(start, 0.0)?;
    let ti = model.block(start, start)?.to_owned();
    let e = expm(&ti, t)?;
    Ok(alpha.dot(&e).sum().clamp(0.0, 1.0))
}

/// Distribution of `N(t)` over `l = 0..=lmax` at each horizon.
pub fn count_distribution(
    model: &StageModel,
    start: usize,
    horizons: &[f64],
    lmax: usize,
    opts: &CountOptions,
) -> Result<CountDistribution, CountError> {
    check_horizons(horizons)?;
    let alpha = model.conditioned_alpha(start, 0.0)?;
    let tree = build_tree(model, start, lmax, horizons[horizons.len() - 1], opts, None)?;
    let solutions = integrate_tree(&tree, horizons, opts)?;

    let n = model.states_per_stage();
    let mut probs = Array2::zeros((horizons.len(), lmax + 1));
    for (h_idx, state) in solutions.iter().enumerate() {
        // l = 0 goes through the same closed-form path as count_prob_zero so
        // the two agree to rounding.
        probs[[h_idx, 0]] = count_prob_zero(model, start, horizons[h_idx])?;
        for node in tree.nodes.iter().skip(1) {
            let x = &state[node.offset..node.offset + node.len];
            let contribution = match node.dest {
                Destination::Stage(_) => {
                    // alpha * X * 1 over the n x n block.
                    let mut acc = 0.0;
                    for r in 0..n {
                        let row_sum: f64 = x[r * n..(r + 1) * n].iter().sum();
                        acc += alpha[r] * row_sum;
                    }
                    acc
                }
                Destination::Death => alpha.iter().zip(x.iter()).map(|(a, v)| a * v).sum(),
            };
            probs[[h_idx, node.depth]] += contribution;
        }
    }
    // Clamp integrator noise.
    probs.mapv_inplace(|v| v.clamp(0.0, 1.0));
    Ok(CountDistribution {
        start_stage: start,
        horizons: horizons.to_vec(),
        lmax,
        probs,
        pruned_mass_bound: tree.pruned_bound,
    })
}

/// Probability of exactly one stage transition by `t`, namely `start -> to`.
/// Zero when the model has no rates for that move (or `to == start`).
pub fn count_prob_between(
    model: &StageModel,
    start: usize,
    to: Destination,
    t: f64,
    opts: &CountOptions,
) -> Result<f64, CountError> {
    if let Destination::Stage(j) = to {
        if j == start {
            // A transition is a stage change; staying put is not one.
            model.conditioned_alpha(start, 0.0)?;
            return Ok(0.0);
        }
    }
    if t < 0.0 {
        return Err(CountError::Stage(StageError::NegativeTime { value: t }));
    }
    let alpha = model.conditioned_alpha(start, 0.0)?;
    let tree = build_tree(model, start, 1, t, opts, Some(to))?;
    if tree.nodes.len() == 1 {
        return Ok(0.0); // the only route was a zero block
    }
    let solutions = integrate_tree(&tree, &[t], opts)?;
    let node = &tree.nodes[1];
    let x = &solutions[0][node.offset..node.offset + node.len];
    let n = model.states_per_stage();
    let p = match node.dest {
        Destination::Stage(_) => {
            let mut acc = 0.0;
            for r in 0..n {
                let row_sum: f64 = x[r * n..(r + 1) * n].iter().sum();
                acc += alpha[r] * row_sum;
            }
            acc
        }
        Destination::Death => alpha.iter().zip(x.iter()).map(|(a, v)| a * v).sum(),
    };
    Ok(p.clamp(0.0, 1.0))
}

struct SeqNode {
    dest: Destination,
    parent: usize,
    depth: usize,
    offset: usize,
    len: usize,
    /// Rate block from the parent's stage into this node's destination;
    /// row-major `n x n` for stage nodes, length-`n` column for death nodes.
    /// Empty for the root.
    coupling: Vec<f64>,
    /// Diagonal block of this node's stage, row-major; empty for death nodes.
    t_block: Vec<f64>,
}

struct SeqTree {
    nodes: Vec<SeqNode>,
    state_len: usize,
    n: usize,
    pruned_bound: f64,
}

fn check_horizons(horizons: &[f64]) -> Result<(), CountError> {
    let ok = !horizons.is_empty()
        && horizons.iter().all(|&t| t.is_finite() && t >= 0.0)
        && horizons.windows(2).all(|w| w[0] <= w[1]);
    if ok {
        Ok(())
    } else {
        Err(CountError::BadHorizons)
    }
}

fn flat(view: ArrayView2<'_, f64>) -> Vec<f64> {
    view.iter().copied().collect()
}

fn inf_norm(m: &[f64], rows: usize, cols: usize) -> f64 {
    (0..rows)
        .map(|r| m[r * cols..(r + 1) * cols].iter().map(|v| v.abs()).sum())
        .fold(0.0_f64, f64::max)
}

fn build_tree(
    model: &StageModel,
    start: usize,
    lmax: usize,
    t_max: f64,
    opts: &CountOptions,
    first_only: Option<Destination>,
) -> Result<SeqTree, CountError> {
    let k = model.stages();
    let n = model.states_per_stage();

    // Materialize all blocks once.
    let mut blocks: Vec<Vec<Vec<f64>>> = Vec::with_capacity(k);
    let mut exits: Vec<Vec<f64>> = Vec::with_capacity(k);
    for i in 0..k {
        let mut row = Vec::with_capacity(k);
        for j in 0..k {
            row.push(flat(model.block(i, j)?));
        }
        blocks.push(row);
        exits.push(model.exit_to_death(i)?.to_vec());
    }
    // Largest coupling norm, for the subtree amplification bound.
    let c_max = (0..k)
        .flat_map(|i| {
            let blocks = &blocks;
            let exits = &exits;
            (0..k)
                .filter(move |&j| j != i)
                .map(move |j| inf_norm(&blocks[i][j], n, n))
                .chain(std::iter::once(
                    exits[i].iter().fold(0.0_f64, |m, v| m.max(v.abs())),
                ))
        })
        .fold(0.0_f64, f64::max);

    let mut nodes = vec![SeqNode {
        dest: Destination::Stage(start),
        parent: 0,
        depth: 0,
        offset: 0,
        len: n * n,
        coupling: Vec::new(),
        t_block: blocks[start][start].clone(),
    }];
    let mut offset = n * n;
    let mut pruned_bound = 0.0_f64;
    // (node index, a-priori sup bound on its x entries)
    let mut frontier: Vec<(usize, f64)> = vec![(0, 1.0)];

    for depth in 1..=lmax {
        let mut next_frontier = Vec::new();
        for &(parent_idx, parent_bound) in &frontier {
            let parent_stage = match nodes[parent_idx].dest {
                Destination::Stage(s) => s,
                Destination::Death => continue, // death is terminal
            };
            let mut dests: Vec<Destination> = (0..k)
                .filter(|&j| j != parent_stage)
                .map(Destination::Stage)
                .chain(std::iter::once(Destination::Death))
                .collect();
            if depth == 1 {
                if let Some(only) = first_only {
                    dests.retain(|&d| d == only);
                }
            }
            for dest in dests {
                let (coupling, coupling_norm, len, t_block) = match dest {
                    Destination::Stage(j) => {
                        let c = &blocks[parent_stage][j];
                        (
                            c.clone(),
                            inf_norm(c, n, n),
                            n * n,
                            blocks[j][j].clone(),
                        )
                    }
                    Destination::Death => {
                        let c = &exits[parent_stage];
                        let norm = c.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
                        (c.clone(), norm, n, Vec::new())
                    }
                };
                if coupling_norm == 0.0 {
                    continue; // exact zero block: the subtree is identically 0
                }
                // Sup bound on this node's x: each extension convolves the
                // parent against a sub-stochastic semigroup through the
                // coupling, adding a factor |C| * t / depth.
                let bound = parent_bound * coupling_norm * t_max / depth as f64;
                if let Some(threshold) = opts.prune_threshold {
                    // Total contribution of this node plus everything below
                    // it; each level down multiplies by at most k branches
                    // of factor c_max * t / level.
                    let mut subtree = n as f64 * bound;
                    let mut term = n as f64 * bound;
                    for level in depth + 1..=lmax {
                        term *= k as f64 * c_max * t_max / level as f64;
                        subtree += term;
                    }
                    if subtree < threshold {
                        pruned_bound += subtree;
                        continue;
                    }
                }
                nodes.push(SeqNode {
                    dest,
                    parent: parent_idx,
                    depth,
                    offset,
                    len,
                    coupling,
                    t_block,
                });
                offset += len;
                if nodes.len() > opts.sequence_cap {
                    return Err(CountError::SequenceExplosion {
                        sequences: nodes.len(),
                        cap: opts.sequence_cap,
                    });
                }
                next_frontier.push((nodes.len() - 1, bound));
            }
        }
        frontier = next_frontier;
        if frontier.is_empty() {
            break;
        }
    }

    Ok(SeqTree {
        nodes,
        state_len: offset,
        n,
        pruned_bound,
    })
}

/// Integrate the stacked system and return the state at each horizon.
fn integrate_tree(
    tree: &SeqTree,
    horizons: &[f64],
    opts: &CountOptions,
) -> Result<Vec<Vec<f64>>, CountError> {
    let n = tree.n;
    let mut y0 = vec![0.0; tree.state_len];
    for d in 0..n {
        y0[d * n + d] = 1.0; // root starts at the identity
    }
    let t_end = horizons[horizons.len() - 1];
    let ode_opts = OdeOptions {
        rtol: opts.rtol,
        atol: opts.atol,
        ..OdeOptions::default()
    };
    let nodes = &tree.nodes;
    let rhs = move |_t: f64, y: &[f64], dy: &mut [f64]| {
        dy.fill(0.0);
        for node in nodes.iter() {
            let (x_off, x_len) = (node.offset, node.len);
            if node.depth > 0 {
                let parent = &nodes[node.parent];
                let xp = &y[parent.offset..parent.offset + parent.len];
                match node.dest {
                    Destination::Stage(_) => {
                        // dX += X_parent * C
                        mat_mul_add(xp, &node.coupling, &mut dy[x_off..x_off + x_len], n);
                    }
                    Destination::Death => {
                        // dx += X_parent * c (column)
                        for r in 0..n {
                            let mut acc = 0.0;
                            for c in 0..n {
                                acc += xp[r * n + c] * node.coupling[c];
                            }
                            dy[x_off + r] += acc;
                        }
                    }
                }
            }
            if !node.t_block.is_empty() {
                // dX += X * T (decay within the current stage)
                let x = &y[x_off..x_off + x_len];
                mat_mul_add(x, &node.t_block, &mut dy[x_off..x_off + x_len], n);
            }
        }
    };
    let solutions = integrate(rhs, 0.0, &y0, t_end, horizons, &ode_opts)?;
    Ok(solutions)
}

/// `out += a * b` for row-major `n x n` slices.
fn mat_mul_add(a: &[f64], b: &[f64], out: &mut [f64], n: usize) {
    for i in 0..n {
        for kk in 0..n {
            let aik = a[i * n + kk];
            if aik == 0.0 {
                continue;
            }
            let b_row = &b[kk * n..(kk + 1) * n];
            let out_row = &mut out[i * n..(i + 1) * n];
            for j in 0..n {
                out_row[j] += aik * b_row[j];
            }
        }
    }
}
