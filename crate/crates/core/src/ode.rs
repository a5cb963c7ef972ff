//! Dormand-Prince 5(4) adaptive Runge-Kutta with a 4th-order dense output,
//! for first-order systems `y' = f(t, y)` on flat `f64` state vectors.

use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum OdeError {
    #[error("step size underflowed at t = {t}; the system is too stiff for this integrator")]
    StepSizeUnderflow { t: f64 },
    #[error("no convergence within {steps} steps (reached t = {t})")]
    MaxStepsExceeded { t: f64, steps: usize },
}

#[derive(Debug, Clone)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
    /// Initial step size; estimated from the right-hand side when `None`.
    pub h_init: Option<f64>,
}

impl Default for OdeOptions {
    fn default() -> Self {
        OdeOptions {
            rtol: 1e-8,
            atol: 1e-10,
            max_steps: 200_000,
            h_init: None,
        }
    }
}

// Butcher tableau.
const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A2: [f64; 1] = [0.2];
const A3: [f64; 2] = [3.0 / 40.0, 9.0 / 40.0];
const A4: [f64; 3] = [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0];
const A5: [f64; 4] = [
    19372.0 / 6561.0,
    -25360.0 / 2187.0,
    64448.0 / 6561.0,
    -212.0 / 729.0,
];
const A6: [f64; 5] = [
    9017.0 / 3168.0,
    -355.0 / 33.0,
    46732.0 / 5247.0,
    49.0 / 176.0,
    -5103.0 / 18656.0,
];
const A7: [f64; 6] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
];
// Difference between the 5th- and 4th-order weights, for the error estimate.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];
// Dense-output weights for the 5th coefficient of the quartic interpolant.
const D: [f64; 7] = [
    -12715105075.0 / 11282082432.0,
    0.0,
    87487479700.0 / 32700410799.0,
    -10690763975.0 / 1880347072.0,
    701980252875.0 / 199316789632.0,
    -1453857185.0 / 822651844.0,
    69997945.0 / 29380423.0,
];

/// Integrate from `t0` to `t_end` and return the dense-output solution at each
/// requested point of `outputs` (which must be ascending and inside
/// `[t0, t_end]`).
pub fn integrate<F>(
    mut f: F,
    t0: f64,
    y0: &[f64],
    t_end: f64,
    outputs: &[f64],
    opts: &OdeOptions,
) -> Result<Vec<Vec<f64>>, OdeError>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    debug_assert!(outputs.windows(2).all(|w| w[0] <= w[1]));
    debug_assert!(outputs
        .iter()
        .all(|&t| t >= t0 - 1e-12 && t <= t_end + 1e-12));

    let n = y0.len();
    let mut results: Vec<Vec<f64>> = Vec::with_capacity(outputs.len());
    let mut next_out = 0;
    while next_out < outputs.len() && outputs[next_out] <= t0 {
        results.push(y0.to_vec());
        next_out += 1;
    }
    if t_end <= t0 || next_out == outputs.len() {
        while next_out < outputs.len() {
            results.push(y0.to_vec());
            next_out += 1;
        }
        return Ok(results);
    }

    let span = t_end - t0;
    let mut t = t0;
    let mut y = y0.to_vec();
    let mut k: Vec<Vec<f64>> = (0..7).map(|_| vec![0.0; n]).collect();
    let mut y_stage = vec![0.0; n];
    let mut y_new = vec![0.0; n];

    f(t, &y, &mut k[0]);
    let mut h = opts.h_init.unwrap_or_else(|| initial_step(&y, &k[0], span, opts));
    let h_floor = span * 1e-14;
    let mut facmax = 5.0;

    for step in 0..opts.max_steps {
        if h < h_floor {
            return Err(OdeError::StepSizeUnderflow { t });
        }
        if t + h > t_end {
            h = t_end - t;
        }

        // Stages 2..6 (stage 1 is FSAL from the previous step).
        combine(h, &y, &k, &A2, &mut y_stage);
        f(t + C[1] * h, &y_stage, &mut k[1]);
        combine(h, &y, &k, &A3, &mut y_stage);
        f(t + C[2] * h, &y_stage, &mut k[2]);
        combine(h, &y, &k, &A4, &mut y_stage);
        f(t + C[3] * h, &y_stage, &mut k[3]);
        combine(h, &y, &k, &A5, &mut y_stage);
        f(t + C[4] * h, &y_stage, &mut k[4]);
        combine(h, &y, &k, &A6, &mut y_stage);
        f(t + C[5] * h, &y_stage, &mut k[5]);
        // The 7th stage doubles as the 5th-order solution.
        combine(h, &y, &k, &A7, &mut y_new);
        f(t + h, &y_new, &mut k[6]);

        // Scaled RMS error over the embedded 4th-order difference.
        let mut err_sq = 0.0;
        for i in 0..n {
            let e_i = h
                * (E[0] * k[0][i]
                    + E[2] * k[2][i]
                    + E[3] * k[3][i]
                    + E[4] * k[4][i]
                    + E[5] * k[5][i]
                    + E[6] * k[6][i]);
            let scale = opts.atol + opts.rtol * y[i].abs().max(y_new[i].abs());
            let r = e_i / scale;
            err_sq += r * r;
        }
        let err = (err_sq / n as f64).sqrt();

        if err <= 1.0 {
            // Accept; emit dense output for any requested points in (t, t+h].
            let t_new = t + h;
            while next_out < outputs.len() && outputs[next_out] <= t_new + 1e-14 * span {
                let theta = ((outputs[next_out] - t) / h).clamp(0.0, 1.0);
                results.push(interpolate(&y, &y_new, &k, h, theta));
                next_out += 1;
            }
            t = t_new;
            std::mem::swap(&mut y, &mut y_new);
            k.swap(0, 6); // FSAL
            if t >= t_end - 1e-14 * span {
                while next_out < outputs.len() {
                    results.push(y.clone());
                    next_out += 1;
                }
                return Ok(results);
            }
            let fac = (0.9 * err.powf(-0.2)).clamp(0.2, facmax);
            h *= fac;
            facmax = 5.0;
        } else {
            let fac = (0.9 * err.powf(-0.2)).clamp(0.2, 1.0);
            h *= fac;
            facmax = 1.0; // no growth right after a rejection
        }
        if step + 1 == opts.max_steps {
            return Err(OdeError::MaxStepsExceeded {
                t,
                steps: opts.max_steps,
            });
        }
    }
    Err(OdeError::MaxStepsExceeded {
        t,
        steps: opts.max_steps,
    })
}

/// `out = y + h * sum_j a[j] * k[j]`.
fn combine(h: f64, y: &[f64], k: &[Vec<f64>], a: &[f64], out: &mut [f64]) {
    for i in 0..y.len() {
        let mut acc = 0.0;
        for (j, &aj) in a.iter().enumerate() {
            if aj != 0.0 {
                acc += aj * k[j][i];
            }
        }
        out[i] = y[i] + h * acc;
    }
}

/// Quartic dense output on an accepted step.
fn interpolate(y0: &[f64], y1: &[f64], k: &[Vec<f64>], h: f64, theta: f64) -> Vec<f64> {
    let theta1 = 1.0 - theta;
    let n = y0.len();
    let mut out = vec![0.0; n];
    for i in 0..n {
        let ydiff = y1[i] - y0[i];
        let bspl = h * k[0][i] - ydiff;
        let c4 = ydiff - h * k[6][i] - bspl;
        let c5 = h
            * (D[0] * k[0][i]
                + D[2] * k[2][i]
                + D[3] * k[3][i]
                + D[4] * k[4][i]
                + D[5] * k[5][i]
                + D[6] * k[6][i]);
        out[i] = y0[i] + theta * (ydiff + theta1 * (bspl + theta * (c4 + theta1 * c5)));
    }
    out
}

/// Cheap variant of the classic starting-step heuristic.
fn initial_step(y0: &[f64], f0: &[f64], span: f64, opts: &OdeOptions) -> f64 {
    let mut d0 = 0.0_f64;
    let mut d1 = 0.0_f64;
    for i in 0..y0.len() {
        let scale = opts.atol + opts.rtol * y0[i].abs();
        d0 += (y0[i] / scale).powi(2);
        d1 += (f0[i] / scale).powi(2);
    }
    let d0 = (d0 / y0.len() as f64).sqrt();
    let d1 = (d1 / y0.len() as f64).sqrt();
    let h0 = if d0 < 1e-5 || d1 < 1e-5 {
        1e-6 * span
    } else {
        0.01 * d0 / d1
    };
    h0.min(0.1 * span).max(span * 1e-10)
}
