//! Adaptive Simpson quadrature.  Used by the convolution and moment
//! cross-checks, where an integrator independent of the ODE machinery is
//! needed.

use ndarray::Array1;

const MAX_DEPTH: u32 = 50;

/// Integrate `f` over `[a, b]` to roughly the requested absolute tolerance.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = simpson(a, b, fa, fm, fb);
    recurse(f, a, b, fa, fm, fb, whole, tol, MAX_DEPTH)
}

fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn recurse<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = simpson(a, m, fa, flm, fm);
    let right = simpson(m, b, fm, frm, fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        // Richardson extrapolation knocks out the leading error term.
        left + right + delta / 15.0
    } else {
        recurse(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
            + recurse(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
}

/// Vector-valued adaptive Simpson with sup-norm error control.  The integrand
/// is evaluated on a shared refinement, so all components see the same grid.
pub fn adaptive_simpson_vec<F: Fn(f64) -> Array1<f64>>(
    f: &F,
    a: f64,
    b: f64,
    tol: f64,
) -> Array1<f64> {
    let fa = f(a);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let fb = f(b);
    let whole = simpson_vec(a, b, &fa, &fm, &fb);
    recurse_vec(f, a, b, &fa, &fm, &fb, whole, tol, MAX_DEPTH)
}

fn simpson_vec(a: f64, b: f64, fa: &Array1<f64>, fm: &Array1<f64>, fb: &Array1<f64>) -> Array1<f64> {
    (fa + &(fm * 4.0) + fb) * ((b - a) / 6.0)
}

#[allow(clippy::too_many_arguments)]
fn recurse_vec<F: Fn(f64) -> Array1<f64>>(
    f: &F,
    a: f64,
    b: f64,
    fa: &Array1<f64>,
    fm: &Array1<f64>,
    fb: &Array1<f64>,
    whole: Array1<f64>,
    tol: f64,
    depth: u32,
) -> Array1<f64> {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = simpson_vec(a, m, fa, &flm, fm);
    let right = simpson_vec(m, b, fm, &frm, fb);
    let delta = &left + &right - &whole;
    let err = delta.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
    if depth == 0 || err <= 15.0 * tol {
        &left + &right + &(&delta / 15.0)
    } else {
        recurse_vec(f, a, m, fa, &flm, fm, left, 0.5 * tol, depth - 1)
            + recurse_vec(f, m, b, fm, &frm, fb, right, 0.5 * tol, depth - 1)
    }
}
