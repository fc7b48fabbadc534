//! Adaptive Simpson quadrature and bisection.

use crate::error::{Error, Result};

const MAX_DEPTH: u32 = 48;
const MAX_EVALS: usize = 4_000_000;

/// Integrates `f` over `[a, b]` to absolute tolerance `tol`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> Result<f64> {
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!("quadrature tolerance {tol}")));
    }
    if a == b {
        return Ok(0.0);
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    let mut budget = Budget { evals: MAX_EVALS, converged: true };
    let v = simpson_step(&f, a, b, fa, fm, fb, whole, tol, MAX_DEPTH, &mut budget);
    if budget.converged && v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Quadrature { tol, estimate: v })
    }
}

struct Budget {
    evals: usize,
    converged: bool,
}

#[allow(clippy::too_many_arguments)]
fn simpson_step<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
    budget: &mut Budget,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    if depth == 0 || budget.evals < 2 {
        budget.converged = false;
        return left + right + delta / 15.0;
    }
    budget.evals -= 2;
    simpson_step(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1, budget)
        + simpson_step(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1, budget)
}

/// Finds a root of `f` in `[lo, hi]` by bisection until the bracket is
/// narrower than `tol`. Requires a sign change.
pub fn bisect<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, tol: f64) -> Result<f64> {
    let mut flo = f(lo);
    let fhi = f(hi);
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if flo.signum() == fhi.signum() {
        return Err(Error::NoBracket { lo, hi });
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return Ok(mid);
        }
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}
