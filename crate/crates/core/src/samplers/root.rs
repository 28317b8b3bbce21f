use crate::error::{Error, Result};

/// Solves `f(t) = target` for nondecreasing `f` on `[lo, hi]` with
/// `f(lo) <= target <= f(hi)`, by regula falsi safeguarded with bisection.
/// Stops once the bracket is narrower than `tol`.
pub(crate) fn invert_monotone(
    f: impl Fn(f64) -> f64,
    target: f64,
    mut lo: f64,
    mut hi: f64,
    tol: f64,
    max_iter: usize,
) -> Result<f64> {
    const SLACK: f64 = 1e-12;
    let mut flo = f(lo) - target;
    let mut fhi = f(hi) - target;
    if flo > SLACK || fhi < -SLACK || !flo.is_finite() || !fhi.is_finite() {
        return Err(Error::RootFindFailure(format!(
            "target {target} not bracketed: f(lo) - target = {flo:e}, f(hi) - target = {fhi:e}"
        )));
    }
    let mut try_secant = true;
    for _ in 0..max_iter {
        let width = hi - lo;
        if width <= tol || flo >= 0.0 || fhi <= 0.0 {
            break;
        }
        let mut x = 0.5 * (lo + hi);
        let mut secant = false;
        if try_secant {
            let s = lo - flo * width / (fhi - flo);
            if s > lo && s < hi {
                x = s;
                secant = true;
            }
        }
        let fx = f(x) - target;
        if fx == 0.0 {
            return Ok(x);
        }
        if fx < 0.0 {
            lo = x;
            flo = fx;
        } else {
            hi = x;
            fhi = fx;
        }
        if secant {
            // probe just past the secant point to pinch the far side of the bracket
            let probe = if fx < 0.0 { (x + 0.5 * tol).min(hi) } else { (x - 0.5 * tol).max(lo) };
            if probe > lo && probe < hi {
                let fp = f(probe) - target;
                if fp < 0.0 {
                    lo = probe;
                    flo = fp;
                } else {
                    hi = probe;
                    fhi = fp;
                }
            }
        }
        try_secant = hi - lo <= 0.5 * width;
    }
    if hi - lo <= tol || flo >= 0.0 || fhi <= 0.0 {
        Ok(0.5 * (lo + hi))
    } else {
        Err(Error::RootFindFailure(format!("no convergence after {max_iter} iterations (bracket width {:e})", hi - lo)))
    }
}
