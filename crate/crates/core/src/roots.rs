//! Safeguarded root finding for strictly increasing scalar functions.
//!
//! Bracketed bisection (in log space) down to a relative bracket width of
//! `1e-3`, then Newton polish that falls back to bisection whenever a step
//! would leave the bracket. Polishing stops at `|f| ≤ tol` or once a Newton
//! step falls below a few ulps of `x`.

use crate::error::{PistonError, Result};

pub const DEFAULT_TOL: f64 = 1e-12;
pub const MAX_ITER: usize = 200;
const BISECT_WIDTH: f64 = 1e-3;

#[derive(Debug, Clone, Copy)]
pub struct Root {
    pub x: f64,
    pub residual: f64,
    pub iterations: usize,
}

/// Find `x > 0` with `f(x).0 = 0` for an increasing `f`, where `f` returns
/// `(value, derivative)`. `lo` must satisfy `f(lo) < 0`; the upper end of
/// the bracket grows geometrically from `hi_guess`.
pub fn solve_increasing<F>(f: F, lo: f64, hi_guess: f64, tol: f64, max_iter: usize) -> Result<Root>
where
    F: Fn(f64) -> (f64, f64),
{
    let (f_lo, _) = f(lo);
    if f_lo.is_nan() {
        return Err(PistonError::Bracket(format!("f({lo}) is NaN")));
    }
    if f_lo >= 0.0 {
        if f_lo.abs() <= tol {
            return Ok(Root {
                x: lo,
                residual: f_lo,
                iterations: 0,
            });
        }
        return Err(PistonError::Bracket(format!(
            "f is already positive ({f_lo:e}) at the lower end {lo:e}"
        )));
    }
    let mut a = lo;
    let mut b = hi_guess.max(lo * 2.0);
    let mut grow = 0;
    loop {
        let (fb, _) = f(b);
        if fb.is_nan() {
            return Err(PistonError::Bracket(format!("f({b:e}) is NaN")));
        }
        if fb > 0.0 {
            break;
        }
        if fb == 0.0 {
            return Ok(Root {
                x: b,
                residual: 0.0,
                iterations: grow,
            });
        }
        a = b;
        b *= 4.0;
        grow += 1;
        if grow > 600 || !b.is_finite() {
            return Err(PistonError::Bracket(format!("no sign change found up to {b:e}")));
        }
    }

    let mut iterations = grow;
    // bisection in log space
    while b / a - 1.0 > BISECT_WIDTH {
        iterations += 1;
        if iterations > max_iter {
            let (r, _) = f(0.5 * (a + b));
            return Err(PistonError::NoConvergence {
                iterations,
                residual: r,
            });
        }
        let m = (a * b).sqrt();
        let (fm, _) = f(m);
        if fm == 0.0 {
            return Ok(Root {
                x: m,
                residual: 0.0,
                iterations,
            });
        }
        if fm < 0.0 {
            a = m;
        } else {
            b = m;
        }
    }

    let mut x = 0.5 * (a + b);
    loop {
        iterations += 1;
        let (fx, dfx) = f(x);
        if fx.abs() <= tol {
            return Ok(Root {
                x,
                residual: fx,
                iterations,
            });
        }
        if iterations > max_iter {
            return Err(PistonError::NoConvergence {
                iterations,
                residual: fx,
            });
        }
        if fx < 0.0 {
            a = x;
        } else {
            b = x;
        }
        let newton = x - fx / dfx;
        let next = if dfx > 0.0 && newton > a && newton < b {
            newton
        } else {
            0.5 * (a + b)
        };
        if (next - x).abs() <= 4.0 * f64::EPSILON * x.abs() {
            // The root is pinned to a few ulps; the residual cannot drop
            // further when f is a difference of large terms.
            let (fn_, _) = f(next);
            return Ok(Root {
                x: next,
                residual: fn_,
                iterations,
            });
        }
        x = next;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cube_root() {
        let r = solve_increasing(|x| (x * x * x - 27.0, 3.0 * x * x), 1e-13, 1.0, 1e-12, 200).unwrap();
        assert!((r.x - 3.0).abs() < 1e-12);
    }

    #[test]
    fn bad_bracket() {
        assert!(solve_increasing(|x| (x + 1.0, 1.0), 1e-13, 1.0, 1e-12, 200).is_err());
    }

    #[test]
    fn unbounded_never_crosses() {
        assert!(solve_increasing(|x| (-1.0 / (1.0 + x), 1.0 / (1.0 + x).powi(2)), 1e-13, 1.0, 1e-12, 200).is_err());
    }

    #[test]
    fn cancellation_floor_still_converges() {
        // |f| cannot fall below ~1e3·ε, far above the requested tolerance
        let f = |x: f64| (x.ln() + 1e3 - 1e3 - 3f64.ln(), 1.0 / x);
        let r = solve_increasing(f, 1e-13, 1.0, 1e-16, 200).unwrap();
        assert!((r.x / 3.0 - 1.0).abs() < 1e-12, "{}", r.x);
    }
}
