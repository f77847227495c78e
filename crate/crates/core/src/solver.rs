//! Bracketing root solvers for monotone scalar functions.

use std::sync::Arc;

use thiserror::Error;

use crate::registry::{Named, Registry};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolveError {
    #[error("no sign change on [{lo}, {hi}]: f(lo) = {f_lo}, f(hi) = {f_hi}")]
    NoSignChange {
        lo: f64,
        hi: f64,
        f_lo: f64,
        f_hi: f64,
    },
    #[error("tolerance {tol} not reached in {iterations} iterations")]
    NotConverged { tol: f64, iterations: usize },
}

/// A scalar function with an optional derivative.
pub struct Objective<'a> {
    pub value: &'a dyn Fn(f64) -> f64,
    pub derivative: Option<&'a dyn Fn(f64) -> f64>,
}

pub trait RootSolver: Named + Send + Sync {
    /// Finds a root inside `[lo, hi]` to absolute tolerance `tol` on the
    /// argument. `f(lo)` and `f(hi)` must have opposite signs (or one of
    /// them must vanish).
    fn solve(
        &self,
        f: &Objective<'_>,
        lo: f64,
        hi: f64,
        tol: f64,
        max_iter: usize,
    ) -> Result<f64, SolveError>;
}

fn check_bracket(f_lo: f64, f_hi: f64, lo: f64, hi: f64) -> Result<(), SolveError> {
    if f_lo.signum() == f_hi.signum() && f_lo != 0.0 && f_hi != 0.0 {
        return Err(SolveError::NoSignChange { lo, hi, f_lo, f_hi });
    }
    Ok(())
}

/// Plain interval halving.
pub struct Bisection;

impl Named for Bisection {
    fn name(&self) -> &'static str {
        "bisection"
    }
}

impl RootSolver for Bisection {
    fn solve(
        &self,
        f: &Objective<'_>,
        lo: f64,
        hi: f64,
        tol: f64,
        max_iter: usize,
    ) -> Result<f64, SolveError> {
        let (mut lo, mut hi) = (lo.min(hi), lo.max(hi));
        let f_lo = (f.value)(lo);
        let f_hi = (f.value)(hi);
        check_bracket(f_lo, f_hi, lo, hi)?;
        if f_lo == 0.0 {
            return Ok(lo);
        }
        if f_hi == 0.0 {
            return Ok(hi);
        }
        let lo_positive = f_lo > 0.0;
        for _ in 0..max_iter {
            let mid = 0.5 * (lo + hi);
            if hi - lo <= tol || mid <= lo || mid >= hi {
                return Ok(mid);
            }
            let f_mid = (f.value)(mid);
            if f_mid == 0.0 {
                return Ok(mid);
            }
            if (f_mid > 0.0) == lo_positive {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        if hi - lo <= tol {
            return Ok(0.5 * (lo + hi));
        }
        Err(SolveError::NotConverged {
            tol,
            iterations: max_iter,
        })
    }
}

/// Newton steps kept inside a shrinking bracket; falls back to bisection
/// whenever a step leaves the bracket or no derivative is supplied.
pub struct SafeguardedNewton;

impl Named for SafeguardedNewton {
    fn name(&self) -> &'static str {
        "newton"
    }
}

impl RootSolver for SafeguardedNewton {
    fn solve(
        &self,
        f: &Objective<'_>,
        lo: f64,
        hi: f64,
        tol: f64,
        max_iter: usize,
    ) -> Result<f64, SolveError> {
        let Some(df) = f.derivative else {
            return Bisection.solve(f, lo, hi, tol, max_iter);
        };
        let (mut lo, mut hi) = (lo.min(hi), lo.max(hi));
        let f_lo = (f.value)(lo);
        let f_hi = (f.value)(hi);
        check_bracket(f_lo, f_hi, lo, hi)?;
        if f_lo == 0.0 {
            return Ok(lo);
        }
        if f_hi == 0.0 {
            return Ok(hi);
        }
        let lo_positive = f_lo > 0.0;
        let mut x = 0.5 * (lo + hi);
        for _ in 0..max_iter {
            let fx = (f.value)(x);
            if fx == 0.0 {
                return Ok(x);
            }
            if (fx > 0.0) == lo_positive {
                lo = x;
            } else {
                hi = x;
            }
            let d = df(x);
            let newton = x - fx / d;
            let next = if d != 0.0 && newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
            let step = (next - x).abs();
            x = next;
            if step <= 0.5 * tol || hi - lo <= tol {
                return Ok(x);
            }
        }
        Err(SolveError::NotConverged {
            tol,
            iterations: max_iter,
        })
    }
}

/// Registry holding `bisection` and `newton`.
pub fn root_solvers() -> Registry<dyn RootSolver> {
    let mut reg: Registry<dyn RootSolver> = Registry::new();
    reg.register(Arc::new(Bisection));
    reg.register(Arc::new(SafeguardedNewton));
    reg
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cubic(x: f64) -> f64 {
        x * x * x - 2.0
    }

    fn cubic_d(x: f64) -> f64 {
        3.0 * x * x
    }

    #[test]
    fn both_solvers_find_cube_root() {
        let f = Objective {
            value: &cubic,
            derivative: Some(&cubic_d),
        };
        for name in root_solvers().names() {
            let s = root_solvers().get(name).unwrap();
            let x = s.solve(&f, 0.0, 4.0, 1e-13, 200).unwrap();
            assert!((x - 2.0_f64.cbrt()).abs() < 1e-12, "{name}: {x}");
        }
    }

    #[test]
    fn rejects_missing_sign_change() {
        let f = Objective {
            value: &cubic,
            derivative: None,
        };
        assert!(matches!(
            Bisection.solve(&f, 2.0, 3.0, 1e-12, 100),
            Err(SolveError::NoSignChange { .. })
        ));
    }

    #[test]
    fn reports_non_convergence() {
        let f = Objective {
            value: &cubic,
            derivative: None,
        };
        assert!(matches!(
            Bisection.solve(&f, 0.0, 4.0, 1e-14, 5),
            Err(SolveError::NotConverged { .. })
        ));
    }
}
