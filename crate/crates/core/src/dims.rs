//! The exponents `ξ₁,ᵣ`, `ξ₂,ᵣ` and the regime they determine.
//!
//! Both exponents solve an equation of the same shape,
//! `Σᵢ (wᵢ ρᵢʳ)^{ξ/(ξ+r)} = 1`, with `(w, ρ) = (t, inner ratios)` for `ξ₁,ᵣ`
//! and `(w, ρ) = ((p₁,…,p_N), outer ratios)` for `ξ₂,ᵣ`. The left side is
//! strictly decreasing in `ξ`, equals the number of terms at `ξ = 0` and
//! tends to `Σ wᵢρᵢʳ < 1`, so bracketing plus bisection is enough.

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::model::{Case, IsmSystem};
use crate::solver::{Bisection, Objective, RootSolver, SolveError};

pub const XI_TOL: f64 = 1e-12;
pub const XI_MAX_ITER: usize = 200;
/// Default tolerance on `|ξ₁ − ξ₂|` for the EQUAL regime.
pub const EQUAL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DimsError {
    #[error("weights and ratios differ in length ({weights} vs {ratios})")]
    LengthMismatch { weights: usize, ratios: usize },
    #[error("at least two components are required, got {0}")]
    TooFewComponents(usize),
    #[error("entry {value} of `{name}` is not admissible")]
    BadEntry { name: &'static str, value: f64 },
    #[error("order r = {0} must be positive")]
    BadOrder(f64),
    #[error("implicit derivative has a vanishing denominator at r = {r}")]
    ZeroDenominator { r: f64 },
    #[error("both endpoints r = {r_lo} and r = {r_hi} are in regime {regime}")]
    SameRegime {
        r_lo: f64,
        r_hi: f64,
        regime: String,
    },
    #[error("crossing not resolved: |ξ₁ − ξ₂| = {gap} after bisection")]
    CrossingNotResolved { gap: f64 },
    #[error(transparent)]
    Solve(#[from] SolveError),
}

fn validate(weights: &[f64], ratios: &[f64], r: f64) -> Result<(), DimsError> {
    if weights.len() != ratios.len() {
        return Err(DimsError::LengthMismatch {
            weights: weights.len(),
            ratios: ratios.len(),
        });
    }
    if weights.len() < 2 {
        return Err(DimsError::TooFewComponents(weights.len()));
    }
    if !(r > 0.0 && r.is_finite()) {
        return Err(DimsError::BadOrder(r));
    }
    if let Some(&value) = weights.iter().find(|w| !(**w > 0.0 && **w <= 1.0)) {
        return Err(DimsError::BadEntry {
            name: "weights",
            value,
        });
    }
    if let Some(&value) = ratios.iter().find(|s| !(**s > 0.0 && **s < 1.0)) {
        return Err(DimsError::BadEntry {
            name: "ratios",
            value,
        });
    }
    Ok(())
}

/// `Σᵢ (wᵢ ρᵢʳ)^{s/(s+r)}`.
pub fn moment_sum(weights: &[f64], ratios: &[f64], r: f64, s: f64) -> Result<f64, DimsError> {
    validate(weights, ratios, r)?;
    if s.is_nan() || s < 0.0 {
        return Err(DimsError::BadEntry {
            name: "s",
            value: s,
        });
    }
    Ok(moment_terms(weights, ratios, r)
        .map(|ln_q| (ln_q * s / (s + r)).exp())
        .sum())
}

fn moment_terms<'a>(
    weights: &'a [f64],
    ratios: &'a [f64],
    r: f64,
) -> impl Iterator<Item = f64> + 'a {
    weights
        .iter()
        .zip(ratios)
        .map(move |(w, s)| w.ln() + r * s.ln())
}

/// Solves `moment_sum(weights, ratios, r, ξ) = 1` by bisection.
pub fn solve_xi(weights: &[f64], ratios: &[f64], r: f64) -> Result<f64, DimsError> {
    solve_xi_with(&Bisection, weights, ratios, r)
}

pub fn solve_xi_with(
    solver: &dyn RootSolver,
    weights: &[f64],
    ratios: &[f64],
    r: f64,
) -> Result<f64, DimsError> {
    validate(weights, ratios, r)?;
    let ln_q: Vec<f64> = moment_terms(weights, ratios, r).collect();
    if let Some(&value) = ln_q.iter().find(|q| q.is_nan() || **q >= 0.0) {
        return Err(DimsError::BadEntry {
            name: "w·ρ^r",
            value: value.exp(),
        });
    }
    let value = |s: f64| -> f64 {
        let x = s / (s + r);
        ln_q.iter().map(|q| (q * x).exp()).sum::<f64>() - 1.0
    };
    let derivative = |s: f64| -> f64 {
        let x = s / (s + r);
        let dx = r / ((s + r) * (s + r));
        ln_q.iter().map(|q| (q * x).exp() * q * dx).sum::<f64>()
    };
    let mut hi = 1.0;
    while value(hi) >= 0.0 {
        hi *= 2.0;
        if hi > 1e15 {
            return Err(SolveError::NoSignChange {
                lo: 0.0,
                hi,
                f_lo: value(0.0),
                f_hi: value(hi),
            }
            .into());
        }
    }
    let objective = Objective {
        value: &value,
        derivative: Some(&derivative),
    };
    Ok(solver.solve(&objective, 0.0, hi, XI_TOL, XI_MAX_ITER)?)
}

/// `ξ′(r)` by implicit differentiation of the defining equation.
pub fn xi_derivative(weights: &[f64], ratios: &[f64], r: f64) -> Result<f64, DimsError> {
    let xi = solve_xi(weights, ratios, r)?;
    let x = xi / (xi + r);
    let mut num = 0.0;
    let mut den = 0.0;
    for (w, s) in weights.iter().zip(ratios) {
        let term = ((w.ln() + r * s.ln()) * x).exp();
        num += term * (w.ln() - xi * s.ln());
        den += term * (w.ln() + r * s.ln());
    }
    if den.abs() < 1e-300 {
        return Err(DimsError::ZeroDenominator { r });
    }
    Ok(xi / r * num / den)
}

/// `(Σ tᵢ ln tᵢ) / (Σ tᵢ ln ρᵢ)`, the dimension of a self-similar measure
/// under the open set condition.
pub fn hausdorff_dim_nu(t: &[f64], ratios: &[f64]) -> Result<f64, DimsError> {
    validate(t, ratios, 1.0)?;
    let num: f64 = t.iter().map(|w| w * w.ln()).sum();
    let den: f64 = t.iter().zip(ratios).map(|(w, s)| w * s.ln()).sum();
    if den == 0.0 {
        return Err(DimsError::BadEntry {
            name: "ratios",
            value: 1.0,
        });
    }
    Ok(num / den)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Regime {
    Xi1Greater,
    Xi2Greater,
    Equal { tol: f64 },
}

impl Regime {
    pub fn label(&self) -> &'static str {
        match self {
            Regime::Xi1Greater => "XI1_GREATER",
            Regime::Xi2Greater => "XI2_GREATER",
            Regime::Equal { .. } => "EQUAL",
        }
    }

    pub fn is_equal(&self) -> bool {
        matches!(self, Regime::Equal { .. })
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Predicted decay of `e^r_{n,r}(μ)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PredictedOrder {
    /// `e^r ≍ n^{exponent}` with `exponent = −r/ξᵣ`.
    PurePower { exponent: f64 },
    /// `n^{exponent} (log n)^{log_lower} ≲ e^r ≲ n^{exponent} (log n)^{log_upper}`.
    LogCorrected {
        exponent: f64,
        log_lower: f64,
        log_upper: f64,
    },
}

impl PredictedOrder {
    pub fn label(&self) -> &'static str {
        match self {
            PredictedOrder::PurePower { .. } => "pure_power",
            PredictedOrder::LogCorrected { .. } => "log_corrected",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct XiReport {
    pub r: f64,
    pub xi1: f64,
    pub xi2: f64,
    pub xi_r: f64,
    pub regime: Regime,
    pub predicted_order: PredictedOrder,
}

impl XiReport {
    /// `ξᵣ/(ξᵣ+r)`, the exponent used in the antichain sums.
    pub fn exponent(&self) -> f64 {
        self.xi_r / (self.xi_r + self.r)
    }
}

/// Solver and tolerance used by [`classify_with`].
#[derive(Clone)]
pub struct XiOptions {
    pub solver: Arc<dyn RootSolver>,
    pub equal_tol: f64,
}

impl Default for XiOptions {
    fn default() -> Self {
        Self {
            solver: Arc::new(Bisection),
            equal_tol: EQUAL_TOL,
        }
    }
}

pub fn classify(sys: &IsmSystem, r: f64) -> Result<XiReport, DimsError> {
    classify_with(sys, r, &XiOptions::default())
}

pub fn classify_with(sys: &IsmSystem, r: f64, opts: &XiOptions) -> Result<XiReport, DimsError> {
    let xi1 = solve_xi_with(opts.solver.as_ref(), sys.t(), &sys.inner_ratios(), r)?;
    let xi2 = solve_xi_with(
        opts.solver.as_ref(),
        sys.branch_weights(),
        &sys.outer_ratios(),
        r,
    )?;
    let xi_r = xi1.max(xi2);
    let regime = if (xi1 - xi2).abs() <= opts.equal_tol {
        Regime::Equal {
            tol: opts.equal_tol,
        }
    } else if xi1 > xi2 {
        Regime::Xi1Greater
    } else {
        Regime::Xi2Greater
    };
    let exponent = -r / xi_r;
    let predicted_order = match (regime, sys.case()) {
        (Regime::Equal { .. }, Case::I) => PredictedOrder::LogCorrected {
            exponent,
            log_lower: 1.0,
            log_upper: (xi_r + r) / xi_r,
        },
        (Regime::Equal { .. }, Case::II) => PredictedOrder::LogCorrected {
            exponent,
            log_lower: (xi_r + r) / xi_r,
            log_upper: (xi_r + r) / xi_r,
        },
        _ => PredictedOrder::PurePower { exponent },
    };
    Ok(XiReport {
        r,
        xi1,
        xi2,
        xi_r,
        regime,
        predicted_order,
    })
}

/// An order `r*` with `ξ₁,ᵣ* = ξ₂,ᵣ*`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Crossing {
    pub r: f64,
    pub xi1: f64,
    pub xi2: f64,
}

/// Bisects `r ↦ ξ₁,ᵣ − ξ₂,ᵣ` on `[r_lo, r_hi]`.
///
/// Stops once the gap is a tenth of the EQUAL tolerance, so the result
/// always classifies as EQUAL.
pub fn find_crossing_r(sys: &IsmSystem, r_lo: f64, r_hi: f64) -> Result<Crossing, DimsError> {
    find_crossing_r_with(sys, r_lo, r_hi, &XiOptions::default())
}

pub fn find_crossing_r_with(
    sys: &IsmSystem,
    r_lo: f64,
    r_hi: f64,
    opts: &XiOptions,
) -> Result<Crossing, DimsError> {
    let gap = |r: f64| -> Result<(f64, f64), DimsError> {
        let rep = classify_with(sys, r, opts)?;
        Ok((rep.xi1 - rep.xi2, rep.xi1))
    };
    let target = 0.1 * opts.equal_tol;
    let (mut lo, mut hi) = (r_lo.min(r_hi), r_lo.max(r_hi));
    let (d_lo, _) = gap(lo)?;
    let (d_hi, _) = gap(hi)?;
    if d_lo.signum() == d_hi.signum() && d_lo.abs() > target && d_hi.abs() > target {
        return Err(DimsError::SameRegime {
            r_lo,
            r_hi,
            regime: classify_with(sys, lo, opts)?.regime.to_string(),
        });
    }
    let lo_positive = d_lo > 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let (d, xi1) = gap(mid)?;
        if d.abs() <= target || mid <= lo || mid >= hi {
            if d.abs() > target {
                return Err(DimsError::CrossingNotResolved { gap: d.abs() });
            }
            return Ok(Crossing {
                r: mid,
                xi1,
                xi2: xi1 - d,
            });
        }
        if (d > 0.0) == lo_positive {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mid = 0.5 * (lo + hi);
    let (d, _) = gap(mid)?;
    Err(DimsError::CrossingNotResolved { gap: d.abs() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Dimension, Similitude};
    use approx::assert_relative_eq;

    const HALF: [f64; 2] = [0.5, 0.5];
    const EIGHTHS: [f64; 2] = [0.125, 0.125];
    const THIRDS: [f64; 2] = [1.0 / 3.0, 2.0 / 3.0];

    fn example(p0: f64) -> IsmSystem {
        IsmSystem::case_one(
            Dimension::One,
            vec![
                Similitude::line(0.125, 1.0, 0.0).unwrap(),
                Similitude::line(0.125, 1.0, 0.875).unwrap(),
            ],
            vec![p0, (1.0 - p0) / 2.0, (1.0 - p0) / 2.0],
            THIRDS.to_vec(),
        )
        .unwrap()
    }

    /// Grid scan oracle: smallest grid point at which the moment sum drops
    /// below 1, refined by repeated tenfold subdivision.
    fn scan_root(w: &[f64], s: &[f64], r: f64) -> f64 {
        let f = |x: f64| moment_sum(w, s, r, x).unwrap() - 1.0;
        let (mut lo, mut step) = (0.0, 0.5);
        for _ in 0..12 {
            let mut x = lo;
            while f(x + step) > 0.0 {
                x += step;
            }
            lo = x;
            step /= 10.0;
        }
        lo
    }

    #[test]
    fn moment_sum_examples() {
        assert_eq!(moment_sum(&THIRDS, &EIGHTHS, 2.0, 0.0).unwrap(), 2.0);
        assert_relative_eq!(
            moment_sum(&HALF, &EIGHTHS, 1.0, 1.0 / 3.0).unwrap(),
            1.0,
            epsilon = 1e-14
        );
        let grid: Vec<f64> = (0..=50)
            .map(|i| moment_sum(&THIRDS, &EIGHTHS, 2.0, i as f64 * 0.1).unwrap())
            .collect();
        assert!(grid.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn moment_sum_rejects_bad_input() {
        assert!(matches!(
            moment_sum(&HALF, &[0.5], 1.0, 1.0),
            Err(DimsError::LengthMismatch { .. })
        ));
        assert!(moment_sum(&[0.5, 0.0], &EIGHTHS, 1.0, 1.0).is_err());
        assert!(moment_sum(&HALF, &[0.5, 1.0], 1.0, 1.0).is_err());
        assert!(moment_sum(&[1.0], &[0.5], 1.0, 1.0).is_err());
    }

    #[test]
    fn closed_form_root() {
        for r in [0.5, 1.0, 2.0, 5.0, 20.0] {
            let xi = solve_xi(&HALF, &EIGHTHS, r).unwrap();
            assert!((xi - 1.0 / 3.0).abs() < 1e-10, "r = {r}: {xi}");
        }
    }

    #[test]
    fn newton_agrees_with_bisection() {
        let newton = crate::solver::SafeguardedNewton;
        for r in [0.05, 1.0, 7.0] {
            let a = solve_xi(&THIRDS, &EIGHTHS, r).unwrap();
            let b = solve_xi_with(&newton, &THIRDS, &EIGHTHS, r).unwrap();
            assert!((a - b).abs() < 1e-11);
        }
    }

    #[test]
    fn large_order_limit() {
        let xi = solve_xi(&THIRDS, &EIGHTHS, 200.0).unwrap();
        let scanned = scan_root(&THIRDS, &EIGHTHS, 200.0);
        assert!((xi - scanned).abs() < 1e-9);
        assert!((xi - 1.0 / 3.0).abs() < 0.02);
    }

    #[test]
    fn small_order_branch_exponent_vanishes() {
        let w = [0.475, 0.475];
        let xi = solve_xi(&w, &EIGHTHS, 0.01).unwrap();
        assert!(xi < 0.1);
        assert!((xi - scan_root(&w, &EIGHTHS, 0.01)).abs() < 1e-9);
        let seq: Vec<f64> = [0.1, 0.05, 0.01]
            .iter()
            .map(|&r| solve_xi(&w, &EIGHTHS, r).unwrap())
            .collect();
        assert!(seq[0] > seq[1] && seq[1] > seq[2]);
    }

    #[test]
    fn root_residual_is_small() {
        for r in [0.01, 0.3, 1.0, 2.5, 20.0, 80.0] {
            for w in [&THIRDS[..], &[0.475, 0.475][..], &HALF[..]] {
                let xi = solve_xi(w, &EIGHTHS, r).unwrap();
                let res = (moment_sum(w, &EIGHTHS, r, xi).unwrap() - 1.0).abs();
                assert!(res <= 1e-10, "r={r} residual {res}");
            }
        }
    }

    #[test]
    fn derivative_examples() {
        assert!(xi_derivative(&HALF, &EIGHTHS, 3.0).unwrap().abs() < 1e-12);
        let h = 1e-4;
        let fd = (solve_xi(&THIRDS, &EIGHTHS, 2.0 + h).unwrap()
            - solve_xi(&THIRDS, &EIGHTHS, 2.0 - h).unwrap())
            / (2.0 * h);
        let d = xi_derivative(&THIRDS, &EIGHTHS, 2.0).unwrap();
        assert!(((d - fd) / fd).abs() < 1e-6, "{d} vs {fd}");
        // ξ₁ increases toward log 2 / log 8 from below for these weights.
        let fd_small = (solve_xi(&THIRDS, &EIGHTHS, 0.2).unwrap()
            - solve_xi(&THIRDS, &EIGHTHS, 0.1).unwrap())
            / 0.1;
        let d_small = xi_derivative(&THIRDS, &EIGHTHS, 0.15).unwrap();
        assert_eq!(d_small.signum(), fd_small.signum());
    }

    #[test]
    fn hausdorff_examples() {
        assert_relative_eq!(
            hausdorff_dim_nu(&HALF, &EIGHTHS).unwrap(),
            1.0 / 3.0,
            epsilon = 1e-15
        );
        let expected = ((1.0_f64 / 3.0) * (1.0_f64 / 3.0).ln()
            + (2.0 / 3.0) * (2.0_f64 / 3.0).ln())
            / (0.125_f64).ln();
        let d = hausdorff_dim_nu(&THIRDS, &EIGHTHS).unwrap();
        assert_relative_eq!(d, expected, epsilon = 1e-15);
        assert!((d - 0.3060986).abs() < 1e-6);
        for r in [0.5, 1.0, 2.0, 5.0] {
            assert!(solve_xi(&THIRDS, &EIGHTHS, r).unwrap() >= d);
        }
    }

    #[test]
    fn regimes_at_the_ends() {
        let sys = example(0.05);
        assert_eq!(classify(&sys, 0.01).unwrap().regime, Regime::Xi1Greater);
        let rep = classify(&sys, 20.0).unwrap();
        assert_eq!(rep.regime, Regime::Xi2Greater);
        assert_eq!(rep.xi_r, rep.xi2);
        assert!(matches!(
            rep.predicted_order,
            PredictedOrder::PurePower { .. }
        ));
    }

    #[test]
    fn symmetric_condensation_regime_follows_moment_test() {
        // t uniform, equal ratios: ξ₁ = 1/3 exactly, and the regime is the
        // sign of b(1/3) − 1.
        for p0 in [0.01, 0.05, 0.2] {
            let sys = IsmSystem::case_one(
                Dimension::One,
                vec![
                    Similitude::line(0.125, 1.0, 0.0).unwrap(),
                    Similitude::line(0.125, 1.0, 0.875).unwrap(),
                ],
                vec![p0, (1.0 - p0) / 2.0, (1.0 - p0) / 2.0],
                HALF.to_vec(),
            )
            .unwrap();
            for r in [0.5, 2.0, 10.0] {
                let rep = classify(&sys, r).unwrap();
                assert!((rep.xi1 - 1.0 / 3.0).abs() < 1e-10);
                let b = moment_sum(sys.branch_weights(), &EIGHTHS, r, 1.0 / 3.0).unwrap() - 1.0;
                let expected = if b > 0.0 {
                    Regime::Xi2Greater
                } else {
                    Regime::Xi1Greater
                };
                assert_eq!(rep.regime, expected, "p0={p0} r={r}");
            }
        }
    }

    #[test]
    fn crossing_is_equal() {
        let sys = example(0.05);
        let c = find_crossing_r(&sys, 0.01, 20.0).unwrap();
        assert!(c.r > 0.01 && c.r < 20.0);
        assert!((c.xi1 - c.xi2).abs() <= 1e-8);
        let rep = classify(&sys, c.r).unwrap();
        assert!(rep.regime.is_equal());
        assert!(
            matches!(rep.predicted_order, PredictedOrder::LogCorrected { log_lower, .. } if log_lower == 1.0)
        );
        // Coarse scan locates the sign change in the same cell.
        let grid: Vec<f64> = (1..=200).map(|i| i as f64 * 0.1).collect();
        let cell = grid
            .windows(2)
            .find(|w| {
                let a = classify(&sys, w[0]).unwrap();
                let b = classify(&sys, w[1]).unwrap();
                (a.xi1 - a.xi2).signum() != (b.xi1 - b.xi2).signum()
            })
            .unwrap();
        assert!(c.r >= cell[0] && c.r <= cell[1]);
    }

    #[test]
    fn crossing_requires_opposite_regimes() {
        let sys = example(0.05);
        assert!(matches!(
            find_crossing_r(&sys, 5.0, 20.0),
            Err(DimsError::SameRegime { .. })
        ));
    }
}
