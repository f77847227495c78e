//! The invariant suite behind `verify`.
//!
//! Every check is named; a check that cannot be evaluated records the error
//! as its detail and fails, except for resource caps, which abort the run.

use ismq_core::antichain::eta_bounds;
use ismq_core::antichain2::{self, pi_bounds};
use ismq_core::dims::{
    hausdorff_dim_nu, moment_sum, solve_xi, solve_xi_with, xi_derivative, XiReport,
};
use ismq_core::model::{sample_batch, Case, Family, IsmSystem, Point};
use ismq_core::numeric::derive_seed;
use ismq_core::quantizer::{estimate_error, optimize_codebook, DEFAULT_SAMPLE_EPS};
use ismq_core::solver::root_solvers;
use ismq_core::words::{verify_maximal_antichain, Word};

use crate::commands::{bound_point, Context};
use crate::error::CliError;

#[derive(Clone, Debug)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    pub fn status(&self) -> &'static str {
        if self.passed {
            "pass"
        } else {
            "fail"
        }
    }
}

type Outcome = Result<(bool, String), CliError>;

/// Harness window for `ln φₖ,ᵣ / k` in Case (ii).
pub const PHI_WINDOW: (f64, f64) = (0.05, 5.0);
/// Harness bound on `max/min` of bounded sequences.
pub const RATIO_BOUND: f64 = 10.0;
/// Relative Monte-Carlo slack on upper-bound comparisons.
pub const MC_REL: f64 = 0.05;
/// Standard errors of Monte-Carlo slack.
pub const MC_SIGMAS: f64 = 4.0;

struct Suite<'a> {
    ctx: &'a mut Context,
    checks: Vec<Check>,
}

impl Suite<'_> {
    fn record(&mut self, name: impl Into<String>, outcome: Outcome) -> Result<(), CliError> {
        let (passed, detail) = match outcome {
            Ok(v) => v,
            Err(e @ CliError::Cap(_)) => return Err(e),
            Err(e) => (false, e.to_string()),
        };
        self.checks.push(Check {
            name: name.into(),
            passed,
            detail,
        });
        Ok(())
    }
}

fn level(alphabet: u16, len: usize) -> Vec<Word> {
    let mut words = vec![Word::empty(alphabet).expect("alphabet ≥ 1")];
    for _ in 0..len {
        words = words
            .iter()
            .flat_map(|w| (0..alphabet as usize).map(move |i| w.child(i).expect("depth below cap")))
            .collect();
    }
    words
}

/// Deepest level whose word count stays at or below `max_words`.
fn depth_for(alphabet: u16, cap: usize, max_words: usize) -> usize {
    let mut len = 0;
    let mut count = 1usize;
    while len < cap {
        count = count.saturating_mul(alphabet as usize);
        if count > max_words {
            break;
        }
        len += 1;
    }
    len
}

fn reversed(sys: &IsmSystem) -> Result<IsmSystem, CliError> {
    let mut outer = sys.outer_maps().to_vec();
    outer.reverse();
    let mut p = sys.branch_weights().to_vec();
    p.reverse();
    p.insert(0, sys.p0());
    let mut t = sys.t().to_vec();
    t.reverse();
    let dim = sys.dimension();
    Ok(match sys.case() {
        Case::I => IsmSystem::case_one(dim, outer, p, t)?,
        Case::II => {
            let mut inner = sys.inner_maps().to_vec();
            inner.reverse();
            IsmSystem::case_two(dim, outer, inner, p, t)?
        }
    })
}

fn similarity_dimension(ratios: &[f64]) -> f64 {
    let f = |d: f64| ratios.iter().map(|s| s.powf(d)).sum::<f64>() - 1.0;
    let (mut lo, mut hi) = (0.0, 1.0);
    while f(hi) > 0.0 {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Five-point stencil for `dξ/dr`.
fn stencil(w: &[f64], s: &[f64], r: f64) -> Result<f64, CliError> {
    let h = 1e-3 * r;
    let xi = |x: f64| solve_xi(w, s, x);
    Ok((-xi(r + 2.0 * h)? + 8.0 * xi(r + h)? - 8.0 * xi(r - h)? + xi(r - 2.0 * h)?) / (12.0 * h))
}

fn cylinder_mass(sys: &IsmSystem, w: &Word) -> Result<f64, CliError> {
    Ok(match sys.case() {
        Case::I => sys.cylinder_mass_case1(w)?,
        Case::II => sys.patch_mass_case2(w, None)?,
    })
}

pub fn run_suite(ctx: &mut Context) -> Result<Vec<Check>, CliError> {
    let orders = ctx.orders()?;
    let crossing = ctx.crossing()?;
    let sys = ctx.cfg.system.clone();
    let k_list = if ctx.cfg.k_list.is_empty() {
        vec![1.0, 10.0, 100.0]
    } else {
        ctx.cfg.k_list.clone()
    };
    let seed = ctx.cfg.seed;
    let mut suite = Suite {
        ctx,
        checks: Vec::new(),
    };

    model_checks(&mut suite, &sys, seed)?;
    dims_checks(&mut suite, &sys, &orders, crossing.map(|c| c.r))?;
    for &r in &orders {
        let xi = suite.ctx.classify(r)?;
        let at_crossing = crossing.is_some_and(|c| c.r == r);
        match sys.case() {
            Case::I => case_one_checks(&mut suite, &sys, &xi, &k_list, at_crossing)?,
            Case::II => case_two_checks(&mut suite, &sys, &xi, &k_list, at_crossing)?,
        }
    }
    quantizer_checks(&mut suite, &sys, &orders, &k_list, seed)?;
    Ok(suite.checks)
}

fn model_checks(suite: &mut Suite, sys: &IsmSystem, seed: u64) -> Result<(), CliError> {
    let sep = sys.check_separation();
    suite.record(
        "model.separation",
        Ok((
            sep.passed,
            match &sep.offending {
                None => format!("min gap {:.3e}", sep.min_gap),
                Some((a, b)) => format!("{a} meets {b}"),
            },
        )),
    )?;

    let n = sys.outer_alphabet();
    suite.record(
        "model.additivity",
        (|| {
            let depth = depth_for(n, 8, 100_000);
            let mut worst = 0.0_f64;
            let root: f64 = level(n, 1)
                .iter()
                .map(|w| cylinder_mass(sys, w))
                .sum::<Result<f64, _>>()?;
            // In case ii the condensation part carries p₀ outside every outer piece.
            let expected = match sys.case() {
                Case::I => 1.0,
                Case::II => 1.0 - sys.p0(),
            };
            let mut ok = (root - expected).abs() <= 1e-12;
            for len in 0..depth {
                for w in level(n, len) {
                    let parent = cylinder_mass(sys, &w)?;
                    let mut children = 0.0;
                    for i in 0..n as usize {
                        children += cylinder_mass(sys, &w.child(i)?)?;
                    }
                    worst = worst.max(children - parent);
                    ok &= children <= parent * (1.0 + 1e-12);
                }
            }
            Ok((
                ok,
                format!("root sum {root:.16e}, worst excess {worst:.3e}, depth {depth}"),
            ))
        })(),
    )?;

    match sys.case() {
        Case::I => suite.record(
            "model.mass_recursion",
            (|| {
                let depth = depth_for(n, 12, 600_000);
                let mut worst = 0.0_f64;
                let mut count = 0usize;
                for len in 1..=depth {
                    for w in level(n, len) {
                        let a = sys.cylinder_mass_case1(&w)?;
                        let b = sys.cylinder_mass_case1_recursive(&w)?;
                        worst = worst.max((a - b).abs());
                        count += 1;
                    }
                }
                Ok((
                    worst <= 1e-12,
                    format!("{count} words, max |Δ| {worst:.3e}"),
                ))
            })(),
        )?,
        Case::II => suite.record(
            "model.case_two_total_mass",
            (|| {
                let depth = depth_for(n, 40, 200_000);
                let whole = Word::empty(sys.inner_alphabet())?;
                let mut total = 0.0;
                for len in 0..=depth {
                    for w in level(n, len) {
                        total += sys.patch_mass_case2(&w, Some(&whole))?;
                    }
                }
                let expected = 1.0 - (1.0 - sys.p0()).powi(depth as i32 + 1);
                let ok = (total - expected).abs() <= 1e-10;
                Ok((
                    ok,
                    format!("depth {depth}: {total:.16e} vs {expected:.16e}"),
                ))
            })(),
        )?,
    }

    suite.record(
        "model.sampling_frequencies",
        (|| {
            const SAMPLES: usize = 1_000_000;
            let pts = sample_batch(sys, SAMPLES, derive_seed(seed, 1000), DEFAULT_SAMPLE_EPS)?;
            let hull = sys.support_hull();
            let mut worst = 0.0_f64;
            let mut ok = true;
            let mut tested = 0;
            for len in 1..=2 {
                for w in level(n, len) {
                    let m = cylinder_mass(sys, &w)?;
                    if m < 0.01 {
                        continue;
                    }
                    let piece = hull.mapped(&sys.word_map(&w, Family::Outer)?);
                    let hits = pts.iter().filter(|p| piece.contains(**p, 1e-12)).count();
                    let freq = hits as f64 / SAMPLES as f64;
                    let sd = (m * (1.0 - m) / SAMPLES as f64).sqrt();
                    worst = worst.max((freq - m).abs() / sd);
                    ok &= (freq - m).abs() <= 4.0 * sd;
                    tested += 1;
                }
            }
            Ok((
                ok,
                format!("{tested} cylinders, worst deviation {worst:.2}σ"),
            ))
        })(),
    )?;

    suite.record(
        "model.normalize_idempotent",
        (|| {
            let once = sys.normalize()?;
            let twice = once.normalize()?;
            let factor = twice.normalization_scale() / once.normalization_scale();
            Ok((
                (factor - 1.0).abs() <= 1e-12,
                format!("second factor {factor:.16e}"),
            ))
        })(),
    )
}

fn exponent_inputs(sys: &IsmSystem) -> [(&'static str, Vec<f64>, Vec<f64>); 2] {
    [
        ("xi1", sys.t().to_vec(), sys.inner_ratios()),
        ("xi2", sys.branch_weights().to_vec(), sys.outer_ratios()),
    ]
}

fn dims_checks(
    suite: &mut Suite,
    sys: &IsmSystem,
    orders: &[f64],
    r_star: Option<f64>,
) -> Result<(), CliError> {
    let inputs = exponent_inputs(sys);
    for &r in orders {
        suite.record(
            format!("dims.root_residual@r={r}"),
            (|| {
                let mut worst = 0.0_f64;
                for (_, w, s) in &inputs {
                    let xi = solve_xi(w, s, r)?;
                    worst = worst.max((moment_sum(w, s, r, xi)? - 1.0).abs());
                }
                Ok((worst <= 1e-10, format!("max residual {worst:.3e}")))
            })(),
        )?;
        suite.record(
            format!("dims.solver_agreement@r={r}"),
            (|| {
                let mut worst = 0.0_f64;
                let solvers = root_solvers();
                for (_, w, s) in &inputs {
                    let vals = solvers
                        .names()
                        .iter()
                        .map(|n| solve_xi_with(solvers.get(n).expect("listed").as_ref(), w, s, r))
                        .collect::<Result<Vec<_>, _>>()?;
                    for v in &vals {
                        worst = worst.max((v - vals[0]).abs());
                    }
                }
                Ok((worst <= 1e-10, format!("max spread {worst:.3e}")))
            })(),
        )?;
        suite.record(
            format!("dims.moment_monotone@r={r}"),
            (|| {
                let mut ok = true;
                for (_, w, s) in &inputs {
                    let values = (0..=40)
                        .map(|i| moment_sum(w, s, r, 0.125 * i as f64))
                        .collect::<Result<Vec<_>, _>>()?;
                    ok &= values.windows(2).all(|p| p[1] < p[0]);
                }
                Ok((ok, "41-point grid on [0, 5]".into()))
            })(),
        )?;
        suite.record(
            format!("dims.derivative@r={r}"),
            (|| {
                let mut worst = 0.0_f64;
                for (_, w, s) in &inputs {
                    let d = xi_derivative(w, s, r)?;
                    let fd = stencil(w, s, r)?;
                    worst = worst.max((d - fd).abs() / d.abs().max(1e-3));
                }
                Ok((worst <= 1e-6, format!("max relative error {worst:.3e}")))
            })(),
        )?;
        suite.record(
            format!("dims.dimension_bounds@r={r}"),
            (|| {
                let lower = hausdorff_dim_nu(sys.t(), &sys.inner_ratios())?;
                let xi1 = solve_xi(sys.t(), &sys.inner_ratios(), r)?;
                let ok = lower <= xi1 + 1e-12
                    && xi1 <= similarity_dimension(&sys.inner_ratios()) + 1e-12
                    && solve_xi(sys.branch_weights(), &sys.outer_ratios(), r)?
                        <= similarity_dimension(&sys.outer_ratios()) + 1e-12;
                Ok((ok, format!("dim ν {lower:.10} ≤ ξ₁ {xi1:.10}")))
            })(),
        )?;
        suite.record(
            format!("dims.relabel_invariance@r={r}"),
            (|| {
                let a = suite_classify(sys, r)?;
                let b = suite_classify(&reversed(sys)?, r)?;
                let ok = a.regime.label() == b.regime.label() && (a.xi_r - b.xi_r).abs() <= 1e-10;
                Ok((ok, format!("{} vs {}", a.regime, b.regime)))
            })(),
        )?;
    }
    suite.record(
        "dims.small_order_limit",
        (|| {
            let (_, w, s) = &inputs[1];
            let v = [0.1, 0.05, 0.01]
                .iter()
                .map(|&r| solve_xi(w, s, r))
                .collect::<Result<Vec<_>, _>>()?;
            Ok((
                v[0] > v[1] && v[1] > v[2],
                format!("ξ₂ = {:.6e}, {:.6e}, {:.6e}", v[0], v[1], v[2]),
            ))
        })(),
    )?;
    if let Some(r) = r_star {
        suite.record(
            "dims.crossing",
            (|| {
                let xi = suite_classify(sys, r)?;
                let gap = (xi.xi1 - xi.xi2).abs();
                Ok((
                    gap <= 1e-8 && xi.regime.is_equal(),
                    format!("r* {r:.12}, gap {gap:.3e}"),
                ))
            })(),
        )?;
    }
    Ok(())
}

fn suite_classify(sys: &IsmSystem, r: f64) -> Result<XiReport, CliError> {
    Ok(ismq_core::dims::classify(sys, r)?)
}

fn case_one_checks(
    suite: &mut Suite,
    sys: &IsmSystem,
    xi: &XiReport,
    k_list: &[f64],
    at_crossing: bool,
) -> Result<(), CliError> {
    let r = xi.r;
    let (eta, eta_hi) = eta_bounds(sys, r)?;
    for &k in k_list {
        let rec = match suite.ctx.lambda(k, xi, true) {
            Ok(rec) => rec,
            Err(e @ CliError::Cap(_)) => return Err(e),
            Err(e) => {
                suite.record(format!("antichain.build@k={k},r={r}"), Err(e))?;
                continue;
            }
        };
        let tag = format!("k={k},r={r}");
        let words = rec.words.as_ref().expect("kept");
        suite.record(
            format!("antichain.maximal@{tag}"),
            Ok((
                verify_maximal_antichain(sys.outer_alphabet(), words.members()),
                format!("{} members", rec.n_kr),
            )),
        )?;
        let below = rec.max_ln_h < rec.ln_threshold;
        let above = rec.min_ln_h
            >= rec.ln_threshold + rec.min_ln_step - 1e-12 * rec.ln_threshold.abs().max(1.0);
        let step = rec.min_ln_step >= eta.ln() - 1e-12;
        suite.record(
            format!("antichain.threshold_sandwich@{tag}"),
            Ok((
                below && above && step,
                format!(
                    "ln h in [{:.6}, {:.6}], threshold {:.6}, min step {:.6}",
                    rec.min_ln_h, rec.max_ln_h, rec.ln_threshold, rec.min_ln_step
                ),
            )),
        )?;
        suite.record(
            format!("antichain.mass_unity@{tag}"),
            Ok((
                (rec.mass_sum - 1.0).abs() <= 1e-10,
                format!("Σ μ = {:.16e}", rec.mass_sum),
            )),
        )?;
        suite.record(
            format!("antichain.exponent_unity@{tag}"),
            Ok((
                (rec.unity_sum - 1.0).abs() <= 1e-9,
                format!("Σ = {:.16e}", rec.unity_sum),
            )),
        )?;
        if k > 1.0 {
            // Each step scales h by a factor in [η̲, η̄] and h(θ) = 1, which
            // pins both depths between two multiples of ln k.
            let lo = 1.0 + k.ln() / -eta.ln();
            let hi = 1.0 + (k.ln() - eta.ln()) / -eta_hi.ln();
            suite.record(
                format!("antichain.depth_window@{tag}"),
                Ok((
                    (rec.l1 as f64) > lo - 1e-9 && (rec.l2 as f64) <= hi + 1e-9,
                    format!(
                        "{lo:.4} < l1 {} ≤ l2 {} ≤ {hi:.4}; l/ln k in [{:.4}, {:.4}]",
                        rec.l1,
                        rec.l2,
                        rec.l1 as f64 / k.ln(),
                        rec.l2 as f64 / k.ln()
                    ),
                )),
            )?;
        }
        if at_crossing {
            let x = xi.exponent();
            let lower = (sys.p0() * rec.l1 as f64).powf(x);
            let upper = rec.l2 as f64 + 2.0;
            suite.record(
                format!("antichain.log_window@{tag}"),
                Ok((
                    lower <= rec.lambda_kr && rec.lambda_kr <= upper,
                    format!("{lower:.6} ≤ λ {:.6} ≤ {upper}", rec.lambda_kr),
                )),
            )?;
        }
    }
    Ok(())
}

fn case_two_checks(
    suite: &mut Suite,
    sys: &IsmSystem,
    xi: &XiReport,
    k_list: &[f64],
    at_crossing: bool,
) -> Result<(), CliError> {
    let r = xi.r;
    let (lo, hi) = pi_bounds(sys, r)?;
    for &k in k_list {
        let tag = format!("k={k},r={r}");
        let routes = antichain2::case_two_routes();
        let opts = suite.ctx.case_two_options();
        let evaluate = |name: &str| -> Result<_, CliError> {
            let route = routes.get(name).expect("registered");
            Ok(route.evaluate(sys, k, xi, &opts)?)
        };
        let rec = match evaluate("type-class") {
            Ok(rec) => rec,
            Err(e @ CliError::Cap(_)) => return Err(e),
            Err(e) => {
                suite.record(format!("antichain2.build@{tag}"), Err(e))?;
                continue;
            }
        };
        if rec.gamma_count + rec.patch_count <= 100_000 {
            suite.record(
                format!("antichain2.route_agreement@{tag}"),
                (|| {
                    let other = evaluate("enumerate")?;
                    let ok = other.gamma_count == rec.gamma_count
                        && other.psi_count == rec.psi_count
                        && other.patch_count == rec.patch_count
                        && (other.lambda_tilde - rec.lambda_tilde).abs()
                            <= 1e-10 * rec.lambda_tilde;
                    Ok((
                        ok,
                        format!("λ̃ {:.16e} vs {:.16e}", rec.lambda_tilde, other.lambda_tilde),
                    ))
                })(),
            )?;
        }
        suite.record(
            format!("antichain2.gamma_unity@{tag}"),
            Ok((
                (rec.gamma_unity - 1.0).abs() <= 1e-9,
                format!("Σ = {:.16e}", rec.gamma_unity),
            )),
        )?;
        let pinch_lo = (rec.l1 as f64) * lo.ln() < k * lo.ln();
        let pinch_hi = k * lo.ln() <= (rec.l2 as f64 - 1.0) * hi.ln();
        suite.record(
            format!("antichain2.depth_pinch@{tag}"),
            Ok((
                pinch_lo && pinch_hi,
                format!("l1 {}, l2 {}", rec.l1, rec.l2),
            )),
        )?;
        let next: Result<_, CliError> = routes
            .get("type-class")
            .expect("registered")
            .evaluate(sys, k + 1.0, xi, &opts)
            .map_err(Into::into);
        if k >= 2.0 {
            let g = (rec.phi_kr as f64).ln() / k;
            suite.record(
                format!("antichain2.phi_growth@{tag}"),
                Ok((
                    g >= PHI_WINDOW.0 && g <= PHI_WINDOW.1,
                    format!(
                        "ln φ / k = {g:.4}, window [{}, {}]",
                        PHI_WINDOW.0, PHI_WINDOW.1
                    ),
                )),
            )?;
        }
        suite.record(
            format!("antichain2.phi_step@{tag}"),
            (|| {
                let next = next?;
                let ratio = next.phi_kr as f64 / rec.phi_kr as f64;
                Ok((ratio <= RATIO_BOUND, format!("φ(k+1)/φ(k) = {ratio:.4}")))
            })(),
        )?;
        if at_crossing {
            let x = xi.exponent();
            let scaled = rec.patch_count as f64 * lo.powf(k * x);
            let upper = (rec.l2 as f64 + 2.0) * lo.powf(-x);
            suite.record(
                format!("antichain2.term_sandwich@{tag}"),
                Ok((
                    rec.l1 as f64 <= scaled && scaled <= upper,
                    format!("{} ≤ {scaled:.6} ≤ {upper:.6}", rec.l1),
                )),
            )?;
            suite.record(
                format!("antichain2.log_window@{tag}"),
                Ok((
                    rec.l1 as f64 <= rec.lambda_tilde && rec.lambda_tilde <= rec.l2 as f64 + 2.0,
                    format!("{} ≤ λ̃ {:.6} ≤ {}", rec.l1, rec.lambda_tilde, rec.l2 + 2),
                )),
            )?;
        }
    }
    Ok(())
}

fn quantizer_checks(
    suite: &mut Suite,
    sys: &IsmSystem,
    orders: &[f64],
    k_list: &[f64],
    seed: u64,
) -> Result<(), CliError> {
    let Some(&r) = orders.first() else {
        return Ok(());
    };
    let xi = suite.ctx.classify(r)?;
    let k = k_list
        .iter()
        .copied()
        .find(|&k| k > 1.0)
        .unwrap_or(k_list[0]);
    let b = bound_point(suite.ctx, k, &xi)?;
    let opts = suite.ctx.optimize_options()?;

    suite.record(
        "quantizer.scale_covariance",
        (|| {
            let pts = sample_batch(sys, 4096, derive_seed(seed, 2000), DEFAULT_SAMPLE_EPS)?;
            // A power of two keeps the scaled coordinates exact.
            let lam = 2.0;
            let scale = |v: &[Point]| -> Vec<Point> {
                v.iter().map(|p| [lam * p[0], lam * p[1]]).collect()
            };
            let (a, _) = estimate_error(&pts, &b.codebook, r)?;
            let (c, _) = estimate_error(&scale(&pts), &scale(&b.codebook), r)?;
            let rel = (c - lam.powf(r) * a).abs() / c;
            Ok((rel <= 1e-12, format!("relative error {rel:.3e}")))
        })(),
    )?;

    suite.record(
        "quantizer.plug_in_consistency",
        (|| {
            let (e1, s1) = estimate_error(
                &sample_batch(sys, 1_000_000, derive_seed(seed, 2001), DEFAULT_SAMPLE_EPS)?,
                &b.codebook,
                r,
            )?;
            let mut sum = 0.0;
            let mut var = 0.0;
            for i in 0..10 {
                let pts = sample_batch(
                    sys,
                    1_000_000,
                    derive_seed(derive_seed(seed, 2002), i),
                    DEFAULT_SAMPLE_EPS,
                )?;
                let (e, s) = estimate_error(&pts, &b.codebook, r)?;
                sum += e;
                var += s * s;
            }
            let (e2, s2) = (sum / 10.0, var.sqrt() / 10.0);
            let se = (s1 * s1 + s2 * s2).sqrt();
            Ok((
                (e1 - e2).abs() <= 4.0 * se,
                format!("{e1:.6e} vs {e2:.6e} ± {se:.2e}"),
            ))
        })(),
    )?;

    suite.record(
        "quantizer.upper_bound",
        (|| {
            let pts = sample_batch(sys, 200_000, derive_seed(seed, 2003), DEFAULT_SAMPLE_EPS)?;
            let (e, se) = estimate_error(&pts, &b.codebook, r)?;
            let limit = b.upper_bound * (1.0 + MC_REL) + MC_SIGMAS * se;
            Ok((e <= limit, format!("n {}: {e:.6e} ≤ {limit:.6e}", b.n)))
        })(),
    )?;

    suite.record(
        "quantizer.feasibility_dominance",
        (|| {
            let count = 20_000.max(20 * b.n);
            let pts = sample_batch(sys, count, derive_seed(seed, 2004), DEFAULT_SAMPLE_EPS)?;
            let (direct, _) = estimate_error(&pts, &b.codebook, r)?;
            let mut o = opts.clone();
            o.warm_start = Some(b.codebook.clone());
            let est = optimize_codebook(&pts, b.n, r, 1, derive_seed(seed, 2005), &o)?;
            Ok((
                est.e_r_pow_r <= direct,
                format!("{:.6e} ≤ {direct:.6e}", est.e_r_pow_r),
            ))
        })(),
    )?;

    // Scaled errors at antichain sizes, in the non-EQUAL regimes.
    if sys.case() == Case::II {
        return Ok(());
    }
    for &r in orders {
        let xi = suite.ctx.classify(r)?;
        if xi.regime.is_equal() {
            continue;
        }
        let sizes: Vec<f64> = k_list.iter().copied().filter(|&k| k > 1.0).collect();
        if sizes.len() < 2 {
            continue;
        }
        let mut scaled = Vec::new();
        for (i, &k) in sizes.iter().enumerate() {
            let b = bound_point(suite.ctx, k, &xi)?;
            if b.n > 5_000 {
                break;
            }
            let pts = sample_batch(
                sys,
                40_000.max(20 * b.n),
                derive_seed(seed, 3000 + i as u64),
                DEFAULT_SAMPLE_EPS,
            )?;
            let mut o = opts.clone();
            o.warm_start = Some(b.codebook);
            let est = optimize_codebook(&pts, b.n, r, 1, derive_seed(seed, 4000 + i as u64), &o)?;
            scaled.push(est.scaled(xi.xi_r));
        }
        if scaled.len() >= 2 {
            let max = scaled.iter().copied().fold(0.0, f64::max);
            let min = scaled.iter().copied().fold(f64::INFINITY, f64::min);
            suite.record(
                format!("quantizer.scaled_window@r={r}"),
                Ok((
                    min > 0.0 && max / min <= RATIO_BOUND,
                    format!("n^(r/ξ)·e in [{min:.4e}, {max:.4e}]"),
                )),
            )?;
        }
    }
    Ok(())
}
