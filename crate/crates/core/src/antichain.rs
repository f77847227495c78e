//! Case-(i) threshold antichains `Λₖ,ᵣ`.
//!
//! With `h(σ) = μ(E_σ)·s_σʳ` (space normalized so that `diam K = 1`),
//! `Λₖ,ᵣ` collects the words at which `h` first drops strictly below
//! `η̲ᵣ/k`. One codebook point per member realizes the upper bound
//! `e^r_{Nₖ,ᵣ,r}(μ) ≤ Σ h(σ)`.
//!
//! Everything is carried in logarithms so that `k` may be astronomically
//! large; the masses use the split `μ(E_σ) = p_σ + p₀A(σ)` with
//! `A(σ∗i) = tᵢ(A(σ) + p_σ)`, which keeps every term positive.

use thiserror::Error;

use crate::dims::{classify, DimsError, XiReport};
use crate::model::{Case, IsmSystem, ModelError, Point};
use crate::numeric::{CompensatedSum, LogSumExp};
use crate::tree::{TreeNode, Visitor, Walk};
use crate::words::{AntichainError, AntichainSet, Word, WordError};

/// Default cap on the number of antichain members.
pub const DEFAULT_CAP: usize = 5_000_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BuildError {
    #[error("threshold level k = {0} must be a finite number ≥ 1")]
    BadK(f64),
    #[error("antichain exceeds the cap of {cap} words at k = {k}")]
    CapExceeded { cap: usize, k: f64 },
    #[error("descent at k = {k} passed MAX_DEPTH = {depth}")]
    TooDeep { k: f64, depth: usize },
    #[error(
        "weight increases from parent to child {word} ({ln_parent} -> {ln_child} in logs); \
         the pieces overlap, check separation"
    )]
    NotMonotone {
        word: String,
        ln_parent: f64,
        ln_child: f64,
    },
    #[error("record was built without member words")]
    WordsElided,
    #[error("count overflow in {0}")]
    Overflow(&'static str),
    #[error("unknown evaluation route `{0}`")]
    UnknownRoute(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Dims(#[from] DimsError),
    #[error(transparent)]
    Antichain(#[from] AntichainError),
    #[error(transparent)]
    Word(#[from] WordError),
}

fn check_k(k: f64) -> Result<(), BuildError> {
    if !(k >= 1.0 && k.is_finite()) {
        return Err(BuildError::BadK(k));
    }
    Ok(())
}

/// `(η̲ᵣ, η̄ᵣ)`: the extreme one-step factors `min/max{p₀tᵢ+pᵢ, tᵢ}·sᵢʳ`.
pub fn eta_bounds(sys: &IsmSystem, r: f64) -> Result<(f64, f64), BuildError> {
    if sys.case() != Case::I {
        return Err(ModelError::WrongCase("Case (i)").into());
    }
    let p0 = sys.p0();
    let mut lower = f64::INFINITY;
    let mut upper = 0.0_f64;
    for ((p, t), s) in sys
        .branch_weights()
        .iter()
        .zip(sys.t())
        .zip(sys.outer_ratios())
    {
        let a = p0 * t + p;
        let sr = s.powf(r);
        lower = lower.min(a.min(*t) * sr);
        upper = upper.max(a.max(*t) * sr);
    }
    Ok((lower, upper))
}

#[derive(Clone, Debug)]
pub struct BuildOptions {
    pub cap: usize,
    /// Keep the member words; otherwise only aggregates are returned.
    pub keep_words: bool,
}

impl Default for BuildOptions {
    fn default() -> Self {
        Self {
            cap: DEFAULT_CAP,
            keep_words: true,
        }
    }
}

/// One `Λₖ,ᵣ` with its aggregates.
#[derive(Clone, Debug)]
pub struct AntichainRecord {
    pub k: f64,
    pub r: f64,
    pub xi: XiReport,
    pub words: Option<AntichainSet>,
    pub n_kr: usize,
    /// `Σ h(σ)^{ξᵣ/(ξᵣ+r)}`.
    pub lambda_kr: f64,
    pub upper_bound: f64,
    pub ln_upper_bound: f64,
    pub l1: usize,
    pub l2: usize,
    /// `ln(η̲ᵣ/k)`.
    pub ln_threshold: f64,
    /// `Σ μ(E_σ)`.
    pub mass_sum: f64,
    /// `Σ (p_σ s_σʳ)^{ξ₂,ᵣ/(ξ₂,ᵣ+r)}`.
    pub unity_sum: f64,
    /// Smallest `ln h(σ)` over members.
    pub min_ln_h: f64,
    /// Largest `ln h(σ)` over members.
    pub max_ln_h: f64,
    /// Smallest `ln h(σ) − ln h(σ⁻)` over members.
    pub min_ln_step: f64,
}

impl AntichainRecord {
    /// `(upper, lower_raw)`; see [`error_bounds`].
    pub fn error_bounds(&self) -> (f64, f64) {
        error_bounds(self)
    }
}

/// `(Σ h(σ), Σ h(σ))`. The first is a rigorous upper bound on `e^r` at
/// `n = Nₖ,ᵣ`. The second is the same sum reported as the raw lower-side
/// quantity: the true lower bound carries an unknown constant factor and
/// is never claimed numerically.
pub fn error_bounds(rec: &AntichainRecord) -> (f64, f64) {
    (rec.upper_bound, rec.upper_bound)
}

struct Ctx {
    ln_p0: f64,
    ln_p: Vec<f64>,
    ln_t: Vec<f64>,
    ln_sr: Vec<f64>,
}

struct Node {
    ln_p: f64,
    ln_a: f64,
    ln_sr: f64,
    ln_mass: f64,
}

fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

impl TreeNode for Node {
    type Ctx = Ctx;

    fn ln_weight(&self) -> f64 {
        self.ln_mass + self.ln_sr
    }

    fn child(&self, ctx: &Ctx, i: usize) -> Node {
        let ln_p = self.ln_p + ctx.ln_p[i];
        let ln_a = ctx.ln_t[i] + log_add(self.ln_a, self.ln_p);
        Node {
            ln_p,
            ln_a,
            ln_sr: self.ln_sr + ctx.ln_sr[i],
            ln_mass: log_add(ln_p, ctx.ln_p0 + ln_a),
        }
    }
}

struct Collector {
    alphabet: u16,
    x: f64,
    x2: f64,
    keep_words: bool,
    words: Vec<Word>,
    n: usize,
    l1: usize,
    l2: usize,
    lambda: CompensatedSum,
    upper: LogSumExp,
    mass: CompensatedSum,
    unity: CompensatedSum,
    min_ln_h: f64,
    max_ln_h: f64,
    min_ln_step: f64,
}

impl Collector {
    fn new(alphabet: u16, x: f64, x2: f64, keep_words: bool) -> Self {
        Self {
            alphabet,
            x,
            x2,
            keep_words,
            words: Vec::new(),
            n: 0,
            l1: usize::MAX,
            l2: 0,
            lambda: CompensatedSum::new(),
            upper: LogSumExp::new(),
            mass: CompensatedSum::new(),
            unity: CompensatedSum::new(),
            min_ln_h: f64::INFINITY,
            max_ln_h: f64::NEG_INFINITY,
            min_ln_step: f64::INFINITY,
        }
    }
}

impl Visitor<Node> for Collector {
    fn internal(&mut self, _: &[u16], _: &Node) -> Result<(), BuildError> {
        Ok(())
    }

    fn leaf(&mut self, path: &[u16], node: &Node, parent: Option<&Node>) -> Result<(), BuildError> {
        let ln_h = node.ln_weight();
        self.n += 1;
        self.l1 = self.l1.min(path.len());
        self.l2 = self.l2.max(path.len());
        self.lambda.add((self.x * ln_h).exp());
        self.upper.add_ln(ln_h);
        self.mass.add(node.ln_mass.exp());
        self.unity.add((self.x2 * (node.ln_p + node.ln_sr)).exp());
        self.min_ln_h = self.min_ln_h.min(ln_h);
        self.max_ln_h = self.max_ln_h.max(ln_h);
        if let Some(parent) = parent {
            self.min_ln_step = self.min_ln_step.min(ln_h - parent.ln_weight());
        }
        if self.keep_words {
            self.words.push(Word::new(self.alphabet, path.to_vec())?);
        }
        Ok(())
    }

    fn merge(&mut self, other: Self) {
        self.n += other.n;
        self.l1 = self.l1.min(other.l1);
        self.l2 = self.l2.max(other.l2);
        self.lambda.merge(&other.lambda);
        self.upper.merge(&other.upper);
        self.mass.merge(&other.mass);
        self.unity.merge(&other.unity);
        self.min_ln_h = self.min_ln_h.min(other.min_ln_h);
        self.max_ln_h = self.max_ln_h.max(other.max_ln_h);
        self.min_ln_step = self.min_ln_step.min(other.min_ln_step);
        self.words.extend(other.words);
    }
}

/// Builds `Λₖ,ᵣ`. The system should be normalized (`diam K = 1`).
pub fn build_lambda(sys: &IsmSystem, k: f64, r: f64) -> Result<AntichainRecord, BuildError> {
    build_lambda_with(sys, k, r, &BuildOptions::default())
}

pub fn build_lambda_with(
    sys: &IsmSystem,
    k: f64,
    r: f64,
    opts: &BuildOptions,
) -> Result<AntichainRecord, BuildError> {
    check_k(k)?;
    let xi = classify(sys, r)?;
    build_lambda_at(sys, k, &xi, opts)
}

/// As [`build_lambda_with`], reusing an exponent report for the same `r`.
pub fn build_lambda_at(
    sys: &IsmSystem,
    k: f64,
    xi: &XiReport,
    opts: &BuildOptions,
) -> Result<AntichainRecord, BuildError> {
    check_k(k)?;
    let r = xi.r;
    let (eta_lower, _) = eta_bounds(sys, r)?;
    let ctx = Ctx {
        ln_p0: sys.p0().ln(),
        ln_p: sys.branch_weights().iter().map(|p| p.ln()).collect(),
        ln_t: sys.t().iter().map(|t| t.ln()).collect(),
        ln_sr: sys.outer_ratios().iter().map(|s| r * s.ln()).collect(),
    };
    let ln_threshold = eta_lower.ln() - k.ln();
    let root = Node {
        ln_p: 0.0,
        ln_a: f64::NEG_INFINITY,
        ln_sr: 0.0,
        ln_mass: 0.0,
    };
    let alphabet = sys.outer_alphabet();
    let x = xi.exponent();
    let x2 = xi.xi2 / (xi.xi2 + r);
    let walk = Walk {
        ctx: &ctx,
        alphabet: alphabet as usize,
        ln_threshold,
        cap: opts.cap,
        k,
    };
    let mut c = walk.run(root, || Collector::new(alphabet, x, x2, opts.keep_words))?;
    let words = if opts.keep_words {
        c.words.sort();
        Some(AntichainSet::new(alphabet, std::mem::take(&mut c.words))?)
    } else {
        None
    };
    Ok(AntichainRecord {
        k,
        r,
        xi: *xi,
        words,
        n_kr: c.n,
        lambda_kr: c.lambda.value(),
        upper_bound: c.upper.value(),
        ln_upper_bound: c.upper.ln_value(),
        l1: c.l1,
        l2: c.l2,
        ln_threshold,
        mass_sum: c.mass.value(),
        unity_sum: c.unity.value(),
        min_ln_h: c.min_ln_h,
        max_ln_h: c.max_ln_h,
        min_ln_step: c.min_ln_step,
    })
}

/// Where a codebook point sits inside its cylinder.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AnchorRule {
    /// `f_σ` applied to the fixed point of `f₁`.
    FixedPoint,
    /// `f_σ` applied to the midpoint of `hull K` (dimension 1 only; falls
    /// back to the hull's vertex centroid in the plane).
    Midpoint,
}

/// One point per member of `Λₖ,ᵣ`, in member order.
pub fn codebook_from_antichain(
    sys: &IsmSystem,
    rec: &AntichainRecord,
    rule: AnchorRule,
) -> Result<Vec<Point>, BuildError> {
    let words = rec.words.as_ref().ok_or(BuildError::WordsElided)?;
    let anchor = match rule {
        AnchorRule::FixedPoint => sys.outer_anchor(),
        AnchorRule::Midpoint => {
            let v = sys.support_hull().vertices();
            let n = v.len() as f64;
            [
                v.iter().map(|p| p[0]).sum::<f64>() / n,
                v.iter().map(|p| p[1]).sum::<f64>() / n,
            ]
        }
    };
    words
        .members()
        .iter()
        .map(|w| Ok(sys.word_map(w, crate::model::Family::Outer)?.apply(anchor)))
        .collect()
}

/// Records for every `k` in `k_list` at one order `r`.
pub fn lambda_series(
    sys: &IsmSystem,
    r: f64,
    k_list: &[f64],
    opts: &BuildOptions,
) -> Result<Vec<AntichainRecord>, BuildError> {
    let xi = classify(sys, r)?;
    k_list
        .iter()
        .map(|&k| build_lambda_at(sys, k, &xi, opts))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dims::find_crossing_r;
    use crate::model::{Dimension, Similitude};
    use crate::words::verify_maximal_antichain;
    use approx::assert_relative_eq;

    fn example() -> IsmSystem {
        IsmSystem::case_one(
            Dimension::One,
            vec![
                Similitude::line(0.125, 1.0, 0.0).unwrap(),
                Similitude::line(0.125, 1.0, 0.875).unwrap(),
            ],
            vec![0.05, 0.475, 0.475],
            vec![1.0 / 3.0, 2.0 / 3.0],
        )
        .unwrap()
    }

    /// Brute-force oracle: scan each level, keep words with
    /// `h(σ⁻) ≥ thr > h(σ)` using the closed-form mass.
    fn brute_force(sys: &IsmSystem, k: f64, r: f64, max_len: usize) -> Vec<Word> {
        let (eta, _) = eta_bounds(sys, r).unwrap();
        let thr = eta / k;
        let h = |w: &Word| -> f64 {
            sys.cylinder_mass_case1(w).unwrap() * 0.125_f64.powf(r * w.len() as f64)
        };
        let mut out = Vec::new();
        let mut level = vec![Word::empty(2).unwrap()];
        for _ in 0..max_len {
            let mut next = Vec::new();
            for w in &level {
                for i in 0..2 {
                    let c = w.child(i).unwrap();
                    if h(w) >= thr && thr > h(&c) {
                        out.push(c.clone());
                    }
                    next.push(c);
                }
            }
            level = next;
        }
        out.sort();
        out
    }

    #[test]
    fn eta_example() {
        let (lo, hi) = eta_bounds(&example(), 2.0).unwrap();
        assert_relative_eq!(lo, 1.0 / 192.0, epsilon = 1e-15);
        assert_relative_eq!(hi, 1.0 / 96.0, epsilon = 1e-15);
    }

    #[test]
    fn eta_rejects_case_two() {
        let f = vec![Similitude::line(0.125, 1.0, 0.0).unwrap()];
        let g = vec![Similitude::line(0.125, 1.0, 0.5).unwrap()];
        let sys = IsmSystem::case_two(Dimension::One, f, g, vec![0.5, 0.5], vec![1.0]).unwrap();
        assert!(eta_bounds(&sys, 2.0).is_err());
    }

    #[test]
    fn level_two_at_k_one() {
        let sys = example();
        let rec = build_lambda(&sys, 1.0, 2.0).unwrap();
        let words = rec.words.as_ref().unwrap();
        let text: Vec<String> = words.members().iter().map(|w| w.to_string()).collect();
        assert_eq!(text, ["1.1", "1.2", "2.1", "2.2"]);
        assert_eq!(rec.n_kr, 4);
        assert_relative_eq!(rec.upper_bound, 1.0 / 4096.0, epsilon = 1e-15);
        assert_eq!(rec.error_bounds(), (rec.upper_bound, rec.upper_bound));
    }

    #[test]
    fn agrees_with_brute_force() {
        let sys = example();
        for r in [0.5, 2.0, 5.0] {
            for k in [1.0, 3.0, 10.0, 40.0, 250.0] {
                let rec = build_lambda(&sys, k, r).unwrap();
                let oracle = brute_force(&sys, k, r, rec.l2 + 2);
                assert_eq!(rec.words.unwrap().into_members(), oracle, "k={k} r={r}");
            }
        }
    }

    #[test]
    fn aggregates_match_words() {
        let sys = example();
        let full = build_lambda(&sys, 500.0, 2.0).unwrap();
        let lean = build_lambda_with(
            &sys,
            500.0,
            2.0,
            &BuildOptions {
                keep_words: false,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(lean.words.is_none());
        assert_eq!(full.n_kr, lean.n_kr);
        assert_eq!(full.lambda_kr.to_bits(), lean.lambda_kr.to_bits());
        let words = full.words.as_ref().unwrap();
        assert!(words.is_maximal());
        let x = full.xi.exponent();
        let mut lam = 0.0;
        let mut upper = 0.0;
        for w in words.members() {
            let h = sys.cylinder_mass_case1(w).unwrap() * 0.125_f64.powf(2.0 * w.len() as f64);
            lam += h.powf(x);
            upper += h;
        }
        assert_relative_eq!(lam, full.lambda_kr, max_relative = 1e-12);
        assert_relative_eq!(upper, full.upper_bound, max_relative = 1e-12);
    }

    #[test]
    fn invariants_over_k() {
        let sys = example();
        let (eta, _) = eta_bounds(&sys, 2.0).unwrap();
        for k in [1.0, 10.0, 100.0, 1000.0, 1e4] {
            let rec = build_lambda(&sys, k, 2.0).unwrap();
            assert!(verify_maximal_antichain(
                2,
                rec.words.as_ref().unwrap().members()
            ));
            assert!((rec.mass_sum - 1.0).abs() < 1e-10);
            assert!((rec.unity_sum - 1.0).abs() < 1e-9);
            assert!(rec.max_ln_h < rec.ln_threshold);
            assert!(rec.min_ln_h >= rec.ln_threshold + rec.min_ln_step - 1e-12);
            assert!(rec.min_ln_step >= eta.ln() - 1e-12);
            assert!(rec.l1 <= rec.l2);
            assert!(rec.upper_bound > 0.0);
        }
    }

    #[test]
    fn enormous_k_stays_finite() {
        let sys = example();
        let rec = build_lambda_with(
            &sys,
            1e200,
            20.0,
            &BuildOptions {
                keep_words: false,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(rec.ln_upper_bound.is_finite());
        assert!(rec.ln_upper_bound < -400.0);
        assert!((rec.mass_sum - 1.0).abs() < 1e-10);
    }

    #[test]
    fn cap_is_enforced() {
        let sys = example();
        let err = build_lambda_with(
            &sys,
            1e6,
            2.0,
            &BuildOptions {
                cap: 10,
                keep_words: false,
            },
        )
        .unwrap_err();
        assert!(matches!(err, BuildError::CapExceeded { cap: 10, .. }));
        assert!(err.to_string().contains("10"));
    }

    #[test]
    fn rejects_small_k() {
        assert!(matches!(
            build_lambda(&example(), 0.5, 2.0),
            Err(BuildError::BadK(_))
        ));
    }

    #[test]
    fn codebook_points_sit_in_their_cylinders() {
        let sys = example();
        let rec = build_lambda(&sys, 50.0, 2.0).unwrap();
        for rule in [AnchorRule::FixedPoint, AnchorRule::Midpoint] {
            let pts = codebook_from_antichain(&sys, &rec, rule).unwrap();
            assert_eq!(pts.len(), rec.n_kr);
            for (w, p) in rec.words.as_ref().unwrap().members().iter().zip(&pts) {
                let f = sys.word_map(w, crate::model::Family::Outer).unwrap();
                let (a, b) = (f.apply([0.0, 0.0])[0], f.apply([1.0, 0.0])[0]);
                assert!(p[0] >= a.min(b) - 1e-15 && p[0] <= a.max(b) + 1e-15);
            }
        }
    }

    #[test]
    fn log_window_at_crossing() {
        let sys = example();
        let c = find_crossing_r(&sys, 0.01, 20.0).unwrap();
        let recs =
            lambda_series(&sys, c.r, &[10.0, 100.0, 1000.0], &BuildOptions::default()).unwrap();
        for rec in recs {
            let x = rec.xi.exponent();
            assert!(rec.lambda_kr <= rec.l2 as f64 + 2.0);
            assert!(rec.lambda_kr >= (sys.p0() * rec.l1 as f64).powf(x));
        }
    }
}
