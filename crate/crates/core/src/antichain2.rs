//! Case-(ii) antichains: `Γₖ,ᵣ` over the outer alphabet, the inner
//! antichains `Γₖ,ᵣ(σ)`, the ancestor set `Ψₖ,ᵣ` and the sum `λ̃ₖ,ᵣ`.
//!
//! All thresholds are `π̲ᵣᵏ`. Outer words carry the weight `p_σ s_σʳ`;
//! an inner word `ρ` hanging off `σ` carries `p_σ s_σʳ · t_ρ c_ρʳ`.
//!
//! Two evaluation routes produce a [`CaseTwoRecord`]:
//!
//! * `enumerate` walks every word. It is exact but the number of words
//!   grows like `π̲^{-k}`.
//! * `type-class` groups words by their symbol-count vector. The weight of
//!   a word only depends on that vector, so each class is handled once and
//!   weighted by how many words it holds.

use std::collections::BTreeMap;
use std::sync::Arc;

use rayon::prelude::*;

use crate::antichain::{BuildError, DEFAULT_CAP};
use crate::dims::{classify, XiReport};
use crate::model::{Case, Family, IsmSystem, ModelError, Point};
use crate::numeric::{strictly_below, CompensatedSum, LogSumExp};
use crate::registry::{Named, Registry};
use crate::tree::{TreeNode, Visitor, Walk};
use crate::words::{AntichainSet, Word, MAX_DEPTH};

fn require_case_two(sys: &IsmSystem) -> Result<(), BuildError> {
    if sys.case() != Case::II {
        return Err(ModelError::WrongCase("Case (ii)").into());
    }
    Ok(())
}

fn check_k(k: f64) -> Result<(), BuildError> {
    if !(k >= 1.0 && k.is_finite()) {
        return Err(BuildError::BadK(k));
    }
    Ok(())
}

/// `(π̲ᵣ, π̄ᵣ)` over `{pᵢsᵢʳ} ∪ {tⱼcⱼʳ}`.
pub fn pi_bounds(sys: &IsmSystem, r: f64) -> Result<(f64, f64), BuildError> {
    require_case_two(sys)?;
    let outer = sys
        .branch_weights()
        .iter()
        .zip(sys.outer_ratios())
        .map(|(p, s)| p * s.powf(r));
    let inner = sys
        .t()
        .iter()
        .zip(sys.inner_ratios())
        .map(|(t, c)| t * c.powf(r));
    let all: Vec<f64> = outer.chain(inner).collect();
    let lo = all.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = all.iter().copied().fold(0.0, f64::max);
    Ok((lo, hi))
}

/// Per-symbol log factors and the log threshold `k ln π̲ᵣ`.
struct Factors {
    outer: Vec<f64>,
    inner: Vec<f64>,
    ln_threshold: f64,
}

impl Factors {
    fn new(sys: &IsmSystem, k: f64, r: f64) -> Result<Self, BuildError> {
        check_k(k)?;
        let (lo, _) = pi_bounds(sys, r)?;
        Ok(Self {
            outer: sys
                .branch_weights()
                .iter()
                .zip(sys.outer_ratios())
                .map(|(p, s)| p.ln() + r * s.ln())
                .collect(),
            inner: sys
                .t()
                .iter()
                .zip(sys.inner_ratios())
                .map(|(t, c)| t.ln() + r * c.ln())
                .collect(),
            ln_threshold: k * lo.ln(),
        })
    }
}

struct Product {
    ln_w: f64,
}

impl TreeNode for Product {
    type Ctx = Vec<f64>;

    fn ln_weight(&self) -> f64 {
        self.ln_w
    }

    fn child(&self, ctx: &Vec<f64>, i: usize) -> Product {
        Product {
            ln_w: self.ln_w + ctx[i],
        }
    }
}

/// Collects the words of one walk.
struct WordSink {
    alphabet: u16,
    internal: Vec<Word>,
    leaves: Vec<Word>,
}

impl Visitor<Product> for WordSink {
    fn internal(&mut self, path: &[u16], _: &Product) -> Result<(), BuildError> {
        self.internal.push(Word::new(self.alphabet, path.to_vec())?);
        Ok(())
    }

    fn leaf(&mut self, path: &[u16], _: &Product, _: Option<&Product>) -> Result<(), BuildError> {
        self.leaves.push(Word::new(self.alphabet, path.to_vec())?);
        Ok(())
    }

    fn merge(&mut self, other: Self) {
        self.internal.extend(other.internal);
        self.leaves.extend(other.leaves);
    }
}

fn walk_words(
    factors: &Vec<f64>,
    ln_start: f64,
    ln_threshold: f64,
    k: f64,
    cap: usize,
) -> Result<WordSink, BuildError> {
    let alphabet = factors.len() as u16;
    let walk = Walk {
        ctx: factors,
        alphabet: factors.len(),
        ln_threshold,
        cap,
        k,
    };
    let mut sink = walk.run(Product { ln_w: ln_start }, || WordSink {
        alphabet,
        internal: Vec::new(),
        leaves: Vec::new(),
    })?;
    sink.internal.sort();
    sink.leaves.sort();
    Ok(sink)
}

fn ln_outer_weight(f: &Factors, sigma: &Word) -> f64 {
    sigma.indices().map(|i| f.outer[i]).sum()
}

/// `Γₖ,ᵣ`: outer words with `p_{σ⁻}s_{σ⁻}ʳ ≥ π̲ᵣᵏ > p_σ s_σʳ`.
pub fn build_gamma(sys: &IsmSystem, k: f64, r: f64) -> Result<AntichainSet, BuildError> {
    let f = Factors::new(sys, k, r)?;
    let sink = walk_words(&f.outer, 0.0, f.ln_threshold, k, DEFAULT_CAP)?;
    Ok(AntichainSet::new(sys.outer_alphabet(), sink.leaves)?)
}

/// `Γₖ,ᵣ(σ)`: inner words `ρ` with
/// `p_σ s_σʳ t_{ρ⁻}c_{ρ⁻}ʳ ≥ π̲ᵣᵏ > p_σ s_σʳ t_ρ c_ρʳ`, where `t_θ c_θʳ = 1`.
/// Empty when `p_σ s_σʳ` is already below the threshold.
pub fn build_gamma_sigma(
    sys: &IsmSystem,
    sigma: &Word,
    k: f64,
    r: f64,
) -> Result<AntichainSet, BuildError> {
    let f = Factors::new(sys, k, r)?;
    if sigma.alphabet() != sys.outer_alphabet() {
        return Err(ModelError::Word(crate::words::WordError::AlphabetMismatch {
            left: sys.outer_alphabet(),
            right: sigma.alphabet(),
        })
        .into());
    }
    let ln_start = ln_outer_weight(&f, sigma);
    if strictly_below(ln_start, f.ln_threshold) {
        return Ok(AntichainSet::new(sys.inner_alphabet(), Vec::new())?);
    }
    let sink = walk_words(&f.inner, ln_start, f.ln_threshold, k, DEFAULT_CAP)?;
    Ok(AntichainSet::new(sys.inner_alphabet(), sink.leaves)?)
}

/// `Ψₖ,ᵣ` as a count plus, when requested, its members in sorted order.
#[derive(Clone, Debug, PartialEq)]
pub struct PsiSet {
    pub count: u128,
    pub words: Option<Vec<Word>>,
}

/// `Ψₖ,ᵣ`: every word shorter than `l̃₁ₖ` together with every longer word
/// that strictly precedes a member of `Γₖ,ᵣ`. Both parts are proper
/// prefixes of `Γₖ,ᵣ` members, so this is the set of internal nodes of the
/// threshold descent. `include_root` controls whether `θ` is counted.
pub fn build_psi(
    sys: &IsmSystem,
    k: f64,
    r: f64,
    include_root: bool,
    enumerate: bool,
) -> Result<PsiSet, BuildError> {
    if enumerate {
        let f = Factors::new(sys, k, r)?;
        let sink = walk_words(&f.outer, 0.0, f.ln_threshold, k, DEFAULT_CAP)?;
        let words: Vec<Word> = sink
            .internal
            .into_iter()
            .filter(|w| include_root || !w.is_empty())
            .collect();
        Ok(PsiSet {
            count: words.len() as u128,
            words: Some(words),
        })
    } else {
        let opts = CaseTwoOptions {
            psi_h0: include_root,
            ..Default::default()
        };
        let rec = TypeClass.evaluate(sys, k, &classify(sys, r)?, &opts)?;
        Ok(PsiSet {
            count: rec.psi_count,
            words: None,
        })
    }
}

/// Aggregates of one `λ̃ₖ,ᵣ` evaluation.
#[derive(Clone, Debug, PartialEq)]
pub struct CaseTwoRecord {
    pub k: f64,
    pub r: f64,
    pub xi: XiReport,
    pub route: &'static str,
    pub gamma_count: u128,
    pub psi_count: u128,
    /// `|Γₖ,ᵣ| + |Ψₖ,ᵣ|`.
    pub phi_kr: u128,
    /// `|Γₖ,ᵣ| + Σ_{σ∈Ψ} |Γₖ,ᵣ(σ)|`, the number of terms in `λ̃ₖ,ᵣ` and
    /// the size of the patch codebook.
    pub patch_count: u128,
    pub lambda_tilde: f64,
    /// `Σ_Ψ Σ_ρ p₀ p_σ s_σʳ t_ρ c_ρʳ + Σ_Γ p_σ s_σʳ`.
    pub upper_bound: f64,
    pub ln_upper_bound: f64,
    pub l1: usize,
    pub l2: usize,
    /// `k ln π̲ᵣ`.
    pub ln_threshold: f64,
    /// `Σ_Γ (p_σ s_σʳ)^{ξ₂,ᵣ/(ξ₂,ᵣ+r)}`.
    pub gamma_unity: f64,
}

#[derive(Clone, Debug)]
pub struct CaseTwoOptions {
    pub cap: usize,
    /// Count `θ` as a member of `Ψₖ,ᵣ`.
    pub psi_h0: bool,
}

impl Default for CaseTwoOptions {
    fn default() -> Self {
        Self {
            cap: DEFAULT_CAP,
            psi_h0: true,
        }
    }
}

pub trait CaseTwoRoute: Named + Send + Sync {
    fn evaluate(
        &self,
        sys: &IsmSystem,
        k: f64,
        xi: &XiReport,
        opts: &CaseTwoOptions,
    ) -> Result<CaseTwoRecord, BuildError>;
}

/// Running sums shared by both routes.
#[derive(Default)]
struct Tally {
    gamma: u128,
    psi: u128,
    patches: u128,
    lambda: CompensatedSum,
    upper: LogSumExp,
    unity: CompensatedSum,
    l1: usize,
    l2: usize,
}

impl Tally {
    fn new() -> Self {
        Self {
            l1: usize::MAX,
            ..Default::default()
        }
    }

    fn add(a: u128, b: u128, what: &'static str) -> Result<u128, BuildError> {
        a.checked_add(b).ok_or(BuildError::Overflow(what))
    }

    fn gamma_class(
        &mut self,
        len: usize,
        ln_w: f64,
        mult: u128,
        x: f64,
        x2: f64,
    ) -> Result<(), BuildError> {
        self.gamma = Self::add(self.gamma, mult, "Γ count")?;
        let m = mult as f64;
        self.lambda.add(m * (x * ln_w).exp());
        self.unity.add(m * (x2 * ln_w).exp());
        self.upper.add_ln_weighted(ln_w, m);
        self.l1 = self.l1.min(len);
        self.l2 = self.l2.max(len);
        Ok(())
    }

    fn psi_class(&mut self, inner: &InnerSums, mult: u128, ln_p0: f64) -> Result<(), BuildError> {
        self.psi = Self::add(self.psi, mult, "Ψ count")?;
        let patches = inner
            .count
            .checked_mul(mult)
            .ok_or(BuildError::Overflow("patch count"))?;
        self.patches = Self::add(self.patches, patches, "patch count")?;
        let m = mult as f64;
        self.lambda.add(m * inner.lambda.value());
        self.upper
            .add_ln_weighted(ln_p0 + inner.linear.ln_value(), m);
        Ok(())
    }

    fn finish(
        self,
        sys: &IsmSystem,
        k: f64,
        xi: &XiReport,
        ln_threshold: f64,
        route: &'static str,
    ) -> Result<CaseTwoRecord, BuildError> {
        let patch_count = Self::add(self.patches, self.gamma, "patch count")?;
        let phi_kr = Self::add(self.gamma, self.psi, "φ")?;
        let _ = sys;
        Ok(CaseTwoRecord {
            k,
            r: xi.r,
            xi: *xi,
            route,
            gamma_count: self.gamma,
            psi_count: self.psi,
            phi_kr,
            patch_count,
            lambda_tilde: self.lambda.value(),
            upper_bound: self.upper.value(),
            ln_upper_bound: self.upper.ln_value(),
            l1: self.l1,
            l2: self.l2,
            ln_threshold,
            gamma_unity: self.unity.value(),
        })
    }
}

/// Sums over one inner antichain `Γₖ,ᵣ(σ)`.
#[derive(Default)]
struct InnerSums {
    count: u128,
    /// `Σ (W u)^x`.
    lambda: CompensatedSum,
    /// `Σ W u` in logs.
    linear: LogSumExp,
}

/// Walks every word.
pub struct Enumerate;

impl Named for Enumerate {
    fn name(&self) -> &'static str {
        "enumerate"
    }
}

impl CaseTwoRoute for Enumerate {
    fn evaluate(
        &self,
        sys: &IsmSystem,
        k: f64,
        xi: &XiReport,
        opts: &CaseTwoOptions,
    ) -> Result<CaseTwoRecord, BuildError> {
        let f = Factors::new(sys, k, xi.r)?;
        let x = xi.exponent();
        let x2 = xi.xi2 / (xi.xi2 + xi.r);
        let outer = walk_words(&f.outer, 0.0, f.ln_threshold, k, opts.cap)?;
        let mut tally = Tally::new();
        for sigma in &outer.leaves {
            tally.gamma_class(sigma.len(), ln_outer_weight(&f, sigma), 1, x, x2)?;
        }
        let psi: Vec<&Word> = outer
            .internal
            .iter()
            .filter(|w| opts.psi_h0 || !w.is_empty())
            .collect();
        let inner: Vec<InnerSums> = psi
            .par_iter()
            .map(|sigma| {
                let ln_w = ln_outer_weight(&f, sigma);
                let sink = walk_words(&f.inner, ln_w, f.ln_threshold, k, opts.cap)?;
                let mut sums = InnerSums::default();
                for rho in &sink.leaves {
                    let ln = ln_w + rho.indices().map(|j| f.inner[j]).sum::<f64>();
                    sums.count += 1;
                    sums.lambda.add((x * ln).exp());
                    sums.linear.add_ln(ln);
                }
                Ok(sums)
            })
            .collect::<Result<_, BuildError>>()?;
        for sums in &inner {
            tally.psi_class(sums, 1, sys.p0().ln())?;
            if tally.patches > opts.cap as u128 {
                return Err(BuildError::CapExceeded { cap: opts.cap, k });
            }
        }
        tally.finish(sys, k, xi, f.ln_threshold, self.name())
    }
}

/// Groups words by symbol-count vector.
pub struct TypeClass;

impl Named for TypeClass {
    fn name(&self) -> &'static str {
        "type-class"
    }
}

/// Internal classes of a product-weight descent from `ln_start`, level by
/// level, with their multiplicities, plus the leaf classes hanging off them.
struct ClassWalk {
    /// `(length, ln weight, multiplicity)` of each internal class.
    internal: Vec<(usize, f64, u128)>,
    /// Same for leaf classes (one entry per internal class and symbol).
    leaves: Vec<(usize, f64, u128)>,
}

fn class_walk(
    factors: &[f64],
    ln_start: f64,
    ln_threshold: f64,
    k: f64,
) -> Result<ClassWalk, BuildError> {
    let mut out = ClassWalk {
        internal: Vec::new(),
        leaves: Vec::new(),
    };
    let weight = |counts: &[u16]| -> f64 {
        ln_start
            + counts
                .iter()
                .zip(factors)
                .map(|(&n, f)| n as f64 * f)
                .sum::<f64>()
    };
    if strictly_below(ln_start, ln_threshold) {
        return Ok(out);
    }
    let mut level: BTreeMap<Vec<u16>, u128> = BTreeMap::new();
    level.insert(vec![0; factors.len()], 1);
    let mut depth = 0;
    while !level.is_empty() {
        if depth >= MAX_DEPTH {
            return Err(BuildError::TooDeep {
                k,
                depth: MAX_DEPTH,
            });
        }
        let mut next: BTreeMap<Vec<u16>, u128> = BTreeMap::new();
        for (counts, mult) in &level {
            out.internal.push((depth, weight(counts), *mult));
            for i in 0..factors.len() {
                let mut child = counts.clone();
                child[i] += 1;
                let ln_c = weight(&child);
                if strictly_below(ln_c, ln_threshold) {
                    out.leaves.push((depth + 1, ln_c, *mult));
                } else {
                    let slot = next.entry(child).or_insert(0);
                    *slot = slot
                        .checked_add(*mult)
                        .ok_or(BuildError::Overflow("class multiplicity"))?;
                }
            }
        }
        level = next;
        depth += 1;
    }
    Ok(out)
}

impl CaseTwoRoute for TypeClass {
    fn evaluate(
        &self,
        sys: &IsmSystem,
        k: f64,
        xi: &XiReport,
        opts: &CaseTwoOptions,
    ) -> Result<CaseTwoRecord, BuildError> {
        let f = Factors::new(sys, k, xi.r)?;
        let x = xi.exponent();
        let x2 = xi.xi2 / (xi.xi2 + xi.r);
        let outer = class_walk(&f.outer, 0.0, f.ln_threshold, k)?;
        let mut tally = Tally::new();
        for &(len, ln_w, mult) in &outer.leaves {
            tally.gamma_class(len, ln_w, mult, x, x2)?;
        }
        let psi: Vec<(f64, u128)> = outer
            .internal
            .iter()
            .filter(|(len, _, _)| opts.psi_h0 || *len > 0)
            .map(|&(_, ln_w, mult)| (ln_w, mult))
            .collect();
        let inner: Vec<InnerSums> = psi
            .par_iter()
            .map(|&(ln_w, _)| {
                let walk = class_walk(&f.inner, ln_w, f.ln_threshold, k)?;
                let mut sums = InnerSums::default();
                for &(_, ln, mult) in &walk.leaves {
                    sums.count = sums
                        .count
                        .checked_add(mult)
                        .ok_or(BuildError::Overflow("inner count"))?;
                    let m = mult as f64;
                    sums.lambda.add(m * (x * ln).exp());
                    sums.linear.add_ln_weighted(ln, m);
                }
                Ok(sums)
            })
            .collect::<Result<_, BuildError>>()?;
        for (sums, &(_, mult)) in inner.iter().zip(&psi) {
            tally.psi_class(sums, mult, sys.p0().ln())?;
        }
        tally.finish(sys, k, xi, f.ln_threshold, self.name())
    }
}

/// Registry holding `enumerate` and `type-class`.
pub fn case_two_routes() -> Registry<dyn CaseTwoRoute> {
    let mut reg: Registry<dyn CaseTwoRoute> = Registry::new();
    reg.register(Arc::new(Enumerate));
    reg.register(Arc::new(TypeClass));
    reg
}

/// `λ̃ₖ,ᵣ` by the `type-class` route with default options.
pub fn lambda_tilde(sys: &IsmSystem, k: f64, r: f64) -> Result<CaseTwoRecord, BuildError> {
    let xi = classify(sys, r)?;
    TypeClass.evaluate(sys, k, &xi, &CaseTwoOptions::default())
}

/// `λ̃ₖ,ᵣ` through a route chosen by name.
pub fn lambda_tilde_with(
    sys: &IsmSystem,
    k: f64,
    xi: &XiReport,
    route: &str,
    opts: &CaseTwoOptions,
) -> Result<CaseTwoRecord, BuildError> {
    require_case_two(sys)?;
    let route = case_two_routes()
        .get(route)
        .ok_or_else(|| BuildError::UnknownRoute(route.to_string()))?;
    route.evaluate(sys, k, xi, opts)
}

/// One point per patch: `f_σ(fixed point of f₁)` for each `σ ∈ Γₖ,ᵣ`, and
/// `f_σ∘g_ρ(fixed point of g₁)` for each `σ ∈ Ψₖ,ᵣ`, `ρ ∈ Γₖ,ᵣ(σ)`.
/// Ordered as the `Γ` points followed by the `Ψ` points by `σ`, then `ρ`.
pub fn patch_codebook(
    sys: &IsmSystem,
    k: f64,
    r: f64,
    opts: &CaseTwoOptions,
) -> Result<Vec<Point>, BuildError> {
    let f = Factors::new(sys, k, r)?;
    let outer = walk_words(&f.outer, 0.0, f.ln_threshold, k, opts.cap)?;
    let k_anchor = sys.outer_anchor();
    let c_anchor = sys.anchor();
    let mut points = Vec::new();
    for sigma in &outer.leaves {
        points.push(sys.word_map(sigma, Family::Outer)?.apply(k_anchor));
    }
    for sigma in outer
        .internal
        .iter()
        .filter(|w| opts.psi_h0 || !w.is_empty())
    {
        let f_sigma = sys.word_map(sigma, Family::Outer)?;
        let ln_w = ln_outer_weight(&f, sigma);
        let inner = walk_words(&f.inner, ln_w, f.ln_threshold, k, opts.cap)?;
        for rho in &inner.leaves {
            let g_rho = sys.word_map(rho, Family::Inner)?;
            points.push(f_sigma.compose(&g_rho).apply(c_anchor));
        }
        if points.len() > opts.cap {
            return Err(BuildError::CapExceeded { cap: opts.cap, k });
        }
    }
    Ok(points)
}
