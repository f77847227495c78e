//! The measure model.
//!
//! An [`IsmSystem`] holds the outer similitudes `(fᵢ)`, the probability
//! vector `(p₀,…,p_N)`, and the condensation measure `ν`, which is the
//! self-similar measure of an inner family with weights `t`:
//!
//! * Case (i): the inner family *is* the outer family, so `C = E = K`.
//! * Case (ii): the inner family `(gⱼ)` is separate, and `C` sits in a gap
//!   of the outer images.
//!
//! Points live in the plane; one-dimensional systems use the first
//! coordinate and keep the second at zero.

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::numeric::CompensatedSum;
use crate::words::{Word, WordError, MAX_DEPTH};

pub type Point = [f64; 2];

/// Tolerance on `Σ p = 1` and `Σ t = 1`.
pub const PROBABILITY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("contraction ratio {0} outside (0, 1)")]
    ScaleOutOfRange(f64),
    #[error("orientation sign must be +1 or -1, got {0}")]
    BadOrientation(f64),
    #[error("probability vector `{name}` invalid: {reason}")]
    InvalidProbability { name: &'static str, reason: String },
    #[error("`{name}` has length {found}, expected {expected}")]
    LengthMismatch {
        name: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("at least one outer similitude is required")]
    NoMaps,
    #[error("map {index} does not live in dimension {dimension}")]
    DimensionMismatch { index: usize, dimension: usize },
    #[error("operation requires a {0} system")]
    WrongCase(&'static str),
    #[error("degenerate system: attractor hull has diameter {0}")]
    Degenerate(f64),
    #[error("sampling accuracy {eps} needs depth {depth} > MAX_DEPTH")]
    EpsilonTooSmall { eps: f64, depth: usize },
    #[error("sampling accuracy must be positive, got {0}")]
    BadEpsilon(f64),
    #[error(transparent)]
    Word(#[from] WordError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MapKind {
    Line,
    Plane,
}

/// `x ↦ scale · A x + b` with `A` orthogonal.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Similitude {
    scale: f64,
    orth: [[f64; 2]; 2],
    translation: Point,
    kind: MapKind,
}

impl Similitude {
    /// A similitude of the line: `x ↦ scale · sign · x + b`.
    pub fn line(scale: f64, sign: f64, b: f64) -> Result<Self, ModelError> {
        check_ratio(scale)?;
        if sign != 1.0 && sign != -1.0 {
            return Err(ModelError::BadOrientation(sign));
        }
        Ok(Self {
            scale,
            orth: [[sign, 0.0], [0.0, 1.0]],
            translation: [b, 0.0],
            kind: MapKind::Line,
        })
    }

    /// A similitude of the plane: rotation by `angle` radians, then shift.
    pub fn plane(scale: f64, angle: f64, b: Point) -> Result<Self, ModelError> {
        check_ratio(scale)?;
        let (s, c) = angle.sin_cos();
        Ok(Self {
            scale,
            orth: [[c, -s], [s, c]],
            translation: b,
            kind: MapKind::Plane,
        })
    }

    /// The identity, the value of the empty composition. Its scale is 1, the
    /// one place a `Similitude` sits outside the open interval (0, 1).
    pub fn identity(kind: MapKind) -> Self {
        Self {
            scale: 1.0,
            orth: [[1.0, 0.0], [0.0, 1.0]],
            translation: [0.0, 0.0],
            kind,
        }
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn translation(&self) -> Point {
        self.translation
    }

    pub fn kind(&self) -> MapKind {
        self.kind
    }

    pub fn apply(&self, x: Point) -> Point {
        let a = &self.orth;
        [
            self.scale * (a[0][0] * x[0] + a[0][1] * x[1]) + self.translation[0],
            self.scale * (a[1][0] * x[0] + a[1][1] * x[1]) + self.translation[1],
        ]
    }

    /// `self ∘ inner`.
    pub fn compose(&self, inner: &Similitude) -> Similitude {
        let a = &self.orth;
        let b = &inner.orth;
        let mut orth = [[0.0; 2]; 2];
        for (i, row) in orth.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = a[i][0] * b[0][j] + a[i][1] * b[1][j];
            }
        }
        let shifted = self.apply(inner.translation);
        Similitude {
            scale: self.scale * inner.scale,
            orth,
            translation: shifted,
            kind: self.kind,
        }
    }

    /// Unique solution of `f(x) = x`.
    pub fn fixed_point(&self) -> Point {
        let s = self.scale;
        let a = &self.orth;
        let m = [
            [1.0 - s * a[0][0], -s * a[0][1]],
            [-s * a[1][0], 1.0 - s * a[1][1]],
        ];
        let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
        let b = self.translation;
        [
            (m[1][1] * b[0] - m[0][1] * b[1]) / det,
            (m[0][0] * b[1] - m[1][0] * b[0]) / det,
        ]
    }

    /// The conjugate `x ↦ λ f(x/λ)`, i.e. the same map after rescaling space by `λ`.
    pub fn rescaled(&self, lambda: f64) -> Similitude {
        Similitude {
            translation: [self.translation[0] * lambda, self.translation[1] * lambda],
            ..*self
        }
    }
}

fn check_ratio(scale: f64) -> Result<(), ModelError> {
    if scale > 0.0 && scale < 1.0 && scale.is_finite() {
        Ok(())
    } else {
        Err(ModelError::ScaleOutOfRange(scale))
    }
}

pub fn distance(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Case {
    I,
    II,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Dimension {
    One,
    Two,
}

impl Dimension {
    pub fn value(self) -> usize {
        match self {
            Dimension::One => 1,
            Dimension::Two => 2,
        }
    }

    fn kind(self) -> MapKind {
        match self {
            Dimension::One => MapKind::Line,
            Dimension::Two => MapKind::Plane,
        }
    }
}

/// Which similitude family a word indexes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Family {
    Outer,
    Inner,
}

/// The full in-homogeneous self-similar measure.
#[derive(Clone, Debug, PartialEq)]
pub struct IsmSystem {
    case: Case,
    dimension: Dimension,
    outer: Vec<Similitude>,
    p: Vec<f64>,
    inner: Vec<Similitude>,
    t: Vec<f64>,
    normalization_scale: f64,
    hull_approximate: bool,
}

fn check_probability(name: &'static str, v: &[f64]) -> Result<(), ModelError> {
    if let Some(x) = v.iter().find(|x| !(x.is_finite() && **x > 0.0)) {
        return Err(ModelError::InvalidProbability {
            name,
            reason: format!("entry {x} is not strictly positive"),
        });
    }
    let total: f64 = v.iter().copied().collect::<CompensatedSum>().value();
    if (total - 1.0).abs() > PROBABILITY_TOL {
        return Err(ModelError::InvalidProbability {
            name,
            reason: format!("entries sum to {total}, not 1"),
        });
    }
    Ok(())
}

fn check_maps(maps: &[Similitude], dimension: Dimension) -> Result<(), ModelError> {
    match maps.iter().position(|m| m.kind != dimension.kind()) {
        Some(index) => Err(ModelError::DimensionMismatch {
            index,
            dimension: dimension.value(),
        }),
        None => Ok(()),
    }
}

impl IsmSystem {
    /// Case (i): `ν` is the self-similar measure of `outer` with weights `t`.
    pub fn case_one(
        dimension: Dimension,
        outer: Vec<Similitude>,
        p: Vec<f64>,
        t: Vec<f64>,
    ) -> Result<Self, ModelError> {
        let inner = outer.clone();
        Self::build(Case::I, dimension, outer, p, inner, t)
    }

    /// Case (ii): `ν` is the self-similar measure of `inner` with weights `t`.
    pub fn case_two(
        dimension: Dimension,
        outer: Vec<Similitude>,
        inner: Vec<Similitude>,
        p: Vec<f64>,
        t: Vec<f64>,
    ) -> Result<Self, ModelError> {
        if inner.is_empty() {
            return Err(ModelError::NoMaps);
        }
        Self::build(Case::II, dimension, outer, p, inner, t)
    }

    fn build(
        case: Case,
        dimension: Dimension,
        outer: Vec<Similitude>,
        p: Vec<f64>,
        inner: Vec<Similitude>,
        t: Vec<f64>,
    ) -> Result<Self, ModelError> {
        if outer.is_empty() {
            return Err(ModelError::NoMaps);
        }
        check_maps(&outer, dimension)?;
        check_maps(&inner, dimension)?;
        if p.len() != outer.len() + 1 {
            return Err(ModelError::LengthMismatch {
                name: "p",
                expected: outer.len() + 1,
                found: p.len(),
            });
        }
        if t.len() != inner.len() {
            return Err(ModelError::LengthMismatch {
                name: "t",
                expected: inner.len(),
                found: t.len(),
            });
        }
        if p[0].is_nan() || p[0] <= 0.0 {
            return Err(ModelError::InvalidProbability {
                name: "p",
                reason: "p0 must be positive (p0 = 0 is a plain self-similar measure)".into(),
            });
        }
        check_probability("p", &p)?;
        check_probability("t", &t)?;
        Ok(Self {
            case,
            dimension,
            outer,
            p,
            inner,
            t,
            normalization_scale: 1.0,
            hull_approximate: false,
        })
    }

    pub fn case(&self) -> Case {
        self.case
    }

    pub fn dimension(&self) -> Dimension {
        self.dimension
    }

    pub fn outer_maps(&self) -> &[Similitude] {
        &self.outer
    }

    pub fn inner_maps(&self) -> &[Similitude] {
        &self.inner
    }

    /// `(p₀, p₁, …, p_N)`.
    pub fn p(&self) -> &[f64] {
        &self.p
    }

    pub fn p0(&self) -> f64 {
        self.p[0]
    }

    /// `(p₁, …, p_N)`.
    pub fn branch_weights(&self) -> &[f64] {
        &self.p[1..]
    }

    pub fn t(&self) -> &[f64] {
        &self.t
    }

    pub fn outer_ratios(&self) -> Vec<f64> {
        self.outer.iter().map(Similitude::scale).collect()
    }

    pub fn inner_ratios(&self) -> Vec<f64> {
        self.inner.iter().map(Similitude::scale).collect()
    }

    pub fn outer_alphabet(&self) -> u16 {
        self.outer.len() as u16
    }

    pub fn inner_alphabet(&self) -> u16 {
        self.inner.len() as u16
    }

    /// Cumulative rescale applied by [`IsmSystem::normalize`].
    pub fn normalization_scale(&self) -> f64 {
        self.normalization_scale
    }

    /// True when the hull was computed by planar iteration rather than the
    /// exact interval fixed point.
    pub fn hull_approximate(&self) -> bool {
        self.hull_approximate
    }

    fn family(&self, family: Family) -> (&[Similitude], u16) {
        match family {
            Family::Outer => (&self.outer, self.outer_alphabet()),
            Family::Inner => (&self.inner, self.inner_alphabet()),
        }
    }

    /// `f_σ = f_{σ₁} ∘ … ∘ f_{σₙ}` (or the inner-family analogue).
    pub fn word_map(&self, sigma: &Word, family: Family) -> Result<Similitude, ModelError> {
        let (maps, alphabet) = self.family(family);
        if sigma.alphabet() != alphabet {
            return Err(WordError::AlphabetMismatch {
                left: alphabet,
                right: sigma.alphabet(),
            }
            .into());
        }
        Ok(sigma
            .indices()
            .fold(Similitude::identity(self.dimension.kind()), |acc, i| {
                acc.compose(&maps[i])
            }))
    }

    fn require(&self, case: Case) -> Result<(), ModelError> {
        if self.case != case {
            return Err(ModelError::WrongCase(match case {
                Case::I => "Case (i)",
                Case::II => "Case (ii)",
            }));
        }
        Ok(())
    }

    fn check_outer(&self, sigma: &Word) -> Result<(), ModelError> {
        if sigma.alphabet() != self.outer_alphabet() {
            return Err(WordError::AlphabetMismatch {
                left: self.outer_alphabet(),
                right: sigma.alphabet(),
            }
            .into());
        }
        Ok(())
    }

    /// `μ(E_σ) = Σ_{h<k} p₀ p_{σ|h} t_{σ after h} + p_σ`, evaluated directly.
    pub fn cylinder_mass_case1(&self, sigma: &Word) -> Result<f64, ModelError> {
        self.require(Case::I)?;
        self.check_outer(sigma)?;
        let idx: Vec<usize> = sigma.indices().collect();
        let k = idx.len();
        // suffix[h] = t of the symbols after the first h.
        let mut suffix = vec![1.0; k + 1];
        for h in (0..k).rev() {
            suffix[h] = suffix[h + 1] * self.t[idx[h]];
        }
        let mut sum = CompensatedSum::new();
        let mut p_prefix = 1.0;
        for h in 0..k {
            sum.add(self.p[0] * p_prefix * suffix[h]);
            p_prefix *= self.p[idx[h] + 1];
        }
        sum.add(p_prefix);
        Ok(sum.value())
    }

    /// `μ(E_{i∗τ}) = p₀ t_{i∗τ} + pᵢ μ(E_τ)`, unfolded from the front with
    /// `μ(E_θ) = 1`.
    pub fn cylinder_mass_case1_recursive(&self, sigma: &Word) -> Result<f64, ModelError> {
        self.require(Case::I)?;
        self.check_outer(sigma)?;
        let idx: Vec<usize> = sigma.indices().collect();
        Ok(self.mass_unfold(&idx))
    }

    fn mass_unfold(&self, idx: &[usize]) -> f64 {
        match idx.split_first() {
            None => 1.0,
            Some((&first, rest)) => {
                let t_word: f64 = idx.iter().map(|&i| self.t[i]).product();
                self.p[0] * t_word + self.p[first + 1] * self.mass_unfold(rest)
            }
        }
    }

    /// `μ(f_σ(K)) = p_σ` and `μ(f_σ(C_ω)) = p₀ p_σ t_ω`.
    pub fn patch_mass_case2(&self, sigma: &Word, omega: Option<&Word>) -> Result<f64, ModelError> {
        self.require(Case::II)?;
        self.check_outer(sigma)?;
        let p_sigma: f64 = sigma.indices().map(|i| self.p[i + 1]).product();
        match omega {
            None => Ok(p_sigma),
            Some(omega) => {
                if omega.alphabet() != self.inner_alphabet() {
                    return Err(WordError::AlphabetMismatch {
                        left: self.inner_alphabet(),
                        right: omega.alphabet(),
                    }
                    .into());
                }
                let t_omega: f64 = omega.indices().map(|j| self.t[j]).product();
                Ok(self.p[0] * p_sigma * t_omega)
            }
        }
    }

    /// Convex hull of the condensation support `C`.
    pub fn condensation_hull(&self) -> Hull {
        attractor_hull(&self.inner, None)
    }

    /// Convex hull of the support `K`.
    pub fn support_hull(&self) -> Hull {
        match self.case {
            Case::I => attractor_hull(&self.outer, None),
            Case::II => {
                let c = self.condensation_hull();
                attractor_hull(&self.outer, Some(&c))
            }
        }
    }

    /// Rescales space so that `diam K = 1`.
    pub fn normalize(&self) -> Result<IsmSystem, ModelError> {
        let hull = self.support_hull();
        let diam = hull.diameter();
        if !diam.is_finite() || diam <= 1e-300 {
            return Err(ModelError::Degenerate(diam));
        }
        let lambda = 1.0 / diam;
        Ok(IsmSystem {
            outer: self.outer.iter().map(|m| m.rescaled(lambda)).collect(),
            inner: self.inner.iter().map(|m| m.rescaled(lambda)).collect(),
            normalization_scale: self.normalization_scale * lambda,
            hull_approximate: matches!(hull, Hull::Polygon(_)),
            ..self.clone()
        })
    }

    /// Checks strong separation: the images `fᵢ(hull K)` are pairwise
    /// disjoint, and in Case (ii) `hull C` misses every image. This is
    /// sufficient for the open set condition, not necessary.
    pub fn check_separation(&self) -> SeparationReport {
        let hull = self.support_hull();
        let mut pieces: Vec<(String, Hull)> = self
            .outer
            .iter()
            .enumerate()
            .map(|(i, f)| (format!("f{}(K)", i + 1), hull.mapped(f)))
            .collect();
        if self.case == Case::II {
            pieces.push(("C".to_string(), self.condensation_hull()));
        }
        let mut min_gap = f64::INFINITY;
        let mut offending = None;
        for a in 0..pieces.len() {
            for b in a + 1..pieces.len() {
                let gap = pieces[a].1.gap(&pieces[b].1);
                if gap < min_gap {
                    min_gap = gap;
                }
                if gap <= 0.0 && offending.is_none() {
                    offending = Some((pieces[a].0.clone(), pieces[b].0.clone()));
                }
            }
        }
        SeparationReport {
            passed: offending.is_none(),
            min_gap,
            offending,
        }
    }

    /// Point used when a ν-sample is replaced by a representative: the fixed
    /// point of the first inner map.
    pub fn anchor(&self) -> Point {
        self.inner[0].fixed_point()
    }

    /// Fixed point of the first outer map, a point of `K`.
    pub fn outer_anchor(&self) -> Point {
        self.outer[0].fixed_point()
    }
}

/// Outcome of [`IsmSystem::check_separation`].
#[derive(Clone, Debug, PartialEq)]
pub struct SeparationReport {
    pub passed: bool,
    /// Smallest gap between any two pieces (0 when some pair intersects).
    pub min_gap: f64,
    pub offending: Option<(String, String)>,
}

/// Convex hull of an attractor: an interval on the line or a convex polygon
/// in the plane.
#[derive(Clone, Debug, PartialEq)]
pub enum Hull {
    Interval(f64, f64),
    Polygon(Vec<Point>),
}

impl Hull {
    pub fn diameter(&self) -> f64 {
        match self {
            Hull::Interval(a, b) => b - a,
            Hull::Polygon(pts) => {
                let mut d = 0.0_f64;
                for i in 0..pts.len() {
                    for j in i + 1..pts.len() {
                        d = d.max(distance(pts[i], pts[j]));
                    }
                }
                d
            }
        }
    }

    pub fn mapped(&self, f: &Similitude) -> Hull {
        match self {
            Hull::Interval(a, b) => {
                let x = f.apply([*a, 0.0])[0];
                let y = f.apply([*b, 0.0])[0];
                Hull::Interval(x.min(y), x.max(y))
            }
            Hull::Polygon(pts) => Hull::Polygon(pts.iter().map(|&p| f.apply(p)).collect()),
        }
    }

    pub fn contains(&self, x: Point, tol: f64) -> bool {
        match self {
            Hull::Interval(a, b) => x[0] >= a - tol && x[0] <= b + tol && x[1].abs() <= tol,
            Hull::Polygon(pts) => polygon_distance(pts, &[x]) <= tol,
        }
    }

    /// Distance between two hulls; 0 when they intersect.
    pub fn gap(&self, other: &Hull) -> f64 {
        match (self, other) {
            (Hull::Interval(a0, a1), Hull::Interval(b0, b1)) => (b0 - a1).max(a0 - b1).max(0.0),
            _ => polygon_distance(&self.vertices(), &other.vertices()),
        }
    }

    pub fn vertices(&self) -> Vec<Point> {
        match self {
            Hull::Interval(a, b) => vec![[*a, 0.0], [*b, 0.0]],
            Hull::Polygon(pts) => pts.clone(),
        }
    }
}

fn attractor_hull(maps: &[Similitude], extra: Option<&Hull>) -> Hull {
    if maps[0].kind == MapKind::Line {
        interval_hull(maps, extra)
    } else {
        polygon_hull(maps, extra)
    }
}

/// Smallest interval `I` with `I = hull(extra ∪ ⋃ fᵢ(I))`, by monotone
/// iteration from the hull of the fixed points (which lies inside the
/// attractor, so the iterates increase to the answer).
fn interval_hull(maps: &[Similitude], extra: Option<&Hull>) -> Hull {
    let fixed: Vec<f64> = maps.iter().map(|m| m.fixed_point()[0]).collect();
    let mut lo = fixed.iter().copied().fold(f64::INFINITY, f64::min);
    let mut hi = fixed.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (c_lo, c_hi) = match extra {
        Some(Hull::Interval(a, b)) => (*a, *b),
        _ => (f64::INFINITY, f64::NEG_INFINITY),
    };
    lo = lo.min(c_lo);
    hi = hi.max(c_hi);
    for _ in 0..10_000 {
        let mut nlo = c_lo.min(lo);
        let mut nhi = c_hi.max(hi);
        for m in maps {
            let a = m.apply([lo, 0.0])[0];
            let b = m.apply([hi, 0.0])[0];
            nlo = nlo.min(a.min(b));
            nhi = nhi.max(a.max(b));
        }
        let moved = (lo - nlo).abs() + (nhi - hi).abs();
        lo = nlo;
        hi = nhi;
        if moved <= 1e-16 * (hi - lo).abs().max(f64::MIN_POSITIVE) {
            break;
        }
    }
    Hull::Interval(lo, hi)
}

/// Planar analogue: iterate convex hulls of the images of a vertex set that
/// starts inside the attractor. Iterates stay inside the true hull and
/// converge to it geometrically.
fn polygon_hull(maps: &[Similitude], extra: Option<&Hull>) -> Hull {
    let extra_pts = extra.map(Hull::vertices).unwrap_or_default();
    let mut pts: Vec<Point> = maps.iter().map(Similitude::fixed_point).collect();
    pts.extend(extra_pts.iter().copied());
    pts = convex_hull(pts);
    let mut diam = Hull::Polygon(pts.clone()).diameter();
    for _ in 0..10_000 {
        let mut next: Vec<Point> = extra_pts.clone();
        next.extend(pts.iter().copied());
        for m in maps {
            next.extend(pts.iter().map(|&p| m.apply(p)));
        }
        pts = convex_hull(next);
        let d = Hull::Polygon(pts.clone()).diameter();
        let moved = (d - diam).abs();
        diam = d;
        if moved <= 1e-15 * d.max(f64::MIN_POSITIVE) {
            break;
        }
    }
    Hull::Polygon(pts)
}

fn cross(o: Point, a: Point, b: Point) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

/// Andrew's monotone chain; returns counter-clockwise vertices.
fn convex_hull(mut pts: Vec<Point>) -> Vec<Point> {
    pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    pts.dedup();
    if pts.len() <= 2 {
        return pts;
    }
    let mut lower: Vec<Point> = Vec::new();
    for &p in &pts {
        while lower.len() >= 2 && cross(lower[lower.len() - 2], lower[lower.len() - 1], p) <= 0.0 {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<Point> = Vec::new();
    for &p in pts.iter().rev() {
        while upper.len() >= 2 && cross(upper[upper.len() - 2], upper[upper.len() - 1], p) <= 0.0 {
            upper.pop();
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

fn edges(poly: &[Point]) -> Vec<(Point, Point)> {
    match poly.len() {
        0 => Vec::new(),
        1 => vec![(poly[0], poly[0])],
        2 => vec![(poly[0], poly[1])],
        n => (0..n).map(|i| (poly[i], poly[(i + 1) % n])).collect(),
    }
}

fn inside_convex(poly: &[Point], x: Point) -> bool {
    if poly.len() < 3 {
        return false;
    }
    let n = poly.len();
    (0..n).all(|i| cross(poly[i], poly[(i + 1) % n], x) >= 0.0)
}

fn point_segment_distance(x: Point, a: Point, b: Point) -> f64 {
    let d = [b[0] - a[0], b[1] - a[1]];
    let len2 = d[0] * d[0] + d[1] * d[1];
    if len2 == 0.0 {
        return distance(x, a);
    }
    let u = (((x[0] - a[0]) * d[0] + (x[1] - a[1]) * d[1]) / len2).clamp(0.0, 1.0);
    distance(x, [a[0] + u * d[0], a[1] + u * d[1]])
}

fn segments_intersect(a: (Point, Point), b: (Point, Point)) -> bool {
    let d1 = cross(b.0, b.1, a.0);
    let d2 = cross(b.0, b.1, a.1);
    let d3 = cross(a.0, a.1, b.0);
    let d4 = cross(a.0, a.1, b.1);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    // Collinear and touching cases fall out of the distance computation.
    false
}

/// Euclidean distance between two convex polygons (degenerate ones allowed).
fn polygon_distance(a: &[Point], b: &[Point]) -> f64 {
    if a.iter().any(|&p| inside_convex(b, p)) || b.iter().any(|&p| inside_convex(a, p)) {
        return 0.0;
    }
    let ea = edges(a);
    let eb = edges(b);
    let mut best = f64::INFINITY;
    for &sa in &ea {
        for &sb in &eb {
            if segments_intersect(sa, sb) {
                return 0.0;
            }
            best = best
                .min(point_segment_distance(sa.0, sb.0, sb.1))
                .min(point_segment_distance(sa.1, sb.0, sb.1))
                .min(point_segment_distance(sb.0, sa.0, sa.1))
                .min(point_segment_distance(sb.1, sa.0, sa.1));
        }
    }
    best
}

/// Draws approximate μ-samples by stochastic unfolding of
/// `μ = p₀ν + Σ pᵢ μ∘fᵢ⁻¹`.
///
/// Each draw picks index 0 with probability `p₀` (switch to the ν recursion)
/// or branch `i` with probability `pᵢ`. The descent stops as soon as the
/// composed map shrinks `K` below `eps`, and the anchor's image is emitted,
/// so every emitted point is within `eps` of a true sample along the same
/// path.
#[derive(Clone, Debug)]
pub struct Sampler {
    outer: Vec<Similitude>,
    inner: Vec<Similitude>,
    outer_pick: WeightedIndex<f64>,
    inner_pick: WeightedIndex<f64>,
    anchor: Point,
    diam: f64,
    eps: f64,
    kind: MapKind,
}

impl Sampler {
    pub fn new(sys: &IsmSystem, eps: f64) -> Result<Self, ModelError> {
        if !eps.is_finite() || eps <= 0.0 {
            return Err(ModelError::BadEpsilon(eps));
        }
        let diam = sys.support_hull().diameter();
        let slowest = sys
            .outer
            .iter()
            .chain(sys.inner.iter())
            .map(Similitude::scale)
            .fold(0.0, f64::max);
        let needed = if diam <= eps {
            0
        } else {
            ((eps / diam).ln() / slowest.ln()).ceil() as usize
        };
        if needed > MAX_DEPTH {
            return Err(ModelError::EpsilonTooSmall { eps, depth: needed });
        }
        let invalid = |e| ModelError::InvalidProbability {
            name: "p",
            reason: format!("{e}"),
        };
        Ok(Self {
            outer: sys.outer.clone(),
            inner: sys.inner.clone(),
            outer_pick: WeightedIndex::new(sys.p.iter().copied()).map_err(invalid)?,
            inner_pick: WeightedIndex::new(sys.t.iter().copied()).map_err(invalid)?,
            anchor: sys.anchor(),
            diam,
            eps,
            kind: sys.dimension.kind(),
        })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Point {
        let mut map = Similitude::identity(self.kind);
        let mut in_condensation = false;
        loop {
            if map.scale * self.diam < self.eps {
                return map.apply(self.anchor);
            }
            if in_condensation {
                let j = self.inner_pick.sample(rng);
                map = map.compose(&self.inner[j]);
            } else {
                match self.outer_pick.sample(rng) {
                    0 => in_condensation = true,
                    i => map = map.compose(&self.outer[i - 1]),
                }
            }
        }
    }
}

/// One approximate μ-sample; see [`Sampler`].
pub fn sample_point<R: Rng + ?Sized>(
    sys: &IsmSystem,
    rng: &mut R,
    eps: f64,
) -> Result<Point, ModelError> {
    Ok(Sampler::new(sys, eps)?.sample(rng))
}

/// Samples per independent RNG stream in [`sample_batch`].
pub const SAMPLE_CHUNK: usize = 4096;

/// `count` samples; chunk `j` uses stream `j` of a ChaCha8 generator seeded
/// with `seed`, so the output does not depend on the thread count.
pub fn sample_batch(
    sys: &IsmSystem,
    count: usize,
    seed: u64,
    eps: f64,
) -> Result<Vec<Point>, ModelError> {
    let sampler = Sampler::new(sys, eps)?;
    let chunks = count.div_ceil(SAMPLE_CHUNK);
    let out = (0..chunks)
        .into_par_iter()
        .flat_map_iter(|j| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(j as u64);
            let len = SAMPLE_CHUNK.min(count - j * SAMPLE_CHUNK);
            let sampler = &sampler;
            (0..len)
                .map(move |_| sampler.sample(&mut rng))
                .collect::<Vec<_>>()
        })
        .collect();
    Ok(out)
}
