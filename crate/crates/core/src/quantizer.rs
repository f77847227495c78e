//! Empirical quantization errors on samples, and convergence-order fits.
//!
//! [`optimize_codebook`] runs alternating (Lloyd-type) optimization for the
//! `L_r` distortion `(1/m) Σⱼ minₐ |xⱼ − a|ʳ`. The per-cell update and the
//! initial seeding are strategies looked up by name:
//!
//! | cell update       | center                                          |
//! |-------------------|-------------------------------------------------|
//! | `mean`            | centroid (exact for r = 2)                      |
//! | `median`          | coordinatewise median (exact for r = 1 in 1D)   |
//! | `lr-fixed-point`  | damped reweighting iteration, bisection in 1D   |
//! | `auto`            | one of the above according to `r`               |
//!
//! Seeding is `dr` (D² seeding generalized to Dʳ) or `uniform`.
//!
//! Sums are taken over fixed-size chunks and merged in chunk order, and
//! restart `i` draws from `derive_seed(seed, i)`, so results are identical
//! for any thread count.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::model::{sample_batch, IsmSystem, ModelError, Point, SAMPLE_CHUNK};
use crate::numeric::{derive_seed, CompensatedSum};
use crate::registry::{Named, Registry};

pub const DEFAULT_RESTARTS: usize = 8;
pub const MAX_ROUNDS: usize = 500;
pub const REL_TOL: f64 = 1e-10;
/// Sampling accuracy used by [`empirical_curve`].
pub const DEFAULT_SAMPLE_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QuantError {
    #[error("codebook is empty")]
    EmptyCodebook,
    #[error("sample set is empty")]
    EmptySamples,
    #[error("order r = {0} must be positive")]
    BadOrder(f64),
    #[error("codebook size must be at least 1")]
    ZeroSize,
    #[error("{samples} samples are too few for n = {n} (need ≥ 10·n)")]
    TooFewSamples { n: usize, samples: usize },
    #[error("n = {n} exceeds the {distinct} distinct samples")]
    TooFewDistinct { n: usize, distinct: usize },
    #[error("warm start has {found} points, expected at most {n}")]
    WarmStartSize { n: usize, found: usize },
    #[error("unknown {kind} strategy `{name}`")]
    UnknownStrategy { kind: &'static str, name: String },
    #[error("order fit needs at least 4 points, got {0}")]
    TooFewPoints(usize),
    #[error("order fit needs n spanning ≥ 1.5 decades, got {0:.3}")]
    InsufficientSpan(f64),
    #[error("order fit got a non-positive value at n = {0}")]
    NonPositive(f64),
    #[error("least-squares system is singular")]
    Singular,
    #[error(transparent)]
    Model(#[from] ModelError),
}

fn check_r(r: f64) -> Result<(), QuantError> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(QuantError::BadOrder(r));
    }
    Ok(())
}

fn dist_pow(a: Point, b: Point, r: f64) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let d2 = dx * dx + dy * dy;
    if r == 2.0 {
        d2
    } else {
        d2.powf(0.5 * r)
    }
}

fn is_line(points: &[Point]) -> bool {
    points.iter().all(|p| p[1] == 0.0)
}

/// Nearest-point lookup; sorted binary search on the line.
struct Nearest<'a> {
    codebook: &'a [Point],
    sorted: Option<Vec<(f64, usize)>>,
}

impl<'a> Nearest<'a> {
    fn new(codebook: &'a [Point], line: bool) -> Self {
        let sorted = line.then(|| {
            let mut v: Vec<(f64, usize)> = codebook
                .iter()
                .enumerate()
                .map(|(i, p)| (p[0], i))
                .collect();
            v.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            v
        });
        Self { codebook, sorted }
    }

    /// Index of the nearest point; ties go to the smaller index.
    fn find(&self, x: Point) -> usize {
        match &self.sorted {
            Some(v) => {
                // v is sorted by (coordinate, index), so the first entry of a
                // run of equal coordinates has the smallest index.
                let pos = v.partition_point(|(a, _)| *a < x[0]);
                let mut best: Option<(f64, usize)> = None;
                let mut consider = |j: usize| {
                    let (a, i) = v[j];
                    let d = (x[0] - a).abs();
                    if best.is_none_or(|(bd, bi)| d < bd || (d == bd && i < bi)) {
                        best = Some((d, i));
                    }
                };
                if pos < v.len() {
                    consider(pos);
                }
                if pos > 0 {
                    let mut j = pos - 1;
                    while j > 0 && v[j - 1].0 == v[j].0 {
                        j -= 1;
                    }
                    consider(j);
                }
                best.map(|(_, i)| i).unwrap_or(0)
            }
            None => {
                let mut best = 0;
                let mut best_d = f64::INFINITY;
                for (i, a) in self.codebook.iter().enumerate() {
                    let dx = x[0] - a[0];
                    let dy = x[1] - a[1];
                    let d = dx * dx + dy * dy;
                    if d < best_d {
                        best_d = d;
                        best = i;
                    }
                }
                best
            }
        }
    }
}

/// Chunked `(Σ d, Σ d²)` merged in chunk order.
fn chunked_moments(values: impl Fn(usize) -> f64 + Sync, m: usize) -> (f64, f64) {
    let chunks = m.div_ceil(SAMPLE_CHUNK);
    let parts: Vec<(CompensatedSum, CompensatedSum)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut s = CompensatedSum::new();
            let mut s2 = CompensatedSum::new();
            for j in c * SAMPLE_CHUNK..((c + 1) * SAMPLE_CHUNK).min(m) {
                let d = values(j);
                s.add(d);
                s2.add(d * d);
            }
            (s, s2)
        })
        .collect();
    let mut s = CompensatedSum::new();
    let mut s2 = CompensatedSum::new();
    for (a, b) in &parts {
        s.merge(a);
        s2.merge(b);
    }
    (s.value(), s2.value())
}

fn mean_and_stderr(sum: f64, sum_sq: f64, m: usize) -> (f64, f64) {
    let mf = m as f64;
    let mean = sum / mf;
    if m < 2 {
        return (mean, 0.0);
    }
    let var = ((sum_sq - mf * mean * mean) / (mf - 1.0)).max(0.0);
    (mean, (var / mf).sqrt())
}

/// `((1/m) Σⱼ minₐ |xⱼ − a|ʳ, standard error)`.
pub fn estimate_error(
    samples: &[Point],
    codebook: &[Point],
    r: f64,
) -> Result<(f64, f64), QuantError> {
    check_r(r)?;
    if codebook.is_empty() {
        return Err(QuantError::EmptyCodebook);
    }
    if samples.is_empty() {
        return Err(QuantError::EmptySamples);
    }
    let nearest = Nearest::new(codebook, is_line(codebook) && is_line(samples));
    let (s, s2) = chunked_moments(
        |j| {
            let x = samples[j];
            dist_pow(x, codebook[nearest.find(x)], r)
        },
        samples.len(),
    );
    Ok(mean_and_stderr(s, s2, samples.len()))
}

/// Moves one cell's point to (an approximation of) its `L_r` center.
pub trait CellCenter: Named + Send + Sync {
    /// `cell` is nonempty; `current` is the point before the update. The
    /// returned point must not increase `Σ |x − a|ʳ` over the cell.
    fn update(&self, cell: &[Point], r: f64, current: Point, line: bool) -> Point;
}

fn cell_cost(cell: &[Point], a: Point, r: f64) -> f64 {
    cell.iter()
        .map(|x| dist_pow(*x, a, r))
        .collect::<CompensatedSum>()
        .value()
}

fn keep_better(cell: &[Point], r: f64, current: Point, candidate: Point) -> Point {
    if cell_cost(cell, candidate, r) <= cell_cost(cell, current, r) {
        candidate
    } else {
        current
    }
}

pub struct Mean;

impl Named for Mean {
    fn name(&self) -> &'static str {
        "mean"
    }
}

impl CellCenter for Mean {
    fn update(&self, cell: &[Point], r: f64, current: Point, _: bool) -> Point {
        let n = cell.len() as f64;
        let sx: CompensatedSum = cell.iter().map(|p| p[0]).collect();
        let sy: CompensatedSum = cell.iter().map(|p| p[1]).collect();
        let c = [sx.value() / n, sy.value() / n];
        if r == 2.0 {
            c
        } else {
            keep_better(cell, r, current, c)
        }
    }
}

pub struct Median;

impl Named for Median {
    fn name(&self) -> &'static str {
        "median"
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

impl CellCenter for Median {
    fn update(&self, cell: &[Point], r: f64, current: Point, line: bool) -> Point {
        let c = [
            median(cell.iter().map(|p| p[0]).collect()),
            median(cell.iter().map(|p| p[1]).collect()),
        ];
        if r == 1.0 && line {
            c
        } else {
            keep_better(cell, r, current, c)
        }
    }
}

/// Reweighting iteration `a ← Σ wⱼxⱼ / Σ wⱼ` with `wⱼ = |xⱼ − a|^{r−2}`,
/// damped until the cell cost decreases. On the line with `r ≥ 1` the cost
/// is convex and the center is found by bisection on its derivative.
pub struct LrFixedPoint;

impl Named for LrFixedPoint {
    fn name(&self) -> &'static str {
        "lr-fixed-point"
    }
}

const CENTER_ITER: usize = 100;
const DIST_FLOOR: f64 = 1e-12;

fn line_center(cell: &[Point], r: f64) -> f64 {
    let (mut lo, mut hi) = cell
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| {
            (a.min(p[0]), b.max(p[0]))
        });
    // d/da Σ |x − a|^r = −r Σ sign(x − a)|x − a|^{r−1}, increasing in a.
    let slope = |a: f64| -> f64 {
        cell.iter()
            .map(|p| {
                let d = a - p[0];
                d.signum() * d.abs().powf(r - 1.0)
            })
            .sum()
    };
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if slope(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

impl CellCenter for LrFixedPoint {
    fn update(&self, cell: &[Point], r: f64, current: Point, line: bool) -> Point {
        if line && r >= 1.0 {
            return keep_better(cell, r, current, [line_center(cell, r), 0.0]);
        }
        let mut a = current;
        let mut cost = cell_cost(cell, a, r);
        for _ in 0..CENTER_ITER {
            let mut w_sum = 0.0;
            let mut wx = [0.0, 0.0];
            for x in cell {
                let d = ((x[0] - a[0]).powi(2) + (x[1] - a[1]).powi(2)).sqrt();
                let w = d.max(DIST_FLOOR).powf(r - 2.0);
                w_sum += w;
                wx[0] += w * x[0];
                wx[1] += w * x[1];
            }
            let target = [wx[0] / w_sum, wx[1] / w_sum];
            let mut step = 1.0;
            let mut accepted = None;
            while step > 1e-6 {
                let cand = [
                    a[0] + step * (target[0] - a[0]),
                    a[1] + step * (target[1] - a[1]),
                ];
                let c = cell_cost(cell, cand, r);
                if c < cost {
                    accepted = Some((cand, c));
                    break;
                }
                step *= 0.5;
            }
            let Some((cand, c)) = accepted else { break };
            let improvement = (cost - c) / cost.max(f64::MIN_POSITIVE);
            a = cand;
            cost = c;
            if improvement < REL_TOL {
                break;
            }
        }
        a
    }
}

/// Picks `mean`, `median` or `lr-fixed-point` from `r` and the dimension.
pub struct Auto;

impl Named for Auto {
    fn name(&self) -> &'static str {
        "auto"
    }
}

impl CellCenter for Auto {
    fn update(&self, cell: &[Point], r: f64, current: Point, line: bool) -> Point {
        if r == 2.0 {
            Mean.update(cell, r, current, line)
        } else if r == 1.0 && line {
            Median.update(cell, r, current, line)
        } else {
            LrFixedPoint.update(cell, r, current, line)
        }
    }
}

pub fn cell_centers() -> Registry<dyn CellCenter> {
    let mut reg: Registry<dyn CellCenter> = Registry::new();
    reg.register(Arc::new(Mean));
    reg.register(Arc::new(Median));
    reg.register(Arc::new(LrFixedPoint));
    reg.register(Arc::new(Auto));
    reg
}

/// Chooses `n` initial points among the samples.
pub trait Seeding: Named + Send + Sync {
    fn seed(&self, samples: &[Point], n: usize, r: f64, rng: &mut ChaCha8Rng) -> Vec<Point>;
}

/// D² seeding with the squared distance replaced by `dʳ`.
pub struct DrSeeding;

impl Named for DrSeeding {
    fn name(&self) -> &'static str {
        "dr"
    }
}

impl Seeding for DrSeeding {
    fn seed(&self, samples: &[Point], n: usize, r: f64, rng: &mut ChaCha8Rng) -> Vec<Point> {
        let first = samples[rng.gen_range(0..samples.len())];
        let mut points = vec![first];
        let mut dist: Vec<f64> = samples
            .iter()
            .map(|x| dist_pow(*x, first, 2.0).sqrt())
            .collect();
        while points.len() < n {
            let dmax = dist.iter().copied().fold(0.0, f64::max);
            if dmax == 0.0 {
                break;
            }
            // Normalizing by the largest distance keeps large r finite.
            let weights: Vec<f64> = dist.iter().map(|d| (d / dmax).powf(r)).collect();
            let idx = match WeightedIndex::new(&weights) {
                Ok(w) => w.sample(rng),
                Err(_) => dist
                    .iter()
                    .enumerate()
                    .max_by(|a, b| a.1.total_cmp(b.1))
                    .map(|(i, _)| i)
                    .unwrap_or(0),
            };
            let p = samples[idx];
            points.push(p);
            for (d, x) in dist.iter_mut().zip(samples) {
                *d = d.min(dist_pow(*x, p, 2.0).sqrt());
            }
        }
        points
    }
}

/// `n` distinct samples drawn uniformly.
pub struct UniformSeeding;

impl Named for UniformSeeding {
    fn name(&self) -> &'static str {
        "uniform"
    }
}

impl Seeding for UniformSeeding {
    fn seed(&self, samples: &[Point], n: usize, _: f64, rng: &mut ChaCha8Rng) -> Vec<Point> {
        let mut points: Vec<Point> = Vec::with_capacity(n);
        let mut tries = 0;
        while points.len() < n && tries < 100 * n {
            let p = samples[rng.gen_range(0..samples.len())];
            if !points.contains(&p) {
                points.push(p);
            }
            tries += 1;
        }
        points
    }
}

pub fn seedings() -> Registry<dyn Seeding> {
    let mut reg: Registry<dyn Seeding> = Registry::new();
    reg.register(Arc::new(DrSeeding));
    reg.register(Arc::new(UniformSeeding));
    reg
}

#[derive(Clone, Debug, PartialEq)]
pub struct QuantEstimate {
    pub n: usize,
    pub r: f64,
    pub codebook: Vec<Point>,
    pub e_r_pow_r: f64,
    pub std_error: f64,
    pub samples_used: usize,
    pub restarts: usize,
}

impl QuantEstimate {
    /// `n^{r/s} · e_r_pow_r`.
    pub fn scaled(&self, s: f64) -> f64 {
        (self.n as f64).powf(self.r / s) * self.e_r_pow_r
    }
}

#[derive(Clone)]
pub struct OptimizeOptions {
    pub cell_center: Arc<dyn CellCenter>,
    pub seeding: Arc<dyn Seeding>,
    pub max_rounds: usize,
    pub rel_tol: f64,
    /// Starting codebook used in addition to the seeded restarts.
    pub warm_start: Option<Vec<Point>>,
}

impl Default for OptimizeOptions {
    fn default() -> Self {
        Self {
            cell_center: Arc::new(Auto),
            seeding: Arc::new(DrSeeding),
            max_rounds: MAX_ROUNDS,
            rel_tol: REL_TOL,
            warm_start: None,
        }
    }
}

impl OptimizeOptions {
    pub fn by_name(cell_center: &str, seeding: &str) -> Result<Self, QuantError> {
        let cell_center =
            cell_centers()
                .get(cell_center)
                .ok_or_else(|| QuantError::UnknownStrategy {
                    kind: "cell update",
                    name: cell_center.to_string(),
                })?;
        let seeding = seedings()
            .get(seeding)
            .ok_or_else(|| QuantError::UnknownStrategy {
                kind: "seeding",
                name: seeding.to_string(),
            })?;
        Ok(Self {
            cell_center,
            seeding,
            ..Default::default()
        })
    }
}

fn distinct_count(samples: &[Point]) -> usize {
    let mut v = samples.to_vec();
    v.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    v.dedup();
    v.len()
}

/// Alternating optimization from one start. Returns the codebook with the
/// smallest distortion seen and that distortion.
fn lloyd(
    samples: &[Point],
    start: Vec<Point>,
    r: f64,
    line: bool,
    opts: &OptimizeOptions,
) -> (Vec<Point>, f64) {
    let m = samples.len();
    let mut codebook = start;
    let mut assign = vec![0usize; m];
    let mut best = (codebook.clone(), f64::INFINITY);
    let mut previous = f64::INFINITY;
    for _ in 0..opts.max_rounds {
        let nearest = Nearest::new(&codebook, line);
        assign
            .par_chunks_mut(SAMPLE_CHUNK)
            .enumerate()
            .for_each(|(c, out)| {
                for (j, slot) in out.iter_mut().enumerate() {
                    *slot = nearest.find(samples[c * SAMPLE_CHUNK + j]);
                }
            });
        let (s, _) = chunked_moments(|j| dist_pow(samples[j], codebook[assign[j]], r), m);
        let cost = s / m as f64;
        if cost < best.1 {
            best = (codebook.clone(), cost);
        }
        if previous.is_finite() && (previous - cost) <= opts.rel_tol * previous {
            break;
        }
        previous = cost;
        let mut cells: Vec<Vec<Point>> = vec![Vec::new(); codebook.len()];
        for (x, &i) in samples.iter().zip(&assign) {
            cells[i].push(*x);
        }
        let updated: Vec<Option<Point>> = cells
            .par_iter()
            .zip(codebook.par_iter())
            .map(|(cell, &a)| (!cell.is_empty()).then(|| opts.cell_center.update(cell, r, a, line)))
            .collect();
        let mut empty = Vec::new();
        for (i, u) in updated.into_iter().enumerate() {
            match u {
                Some(p) => codebook[i] = p,
                None => empty.push(i),
            }
        }
        // Empty cells move to the worst-served samples.
        if !empty.is_empty() {
            let mut order: Vec<usize> = (0..m).collect();
            order.sort_by(|&a, &b| {
                let da = dist_pow(samples[a], codebook[assign[a]], r);
                let db = dist_pow(samples[b], codebook[assign[b]], r);
                db.total_cmp(&da).then(a.cmp(&b))
            });
            let mut it = order.into_iter();
            for i in empty {
                for j in it.by_ref() {
                    if !codebook.contains(&samples[j]) {
                        codebook[i] = samples[j];
                        break;
                    }
                }
            }
        }
    }
    best
}

/// Best codebook of at most `n` points over `restarts` seeded starts (plus
/// the warm start, if any).
pub fn optimize_codebook(
    samples: &[Point],
    n: usize,
    r: f64,
    restarts: usize,
    seed: u64,
    opts: &OptimizeOptions,
) -> Result<QuantEstimate, QuantError> {
    check_r(r)?;
    if n == 0 {
        return Err(QuantError::ZeroSize);
    }
    if samples.is_empty() {
        return Err(QuantError::EmptySamples);
    }
    if samples.len() < 10 * n {
        return Err(QuantError::TooFewSamples {
            n,
            samples: samples.len(),
        });
    }
    let distinct = distinct_count(samples);
    if n > distinct {
        return Err(QuantError::TooFewDistinct { n, distinct });
    }
    if let Some(w) = &opts.warm_start {
        if w.is_empty() || w.len() > n {
            return Err(QuantError::WarmStartSize { n, found: w.len() });
        }
    }
    let line = is_line(samples);
    let mut starts: Vec<Vec<Point>> = Vec::new();
    if let Some(w) = &opts.warm_start {
        starts.push(w.clone());
    }
    for i in 0..restarts {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, i as u64));
        starts.push(opts.seeding.seed(samples, n, r, &mut rng));
    }
    if starts.is_empty() {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0));
        starts.push(opts.seeding.seed(samples, n, r, &mut rng));
    }
    let results: Vec<(Vec<Point>, f64)> = starts
        .into_iter()
        .map(|s| lloyd(samples, s, r, line, opts))
        .collect();
    let (codebook, _) = results
        .into_iter()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("at least one start");
    let (e, se) = estimate_error(samples, &codebook, r)?;
    Ok(QuantEstimate {
        n,
        r,
        codebook,
        e_r_pow_r: e,
        std_error: se,
        samples_used: samples.len(),
        restarts,
    })
}

/// Estimates for every `n`. Entry `i` samples with `derive_seed(seed, 2i)`
/// and optimizes with `derive_seed(seed, 2i + 1)`. `warm_starts[i]`, when
/// present, seeds the optimization for `n_list[i]`.
#[allow(clippy::too_many_arguments)]
pub fn empirical_curve(
    sys: &IsmSystem,
    r: f64,
    n_list: &[usize],
    samples_per_n: usize,
    restarts: usize,
    seed: u64,
    warm_starts: &[Option<Vec<Point>>],
    opts: &OptimizeOptions,
) -> Result<Vec<QuantEstimate>, QuantError> {
    n_list
        .iter()
        .enumerate()
        .map(|(i, &n)| {
            let samples = sample_batch(
                sys,
                samples_per_n,
                derive_seed(seed, 2 * i as u64),
                DEFAULT_SAMPLE_EPS,
            )?;
            let mut o = opts.clone();
            o.warm_start = warm_starts.get(i).cloned().flatten();
            optimize_codebook(
                &samples,
                n,
                r,
                restarts,
                derive_seed(seed, 2 * i as u64 + 1),
                &o,
            )
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OrderPoint {
    pub n: f64,
    pub ln_value: f64,
}

impl OrderPoint {
    pub fn new(n: f64, value: f64) -> Self {
        Self {
            n,
            ln_value: value.ln(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FitModel {
    PurePower,
    LogCorrected,
}

impl FitModel {
    pub fn label(&self) -> &'static str {
        match self {
            FitModel::PurePower => "PURE_POWER",
            FitModel::LogCorrected => "LOG_CORRECTED",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OrderFit {
    pub model: FitModel,
    pub slope: f64,
    pub log_exponent: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub points: usize,
}

/// Least squares of `ln e` on `ln n` (and `ln ln n` with `with_log_term`).
pub fn fit_order(points: &[OrderPoint], with_log_term: bool) -> Result<OrderFit, QuantError> {
    if points.len() < 4 {
        return Err(QuantError::TooFewPoints(points.len()));
    }
    if let Some(p) = points
        .iter()
        .find(|p| p.n.is_nan() || p.n <= 1.0 || !p.ln_value.is_finite())
    {
        return Err(QuantError::NonPositive(p.n));
    }
    let (lo, hi) = points.iter().fold((f64::INFINITY, 0.0_f64), |(a, b), p| {
        (a.min(p.n), b.max(p.n))
    });
    let span = (hi / lo).log10();
    if span < 1.5 {
        return Err(QuantError::InsufficientSpan(span));
    }
    let cols = if with_log_term { 3 } else { 2 };
    let a = DMatrix::from_fn(points.len(), cols, |i, j| {
        let ln_n = points[i].n.ln();
        match j {
            0 => 1.0,
            1 => ln_n,
            _ => ln_n.ln(),
        }
    });
    let b = DVector::from_iterator(points.len(), points.iter().map(|p| p.ln_value));
    let coef = a
        .clone()
        .svd(true, true)
        .solve(&b, 1e-14)
        .map_err(|_| QuantError::Singular)?;
    let fitted = &a * &coef;
    let mean = b.mean();
    let ss_tot: f64 = b.iter().map(|y| (y - mean).powi(2)).sum();
    let ss_res: f64 = b
        .iter()
        .zip(fitted.iter())
        .map(|(y, f)| (y - f).powi(2))
        .sum();
    let r_squared = if ss_tot > 0.0 {
        (1.0 - ss_res / ss_tot).clamp(0.0, 1.0)
    } else {
        1.0
    };
    Ok(OrderFit {
        model: if with_log_term {
            FitModel::LogCorrected
        } else {
            FitModel::PurePower
        },
        slope: coef[1],
        log_exponent: if with_log_term { coef[2] } else { 0.0 },
        intercept: coef[0],
        r_squared,
        points: points.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform(m: usize, seed: u64) -> Vec<Point> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..m).map(|_| [rng.gen::<f64>(), 0.0]).collect()
    }

    #[test]
    fn uniform_half_point() {
        let s = uniform(100_000, 1);
        let (e, se) = estimate_error(&s, &[[0.5, 0.0]], 2.0).unwrap();
        assert!((e - 1.0 / 12.0).abs() < 3.0 * se + 1e-12, "{e} ± {se}");
        let (e1, _) = estimate_error(&s, &[[0.5, 0.0]], 1.0).unwrap();
        assert!((e1 - 0.25).abs() < 0.005);
    }

    #[test]
    fn codebook_of_all_samples_is_exact() {
        let s = uniform(200, 2);
        assert_eq!(estimate_error(&s, &s, 2.0).unwrap().0, 0.0);
        assert_eq!(estimate_error(&s, &[], 2.0), Err(QuantError::EmptyCodebook));
    }

    #[test]
    fn line_fast_path_matches_brute_force() {
        let s = uniform(5000, 3);
        let cb: Vec<Point> = uniform(37, 4);
        let mut dup = cb.clone();
        dup.push(cb[3]);
        for book in [&cb, &dup] {
            for r in [0.5, 1.0, 2.0, 3.5] {
                let fast = estimate_error(&s, book, r).unwrap().0;
                let slow: f64 = s
                    .iter()
                    .map(|x| {
                        book.iter()
                            .map(|a| (x[0] - a[0]).abs().powf(r))
                            .fold(f64::INFINITY, f64::min)
                    })
                    .sum::<f64>()
                    / s.len() as f64;
                assert!((fast - slow).abs() <= 1e-12 * slow.max(1e-300));
            }
        }
    }

    #[test]
    fn one_point_optimum() {
        let s = uniform(20_000, 5);
        let est = optimize_codebook(&s, 1, 2.0, 2, 9, &OptimizeOptions::default()).unwrap();
        assert!((est.codebook[0][0] - 0.5).abs() < 0.01);
        assert!((est.e_r_pow_r - 1.0 / 12.0).abs() < 0.002);
    }

    #[test]
    fn general_order_center_on_line() {
        let cell: Vec<Point> = vec![[0.0, 0.0], [0.0, 0.0], [1.0, 0.0]];
        let c = LrFixedPoint.update(&cell, 3.0, [0.9, 0.0], true);
        // Minimizer of 2a³ + (1 − a)³ on [0, 1]: a = 1/(1 + √2).
        assert!((c[0] - 1.0 / (1.0 + 2f64.sqrt())).abs() < 1e-10);
        let planar: Vec<Point> = vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
        let start = [0.9, 0.9];
        let p = LrFixedPoint.update(&planar, 1.5, start, false);
        assert!(cell_cost(&planar, p, 1.5) < cell_cost(&planar, start, 1.5));
    }

    #[test]
    fn monotone_in_n_on_fixed_samples() {
        let s = uniform(5000, 6);
        let mut prev = f64::INFINITY;
        for n in 1..=6 {
            let est = optimize_codebook(&s, n, 2.0, 4, 11, &OptimizeOptions::default()).unwrap();
            assert!(est.e_r_pow_r <= prev + 1e-15);
            prev = est.e_r_pow_r;
        }
    }

    #[test]
    fn warm_start_is_never_worse() {
        let s = uniform(5000, 7);
        let supplied: Vec<Point> = (0..5).map(|i| [0.1 + 0.2 * i as f64, 0.0]).collect();
        let (direct, _) = estimate_error(&s, &supplied, 2.0).unwrap();
        let opts = OptimizeOptions {
            warm_start: Some(supplied),
            ..Default::default()
        };
        let est = optimize_codebook(&s, 5, 2.0, 0, 1, &opts).unwrap();
        assert!(est.e_r_pow_r <= direct);
    }

    #[test]
    fn deterministic_given_seed() {
        let s = uniform(8000, 8);
        let a = optimize_codebook(&s, 4, 1.5, 3, 42, &OptimizeOptions::default()).unwrap();
        let b = optimize_codebook(&s, 4, 1.5, 3, 42, &OptimizeOptions::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_bad_sizes() {
        let s = uniform(50, 9);
        assert!(matches!(
            optimize_codebook(&s, 6, 2.0, 1, 0, &OptimizeOptions::default()),
            Err(QuantError::TooFewSamples { .. })
        ));
        let same = vec![[0.5, 0.0]; 100];
        assert!(matches!(
            optimize_codebook(&same, 2, 2.0, 1, 0, &OptimizeOptions::default()),
            Err(QuantError::TooFewDistinct { .. })
        ));
        assert!(OptimizeOptions::by_name("nope", "dr").is_err());
    }

    #[test]
    fn scale_covariance() {
        let s = uniform(1000, 10);
        let cb = uniform(7, 11);
        let lam = 3.0;
        let scale =
            |v: &[Point]| -> Vec<Point> { v.iter().map(|p| [lam * p[0], lam * p[1]]).collect() };
        for r in [1.0, 2.0, 2.7] {
            let (a, _) = estimate_error(&s, &cb, r).unwrap();
            let (b, _) = estimate_error(&scale(&s), &scale(&cb), r).unwrap();
            assert!((b - lam.powf(r) * a).abs() <= 1e-12 * b);
        }
    }

    #[test]
    fn fit_recovers_models() {
        let pure: Vec<OrderPoint> = (1..=8)
            .map(|i| {
                let n = 10f64.powf(0.5 * i as f64);
                OrderPoint::new(n, n.powf(-2.0))
            })
            .collect();
        let f = fit_order(&pure, false).unwrap();
        assert!((f.slope + 2.0).abs() < 1e-6);
        assert_eq!(f.log_exponent, 0.0);
        assert!(f.r_squared > 0.999_999);
        let logged: Vec<OrderPoint> = (1..=10)
            .map(|i| {
                let n = 10f64.powf(0.6 * i as f64);
                OrderPoint::new(n, n.powf(-2.0) * n.ln().powi(3))
            })
            .collect();
        let g = fit_order(&logged, true).unwrap();
        assert!((g.slope + 2.0).abs() < 1e-3);
        assert!((g.log_exponent - 3.0).abs() < 1e-3);
    }

    #[test]
    fn fit_rejects_short_series() {
        let pts: Vec<OrderPoint> = (2..5).map(|n| OrderPoint::new(n as f64, 1.0)).collect();
        assert_eq!(fit_order(&pts, false), Err(QuantError::TooFewPoints(3)));
        let narrow: Vec<OrderPoint> = (2..8).map(|n| OrderPoint::new(n as f64, 1.0)).collect();
        assert!(matches!(
            fit_order(&narrow, false),
            Err(QuantError::InsufficientSpan(_))
        ));
    }
}
