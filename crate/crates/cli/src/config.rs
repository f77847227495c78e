//! Run configuration: JSON in, validated `IsmSystem` out.
//!
//! Numbers may be written as JSON numbers or as exact fractions such as
//! `"1/3"`. A fraction becomes the nearest double (a single IEEE division of
//! two exactly representable integers) and the rounding is recorded as a
//! note in the run manifest.

use std::f64::consts::TAU;
use std::path::{Path, PathBuf};

use ismq_core::model::{Dimension, IsmSystem, Similitude};
use serde::Deserialize;

use crate::error::CliError;

/// A number as written in the config.
#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum Num {
    Float(f64),
    Text(String),
}

/// Largest integer that converts to `f64` exactly.
const EXACT_INT: u64 = 1 << 53;

impl Num {
    /// The value and, for fractions whose quotient is inexact, a rounding note.
    pub fn resolve(&self, field: &str) -> Result<(f64, Option<String>), CliError> {
        match self {
            Num::Float(x) => Ok((*x, None)),
            Num::Text(s) => parse_fraction(s)
                .map(|(x, exact)| {
                    let note = (!exact).then(|| format!("{field} = {s} rounded to {x:.17e}"));
                    (x, note)
                })
                .ok_or_else(|| {
                    CliError::Config(format!("`{field}`: cannot parse `{s}` as a number"))
                }),
        }
    }
}

fn parse_fraction(s: &str) -> Option<(f64, bool)> {
    let s = s.trim();
    let Some((a, b)) = s.split_once('/') else {
        return s.parse::<f64>().ok().map(|x| (x, true));
    };
    let num: i64 = a.trim().parse().ok()?;
    let den: i64 = b.trim().parse().ok()?;
    if den == 0 || num.unsigned_abs() > EXACT_INT || den.unsigned_abs() > EXACT_INT {
        return None;
    }
    // The quotient is exact iff the reduced denominator is a power of two.
    let g = gcd(num.unsigned_abs(), den.unsigned_abs());
    let exact = (den.unsigned_abs() / g).is_power_of_two();
    Some((num as f64 / den as f64, exact))
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum Translation {
    Line(Num),
    Plane([Num; 2]),
}

/// `x ↦ scale · R(rotation) x + translation`, with `rotation` in turns. On
/// the line a rotation of 0 keeps orientation and 1/2 flips it.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapSpec {
    pub scale: Num,
    #[serde(default = "zero")]
    pub rotation: Num,
    pub translation: Translation,
}

fn zero() -> Num {
    Num::Float(0.0)
}

#[derive(Clone, Copy, Debug, Deserialize, PartialEq, Eq)]
pub enum CaseTag {
    #[serde(rename = "i")]
    I,
    #[serde(rename = "ii")]
    II,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSpec {
    pub case: CaseTag,
    pub dimension: u8,
    pub outer: Vec<MapSpec>,
    #[serde(default)]
    pub inner: Vec<MapSpec>,
    pub p: Vec<Num>,
    pub t: Vec<Num>,
}

#[derive(Clone, Copy, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CrossingSpec {
    pub r_lo: f64,
    pub r_hi: f64,
}

fn default_restarts() -> usize {
    ismq_core::quantizer::DEFAULT_RESTARTS
}
fn default_samples() -> usize {
    100_000
}
fn default_true() -> bool {
    true
}
fn default_solver() -> String {
    "bisection".into()
}
fn default_cell() -> String {
    "auto".into()
}
fn default_seeding() -> String {
    "dr".into()
}
fn default_route() -> String {
    "type-class".into()
}
fn default_cap() -> usize {
    ismq_core::antichain::DEFAULT_CAP
}
fn default_out() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub system: SystemSpec,
    #[serde(default)]
    pub r_list: Vec<Num>,
    #[serde(default)]
    pub k_list: Vec<Num>,
    /// Codebook sizes for `empirical`; empty means the antichain sizes.
    #[serde(default)]
    pub n_list: Vec<usize>,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "default_restarts")]
    pub restarts: usize,
    pub seed: Option<u64>,
    #[serde(default = "default_out")]
    pub output_dir: PathBuf,
    #[serde(default = "default_true")]
    pub psi_h0: bool,
    #[serde(default)]
    pub aggregates_only: bool,
    #[serde(default = "default_true")]
    pub warm_start: bool,
    pub crossing: Option<CrossingSpec>,
    #[serde(default = "default_solver")]
    pub solver: String,
    #[serde(default = "default_cell")]
    pub cell_update: String,
    #[serde(default = "default_seeding")]
    pub seeding: String,
    #[serde(default = "default_route")]
    pub route: String,
    #[serde(default = "default_cap")]
    pub cap: usize,
}

/// A config after validation.
#[derive(Clone, Debug)]
pub struct Resolved {
    pub raw: RunConfig,
    pub system: IsmSystem,
    pub r_list: Vec<f64>,
    pub k_list: Vec<f64>,
    pub seed: u64,
    pub notes: Vec<String>,
}

pub fn load(path: &Path) -> Result<(RunConfig, Vec<u8>), CliError> {
    let bytes = std::fs::read(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let cfg = serde_json::from_slice(&bytes)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    Ok((cfg, bytes))
}

fn map(
    spec: &MapSpec,
    dimension: Dimension,
    field: &str,
    notes: &mut Vec<String>,
) -> Result<Similitude, CliError> {
    let mut num = |n: &Num, name: &str| -> Result<f64, CliError> {
        let (x, note) = n.resolve(&format!("{field}.{name}"))?;
        notes.extend(note);
        Ok(x)
    };
    let scale = num(&spec.scale, "scale")?;
    let turns = num(&spec.rotation, "rotation")?;
    let bad = |e: ismq_core::model::ModelError| CliError::Config(format!("`{field}`: {e}"));
    match (dimension, &spec.translation) {
        (Dimension::One, Translation::Line(b)) => {
            let b = num(b, "translation")?;
            let sign = match turns.rem_euclid(1.0) {
                0.0 => 1.0,
                0.5 => -1.0,
                _ => {
                    return Err(CliError::Config(format!(
                        "`{field}.rotation` must be 0 or 1/2 on the line, got {turns}"
                    )))
                }
            };
            Similitude::line(scale, sign, b).map_err(bad)
        }
        (Dimension::Two, Translation::Plane([x, y])) => {
            let b = [num(x, "translation[0]")?, num(y, "translation[1]")?];
            Similitude::plane(scale, TAU * turns, b).map_err(bad)
        }
        _ => Err(CliError::Config(format!(
            "`{field}.translation` does not match dimension {}",
            dimension.value()
        ))),
    }
}

fn numbers(v: &[Num], field: &str, notes: &mut Vec<String>) -> Result<Vec<f64>, CliError> {
    v.iter()
        .enumerate()
        .map(|(i, n)| {
            let (x, note) = n.resolve(&format!("{field}[{i}]"))?;
            notes.extend(note);
            Ok(x)
        })
        .collect()
}

impl RunConfig {
    /// Validates every vector and builds the system. `seed_override` wins
    /// over the config's seed.
    pub fn resolve(self, seed_override: Option<u64>) -> Result<Resolved, CliError> {
        let mut notes = Vec::new();
        let s = &self.system;
        let dimension = match s.dimension {
            1 => Dimension::One,
            2 => Dimension::Two,
            d => {
                return Err(CliError::Config(format!(
                    "`system.dimension` must be 1 or 2, got {d}"
                )))
            }
        };
        let outer = s
            .outer
            .iter()
            .enumerate()
            .map(|(i, m)| map(m, dimension, &format!("system.outer[{i}]"), &mut notes))
            .collect::<Result<Vec<_>, _>>()?;
        let inner = s
            .inner
            .iter()
            .enumerate()
            .map(|(i, m)| map(m, dimension, &format!("system.inner[{i}]"), &mut notes))
            .collect::<Result<Vec<_>, _>>()?;
        let p = numbers(&s.p, "system.p", &mut notes)?;
        let t = numbers(&s.t, "system.t", &mut notes)?;
        let invalid = |e: ismq_core::model::ModelError| CliError::Config(format!("system: {e}"));
        let system = match s.case {
            CaseTag::I => {
                if !inner.is_empty() {
                    return Err(CliError::Config(
                        "`system.inner` is only used in case ii".into(),
                    ));
                }
                IsmSystem::case_one(dimension, outer, p, t).map_err(invalid)?
            }
            CaseTag::II => IsmSystem::case_two(dimension, outer, inner, p, t).map_err(invalid)?,
        };
        let r_list = numbers(&self.r_list, "r_list", &mut notes)?;
        if let Some(r) = r_list.iter().find(|r| !(**r > 0.0 && r.is_finite())) {
            return Err(CliError::Config(format!(
                "`r_list` entry {r} must be positive"
            )));
        }
        let k_list = numbers(&self.k_list, "k_list", &mut notes)?;
        if let Some(k) = k_list.iter().find(|k| !(**k >= 1.0 && k.is_finite())) {
            return Err(CliError::Config(format!("`k_list` entry {k} must be ≥ 1")));
        }
        if self.n_list.contains(&0) {
            return Err(CliError::Config("`n_list` entries must be ≥ 1".into()));
        }
        if let Some(c) = self.crossing {
            if !(c.r_lo > 0.0 && c.r_hi > c.r_lo && c.r_hi.is_finite()) {
                return Err(CliError::Config(format!(
                    "`crossing` needs 0 < r_lo < r_hi, got [{}, {}]",
                    c.r_lo, c.r_hi
                )));
            }
        }
        if self.cap == 0 {
            return Err(CliError::Config("`cap` must be ≥ 1".into()));
        }
        check_name(
            "solver",
            &self.solver,
            &ismq_core::solver::root_solvers().names(),
        )?;
        check_name(
            "cell_update",
            &self.cell_update,
            &ismq_core::quantizer::cell_centers().names(),
        )?;
        check_name(
            "seeding",
            &self.seeding,
            &ismq_core::quantizer::seedings().names(),
        )?;
        check_name(
            "route",
            &self.route,
            &ismq_core::antichain2::case_two_routes().names(),
        )?;
        let seed = seed_override.or(self.seed).ok_or_else(|| {
            CliError::Config("`seed` is required (in the config or via --seed)".into())
        })?;
        Ok(Resolved {
            raw: self,
            system,
            r_list,
            k_list,
            seed,
            notes,
        })
    }
}

fn check_name(field: &str, name: &str, known: &[&str]) -> Result<(), CliError> {
    if known.contains(&name) {
        Ok(())
    } else {
        Err(CliError::Config(format!(
            "`{field}` = `{name}` is not one of: {}",
            known.join(", ")
        )))
    }
}
