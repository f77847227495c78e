//! `manifest.json`: what ran, on which config, and what it wrote.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::verify::Check;

#[derive(Serialize)]
pub struct CheckEntry<'a> {
    pub name: &'a str,
    pub status: &'static str,
}

#[derive(Serialize)]
pub struct Manifest<'a> {
    pub tool: &'static str,
    pub version: &'static str,
    pub subcommand: &'a str,
    pub config_sha256: &'a str,
    pub seed: u64,
    pub derived_seeds: &'a BTreeMap<String, u64>,
    pub outputs: BTreeMap<&'a str, String>,
    pub checks: Vec<CheckEntry<'a>>,
    pub notes: &'a [String],
}

pub fn checks(list: &[Check]) -> Vec<CheckEntry<'_>> {
    list.iter()
        .map(|c| CheckEntry {
            name: &c.name,
            status: c.status(),
        })
        .collect()
}
