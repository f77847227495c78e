#![allow(dead_code)]

use ismq_core::model::{Dimension, IsmSystem, Similitude};
use proptest::prelude::*;

pub fn eighths() -> Vec<Similitude> {
    vec![
        Similitude::line(0.125, 1.0, 0.0).unwrap(),
        Similitude::line(0.125, 1.0, 0.875).unwrap(),
    ]
}

pub fn case_one_example() -> IsmSystem {
    IsmSystem::case_one(
        Dimension::One,
        eighths(),
        vec![0.05, 0.475, 0.475],
        vec![1.0 / 3.0, 2.0 / 3.0],
    )
    .unwrap()
}

pub fn case_two_example() -> IsmSystem {
    IsmSystem::case_two(
        Dimension::One,
        eighths(),
        vec![
            Similitude::line(0.125, 1.0, 1.0 / 3.0).unwrap(),
            Similitude::line(0.125, 1.0, 13.0 / 24.0).unwrap(),
        ],
        vec![0.05, 0.475, 0.475],
        vec![1.0 / 3.0, 2.0 / 3.0],
    )
    .unwrap()
}

fn normalized(raw: &[f64]) -> Vec<f64> {
    let total: f64 = raw.iter().sum();
    raw.iter().map(|x| x / total).collect()
}

/// Maps of the line with images in disjoint slots of `[0, 1]`, first at 0
/// and last ending at 1.
fn slotted_maps(scales: &[f64], flips: &[bool]) -> Vec<Similitude> {
    let n = scales.len();
    scales
        .iter()
        .zip(flips)
        .enumerate()
        .map(|(i, (&s, &flip))| {
            let left = if i + 1 == n {
                1.0 - s
            } else {
                i as f64 / n as f64
            };
            if flip {
                Similitude::line(s, -1.0, left + s).unwrap()
            } else {
                Similitude::line(s, 1.0, left).unwrap()
            }
        })
        .collect()
}

/// Random strongly separated Case-(i) systems on the line with `diam K = 1`.
pub fn case_one_system() -> impl Strategy<Value = IsmSystem> {
    (2usize..=3)
        .prop_flat_map(|n| {
            (
                prop::collection::vec(0.05f64..0.3, n),
                prop::collection::vec(any::<bool>(), n),
                0.02f64..0.3,
                prop::collection::vec(0.1f64..1.0, n),
                prop::collection::vec(0.1f64..1.0, n),
            )
        })
        .prop_map(|(scales, flips, p0, praw, traw)| {
            let branch = normalized(&praw);
            let mut p = vec![p0];
            p.extend(branch.iter().map(|x| x * (1.0 - p0)));
            IsmSystem::case_one(
                Dimension::One,
                slotted_maps(&scales, &flips),
                p,
                normalized(&traw),
            )
            .unwrap()
        })
}

/// Random Case-(ii) systems: two outer maps at the ends of `[0, 1]` and two
/// small inner maps inside the central gap.
pub fn case_two_system() -> impl Strategy<Value = IsmSystem> {
    (
        prop::collection::vec(0.05f64..0.3, 2),
        prop::collection::vec(0.03f64..0.09, 2),
        0.02f64..0.3,
        prop::collection::vec(0.1f64..1.0, 2),
        prop::collection::vec(0.1f64..1.0, 2),
    )
        .prop_map(|(s, c, p0, praw, traw)| {
            let outer = vec![
                Similitude::line(s[0], 1.0, 0.0).unwrap(),
                Similitude::line(s[1], 1.0, 1.0 - s[1]).unwrap(),
            ];
            let inner = vec![
                Similitude::line(c[0], 1.0, 0.4).unwrap(),
                Similitude::line(c[1], 1.0, 0.6 - c[1]).unwrap(),
            ];
            let branch = normalized(&praw);
            let mut p = vec![p0];
            p.extend(branch.iter().map(|x| x * (1.0 - p0)));
            IsmSystem::case_two(Dimension::One, outer, inner, p, normalized(&traw)).unwrap()
        })
}
