mod common;

use common::{case_one_example, case_one_system, case_two_system};
use ismq_core::model::{distance, sample_batch, Family, Similitude};
use ismq_core::words::Word;
use proptest::prelude::*;

fn level(alphabet: u16, len: usize) -> Vec<Word> {
    let mut words = vec![Word::empty(alphabet).unwrap()];
    for _ in 0..len {
        words = words
            .iter()
            .flat_map(|w| (0..alphabet as usize).map(move |i| w.child(i).unwrap()))
            .collect();
    }
    words
}

#[test]
fn closed_form_matches_recursion_to_length_twelve() {
    let sys = case_one_example();
    let mut checked = 0;
    for len in 1..=12 {
        for w in level(2, len) {
            let a = sys.cylinder_mass_case1(&w).unwrap();
            let b = sys.cylinder_mass_case1_recursive(&w).unwrap();
            assert!((a - b).abs() <= 1e-12, "{w}: {a} vs {b}");
            checked += 1;
        }
    }
    assert_eq!(checked, 8190);
}

#[test]
fn sampled_cylinder_frequencies_match_masses() {
    let sys = case_one_example();
    let m = 200_000;
    let pts = sample_batch(&sys, m, 3, 1e-10).unwrap();
    for w in level(2, 2) {
        let f = sys.word_map(&w, Family::Outer).unwrap();
        let (a, b) = (f.apply([0.0, 0.0])[0], f.apply([1.0, 0.0])[0]);
        let (lo, hi) = (a.min(b), a.max(b));
        let hits = pts.iter().filter(|p| p[0] >= lo && p[0] <= hi).count() as f64;
        let mass = sys.cylinder_mass_case1(&w).unwrap();
        let sd = (mass * (1.0 - mass) / m as f64).sqrt();
        assert!((hits / m as f64 - mass).abs() < 5.0 * sd, "{w}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn similitudes_scale_distances(
        s in 0.01f64..0.99,
        angle in -3.2f64..3.2,
        b in prop::array::uniform2(-5.0f64..5.0),
        x in prop::array::uniform2(-5.0f64..5.0),
        y in prop::array::uniform2(-5.0f64..5.0),
    ) {
        prop_assume!(distance(x, y) > 1e-6);
        let f = Similitude::plane(s, angle, b).unwrap();
        let ratio = distance(f.apply(x), f.apply(y)) / distance(x, y);
        prop_assert!((ratio - s).abs() < 1e-12);
    }

    #[test]
    fn masses_are_additive_and_formulas_agree(
        sys in case_one_system(),
        symbols in prop::collection::vec(1u16..=2, 0..10),
    ) {
        let w = Word::new(sys.outer_alphabet(), symbols).unwrap();
        let m = sys.cylinder_mass_case1(&w).unwrap();
        prop_assert!((m - sys.cylinder_mass_case1_recursive(&w).unwrap()).abs() <= 1e-12);
        let children: f64 = (0..sys.outer_alphabet() as usize)
            .map(|i| sys.cylinder_mass_case1(&w.child(i).unwrap()).unwrap())
            .sum();
        prop_assert!((m - children).abs() <= 1e-12 * m.max(1e-300) + 1e-15);
    }

    #[test]
    fn level_masses_sum_to_one(sys in case_one_system(), len in 0usize..6) {
        let total: f64 = level(sys.outer_alphabet(), len)
            .iter()
            .map(|w| sys.cylinder_mass_case1(w).unwrap())
            .sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn generated_systems_are_separated(a in case_one_system(), b in case_two_system()) {
        prop_assert!(a.check_separation().passed);
        prop_assert!(b.check_separation().passed);
        prop_assert!((a.support_hull().diameter() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn normalize_is_idempotent(a in case_one_system(), b in case_two_system()) {
        for sys in [a, b] {
            let once = sys.normalize().unwrap();
            let twice = once.normalize().unwrap();
            prop_assert!((twice.normalization_scale() / once.normalization_scale() - 1.0).abs() < 1e-12);
            prop_assert!((once.support_hull().diameter() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn case_two_patch_masses_at_depth_one_sum_to_one(sys in case_two_system()) {
        // μ = p₀ν + Σ pᵢ μ∘fᵢ⁻¹, with ν split over inner level 1.
        let mut total = 0.0;
        for i in 0..2 {
            total += sys.patch_mass_case2(&Word::from_indices(2, &[i]).unwrap(), None).unwrap();
        }
        let theta = Word::empty(2).unwrap();
        for j in 0..2 {
            let rho = Word::from_indices(2, &[j]).unwrap();
            total += sys.patch_mass_case2(&theta, Some(&rho)).unwrap();
        }
        prop_assert!((total - 1.0).abs() < 1e-12);
    }
}
