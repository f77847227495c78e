mod common;

use common::{case_one_example, case_one_system, case_two_example, case_two_system};
use ismq_core::antichain::{build_lambda, build_lambda_with, eta_bounds, BuildOptions};
use ismq_core::antichain2::{
    build_gamma, build_gamma_sigma, build_psi, lambda_tilde, lambda_tilde_with, pi_bounds,
    CaseTwoOptions,
};
use ismq_core::dims::{classify, find_crossing_r};
use ismq_core::model::Family;
use ismq_core::words::verify_maximal_antichain;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn lambda_invariants(sys in case_one_system(), ln_k in 0.0f64..9.0, r in 0.2f64..6.0) {
        let k = ln_k.exp();
        let rec = build_lambda(&sys, k, r).unwrap();
        let words = rec.words.as_ref().unwrap();
        prop_assert!(verify_maximal_antichain(sys.outer_alphabet(), words.members()));
        prop_assert_eq!(words.len(), rec.n_kr);
        prop_assert!(rec.l1 <= rec.l2);
        prop_assert!((rec.mass_sum - 1.0).abs() < 1e-10);
        prop_assert!((rec.unity_sum - 1.0).abs() < 1e-9);
        let (eta, _) = eta_bounds(&sys, r).unwrap();
        let thr = eta / k;
        for w in words.members() {
            let h = |v: &ismq_core::Word| {
                sys.cylinder_mass_case1(v).unwrap()
                    * sys.word_map(v, Family::Outer).unwrap().scale().powf(r)
            };
            prop_assert!(h(w) < thr);
            if let Some(parent) = w.parent() {
                prop_assert!(h(&parent) >= thr * (1.0 - 1e-9));
                // One step shrinks h by at least the factor η̲ᵣ.
                prop_assert!(h(w) >= thr * eta * (1.0 - 1e-9));
            }
        }
        prop_assert!(rec.min_ln_h >= rec.ln_threshold + rec.min_ln_step - 1e-9);
        prop_assert!(rec.upper_bound > 0.0);
    }

    #[test]
    fn routes_agree_on_random_systems(sys in case_two_system(), k in 1u32..7, r in 0.5f64..4.0) {
        let xi = classify(&sys, r).unwrap();
        let opts = CaseTwoOptions::default();
        let a = lambda_tilde_with(&sys, k as f64, &xi, "enumerate", &opts).unwrap();
        let b = lambda_tilde_with(&sys, k as f64, &xi, "type-class", &opts).unwrap();
        prop_assert_eq!(a.gamma_count, b.gamma_count);
        prop_assert_eq!(a.psi_count, b.psi_count);
        prop_assert_eq!(a.patch_count, b.patch_count);
        prop_assert!((a.lambda_tilde - b.lambda_tilde).abs() <= 1e-10 * a.lambda_tilde);
        prop_assert!(b.lambda_tilde >= 1.0 - 1e-9);
        prop_assert!((b.gamma_unity - 1.0).abs() < 1e-9);
    }

    #[test]
    fn gamma_and_inner_antichains_are_maximal(sys in case_two_system(), k in 1u32..6, r in 0.5f64..4.0) {
        let k = k as f64;
        let gamma = build_gamma(&sys, k, r).unwrap();
        prop_assert!(verify_maximal_antichain(2, gamma.members()));
        let psi = build_psi(&sys, k, r, true, true).unwrap();
        for sigma in psi.words.unwrap() {
            let inner = build_gamma_sigma(&sys, &sigma, k, r).unwrap();
            prop_assert!(verify_maximal_antichain(2, inner.members()));
        }
        for sigma in gamma.members() {
            prop_assert!(build_gamma_sigma(&sys, sigma, k, r).unwrap().is_empty());
        }
    }

    #[test]
    fn depth_pinch(sys in case_two_system(), k in 1u32..30, r in 0.5f64..6.0) {
        let k = k as f64;
        let rec = match lambda_tilde(&sys, k, r) {
            Err(ismq_core::antichain::BuildError::TooDeep { .. }) => return Ok(()),
            other => other.unwrap(),
        };
        let (lo, hi) = pi_bounds(&sys, r).unwrap();
        prop_assert!(rec.l1 as f64 * lo.ln() < k * lo.ln());
        prop_assert!(k * lo.ln() <= (rec.l2 as f64 - 1.0) * hi.ln());
    }
}

#[test]
fn depth_grows_like_log_k() {
    let sys = case_one_example();
    let c = find_crossing_r(&sys, 0.01, 20.0).unwrap();
    let window = (0.1, 2.0);
    for r in [2.0, c.r] {
        for k in [10.0f64, 100.0, 1000.0, 1e4] {
            let rec = build_lambda(&sys, k, r).unwrap();
            for l in [rec.l1, rec.l2] {
                let ratio = l as f64 / k.ln();
                assert!(
                    ratio >= window.0 && ratio <= window.1,
                    "k={k} r={r} ratio={ratio}"
                );
            }
        }
    }
}

#[test]
fn lambda_bounded_off_the_crossing() {
    let sys = case_one_example();
    let lean = BuildOptions {
        keep_words: false,
        ..Default::default()
    };
    for r in [0.05, 20.0] {
        let values: Vec<f64> = (1..=14)
            .map(|j| {
                build_lambda_with(&sys, 2f64.powi(j), r, &lean)
                    .unwrap()
                    .lambda_kr
            })
            .collect();
        let max = values.iter().copied().fold(0.0, f64::max);
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        assert!(max / min <= 10.0, "r={r}: {values:?}");
    }
}

#[test]
fn phi_grows_linearly_in_log() {
    let sys = case_two_example();
    for r in [2.0, 20.0] {
        let recs: Vec<_> = (1..=24)
            .map(|k| lambda_tilde(&sys, k as f64, r).unwrap())
            .collect();
        for w in recs.windows(2) {
            let ratio = w[1].phi_kr as f64 / w[0].phi_kr as f64;
            assert!(ratio <= 10.0, "r={r}: {ratio}");
        }
        for rec in recs.iter().skip(4) {
            let slope = (rec.phi_kr as f64).ln() / rec.k;
            assert!(
                slope > 0.3 && slope < 3.0,
                "r={r} k={} slope={slope}",
                rec.k
            );
        }
    }
}

#[test]
fn term_count_sandwich_at_crossing() {
    let sys = case_two_example();
    let c = find_crossing_r(&sys, 0.01, 20.0).unwrap();
    let (lo, _) = pi_bounds(&sys, c.r).unwrap();
    for k in [5.0, 10.0, 20.0, 40.0] {
        let rec = lambda_tilde(&sys, k, c.r).unwrap();
        let x = rec.xi.exponent();
        let scaled = rec.patch_count as f64 * lo.powf(k * x);
        assert!(rec.l1 as f64 <= scaled && scaled <= (rec.l2 as f64 + 2.0) * lo.powf(-x));
        assert!(rec.l1 as f64 <= rec.lambda_tilde && rec.lambda_tilde <= rec.l2 as f64 + 2.0);
    }
}
