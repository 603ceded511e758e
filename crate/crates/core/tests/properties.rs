mod common;

use proptest::prelude::*;
use scsar::concentration::{gini_grouped, GroupedDistribution};
use scsar::engine::{self, ClusterAssignment};
use scsar::likelihood::{self, ModelFamily};
use scsar::synthesis::adjusted_rand_index;
use scsar::SpatialWeights;

use common::*;

fn graph() -> impl Strategy<Value = SpatialWeights> {
    (2usize..25, any::<u64>(), 0.05f64..0.4).prop_map(|(n, seed, p)| random_graph(n, p, &mut rng(seed)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn logdet_matches_dense(w in graph(), t in 0.01f64..0.99) {
        let (lo, hi) = w.admissible_interval().unwrap();
        let rho = lo + (hi - lo) * t;
        prop_assert!((w.log_det(rho).unwrap() - dense_logdet(&w, rho)).abs() < 1e-8);
    }

    #[test]
    fn spectrum_bounds_interval(w in graph()) {
        let s = w.spectrum();
        let (lo, hi) = w.admissible_interval().unwrap();
        prop_assert!(lo < 0.0 && hi > 0.0);
        prop_assert!((lo - 1.0 / s[0]).abs() < 1e-12 && (hi - 1.0 / s[s.len() - 1]).abs() < 1e-12);
        prop_assert!((s.iter().sum::<f64>()).abs() < 1e-8);
    }

    #[test]
    fn restrict_keeps_internal_edges(w in graph(), mask in any::<u64>()) {
        let members: Vec<usize> = (0..w.n()).filter(|i| mask >> (i % 64) & 1 == 1).collect();
        prop_assume!(!members.is_empty());
        let sub = w.restrict(&members).unwrap();
        for (a, &i) in members.iter().enumerate() {
            for (b, &j) in members.iter().enumerate() {
                prop_assert_eq!(sub.contains(a, b), w.contains(i, j));
            }
        }
    }

    #[test]
    fn sar_fit_is_scale_equivariant(seed in 0u64..500, c in 0.2f64..5.0) {
        let (d, w) = single_regime(40, 2, ModelFamily::Sar, 0.1, 4, seed);
        let scaled: Vec<f64> = d.y().iter().map(|v| v * c).collect();
        let a = likelihood::fit_sar(d.y(), d.x(), &w).unwrap();
        let b = likelihood::fit_sar(&scaled, d.x(), &w).unwrap();
        prop_assert!((a.spatial_param - b.spatial_param).abs() < 1e-7);
        for (x, y) in a.theta.iter().zip(&b.theta) {
            prop_assert!((x * c - y).abs() < 1e-6 * (1.0 + y.abs()));
        }
        let shift = -(d.n() as f64) * c.ln();
        prop_assert!((a.loglik + shift - b.loglik).abs() < 1e-7);
    }

    #[test]
    fn fits_are_permutation_invariant(seed in 0u64..500, family_ix in 0usize..4) {
        let family = ModelFamily::ALL[family_ix];
        let param = if family.has_spatial_param() { 0.1 } else { 0.0 };
        let (d, w) = single_regime(30, 1, family, param, 3, seed);
        let n = d.n();
        let order: Vec<usize> = (0..n).map(|i| (i * 7 + 3) % n).collect();
        let mut inv = vec![0; n];
        for (new, &old) in order.iter().enumerate() {
            inv[old] = new;
        }
        let pd = d.permuted(&order).unwrap();
        let pw = SpatialWeights::from_index_pairs(n, w.edges().map(|(i, j)| (inv[i], inv[j]))).unwrap();
        let opts = likelihood::FitOptions::strict();
        let a = likelihood::fit(family, d.y(), d.x(), &w, &opts).unwrap();
        let b = likelihood::fit(family, pd.y(), pd.x(), &pw, &opts).unwrap();
        prop_assert!((a.loglik - b.loglik).abs() < 1e-8);
        for (x, y) in a.estimates().iter().zip(b.estimates()) {
            prop_assert!((x - y).abs() < 1e-6);
        }
    }

    #[test]
    fn gini_scale_invariant_and_bounded(
        counts in prop::collection::vec(0u64..40, 1..8),
        per in prop::collection::vec(0.0f64..100.0, 8),
        c in 0.01f64..100.0,
    ) {
        let mut per = per[..counts.len()].to_vec();
        per.sort_by(f64::total_cmp);
        let outputs: Vec<f64> = counts.iter().zip(&per).map(|(&n, v)| n as f64 * v).collect();
        prop_assume!(counts.iter().sum::<u64>() >= 2 && outputs.iter().sum::<f64>() > 0.0);
        let scaled: Vec<f64> = outputs.iter().map(|v| v * c).collect();
        let g = gini_grouped(&GroupedDistribution::from_counts("r", &counts, &outputs).unwrap()).unwrap();
        let h = gini_grouped(&GroupedDistribution::from_counts("r", &counts, &scaled).unwrap()).unwrap();
        prop_assert!((0.0..=100.0).contains(&g));
        prop_assert!((g - h).abs() < 1e-12 * 100.0);
        prop_assert!((g - brute_gini(&expand_classes(&counts, &outputs))).abs() < 1e-10);
    }

    #[test]
    fn gini_merge_of_equal_classes(
        counts in prop::collection::vec(1u64..40, 2..7),
        per in prop::collection::vec(0.1f64..100.0, 7),
        at in 0usize..6,
        split in 1u64..39,
    ) {
        let mut per = per[..counts.len()].to_vec();
        per.sort_by(f64::total_cmp);
        let at = at % counts.len();
        let outputs: Vec<f64> = counts.iter().zip(&per).map(|(&n, v)| n as f64 * v).collect();
        let merged = gini_grouped(&GroupedDistribution::from_counts("r", &counts, &outputs).unwrap()).unwrap();
        // split class `at` into two adjacent classes with the same per-farm output
        let extra = split % counts[at];
        prop_assume!(extra > 0);
        let mut c2 = counts.clone();
        let mut o2 = outputs.clone();
        c2[at] -= extra;
        o2[at] = c2[at] as f64 * per[at];
        c2.insert(at, extra);
        o2.insert(at, extra as f64 * per[at]);
        let unmerged = gini_grouped(&GroupedDistribution::from_counts("r", &c2, &o2).unwrap()).unwrap();
        prop_assert!((merged - unmerged).abs() < 1e-10);
    }

    #[test]
    fn ari_matches_pair_counting(a in prop::collection::vec(0usize..4, 2..60), seed in any::<u64>()) {
        let mut r = rng(seed);
        use rand::Rng;
        let b: Vec<usize> = a.iter().map(|&l| if r.random::<f64>() < 0.3 { r.random_range(0..4) } else { l }).collect();
        let ari = adjusted_rand_index(&a, &b).unwrap();
        prop_assert!((ari - pair_counting_ari(&a, &b)).abs() < 1e-10);
        prop_assert!((-1.0..=1.0 + 1e-12).contains(&ari));
        let relabelled: Vec<usize> = b.iter().map(|l| (l + 1) % 4).collect();
        prop_assert!((ari - adjusted_rand_index(&a, &relabelled).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn penalty_pairs_match_definition(w in graph(), seed in any::<u64>()) {
        use rand::Rng;
        let mut r = rng(seed);
        let labels: Vec<usize> = (0..w.n()).map(|_| r.random_range(0..3)).collect();
        let mut pairs = 0;
        for i in 0..w.n() {
            for j in i + 1..w.n() {
                if w.contains(i, j) && labels[i] == labels[j] {
                    pairs += 1;
                }
            }
        }
        prop_assert_eq!(engine::same_cluster_pairs(&w, &labels), pairs);
        let incident: usize = (0..w.n()).map(|i| engine::penalty_gain(&w, &labels, i, labels[i])).sum();
        prop_assert_eq!(incident, 2 * pairs);
        let a = ClusterAssignment::new(labels, 3).unwrap();
        prop_assert_eq!(a.sizes().iter().sum::<usize>(), w.n());
    }
}
