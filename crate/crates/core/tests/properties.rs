mod common;

use macx::mac::{
    decomposition_marginal, haroutunian_feasible, joint_rates, pentagon_rates,
    product_channel_prob, Mac, RatePair, SlackModel, TimeSharingDecomposition,
};
use macx::prob::{
    conditional_mutual_information, enumerate_joint_types, enumerate_types, kl_divergence,
    l1_distance, mutual_information, Distribution, JointDistribution, StochasticMatrix,
};
use macx::region::{capacity_membership_with, region_membership};
use macx::search::SearchOptions;
use proptest::prelude::*;

fn simplex(k: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0f64..1.0, k).prop_filter_map("degenerate", |v| {
        let s: f64 = v.iter().sum();
        (s > 1e-3).then(|| v.iter().map(|x| x / s).collect())
    })
}

fn positive_simplex(k: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.01f64..1.0, k).prop_map(|v| {
        let s: f64 = v.iter().sum();
        v.iter().map(|x| x / s).collect()
    })
}

fn joint(xs: usize, ys: usize) -> impl Strategy<Value = JointDistribution> {
    simplex(xs * ys).prop_map(move |p| JointDistribution::new(vec![xs, ys], p).unwrap())
}

fn channel(xs: usize, ys: usize, zs: usize) -> impl Strategy<Value = Mac> {
    prop::collection::vec(positive_simplex(zs), xs * ys)
        .prop_map(move |rows| Mac::from_flat(xs, ys, zs, rows.concat()).unwrap())
}

fn binomial(n: usize, k: usize) -> usize {
    (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
}

fn quick() -> SearchOptions {
    SearchOptions {
        multistart_count: 8,
        ..Default::default()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn kl_is_nonnegative_and_zero_only_on_equality(p in simplex(4), q in positive_simplex(4)) {
        let d = kl_divergence(&Distribution::new(p.clone()).unwrap(), &Distribution::new(q.clone()).unwrap()).unwrap();
        prop_assert!(d >= 0.0);
        let close = p.iter().zip(&q).all(|(a, b)| (a - b).abs() < 1e-12);
        prop_assert_eq!(d == 0.0, close);
        let self_d = kl_divergence(&Distribution::new(q.clone()).unwrap(), &Distribution::new(q).unwrap()).unwrap();
        prop_assert_eq!(self_d, 0.0);
    }

    #[test]
    fn pinsker_bound_on_the_dependence(pxy in joint(3, 2)) {
        let px = pxy.marginal_distribution(0).unwrap();
        let py = pxy.marginal_distribution(1).unwrap();
        let l1 = l1_distance(&pxy, &JointDistribution::product(&px, &py)).unwrap();
        let nats = mutual_information(&pxy).unwrap() * std::f64::consts::LN_2;
        prop_assert!(l1 <= 2.0 * nats.sqrt() + 1e-12);
    }

    #[test]
    fn mutual_information_ignores_relabeling(pxy in joint(3, 2), swap_y in any::<bool>()) {
        let m = |r: usize, c: usize| pxy.probs()[r * 2 + c];
        let perm_x = [2usize, 0, 1];
        let mut probs = Vec::new();
        for &r in &perm_x {
            for c in 0..2 {
                probs.push(m(r, if swap_y { 1 - c } else { c }));
            }
        }
        let relabeled = JointDistribution::new(vec![3, 2], probs).unwrap();
        let a = mutual_information(&pxy).unwrap();
        let b = mutual_information(&relabeled).unwrap();
        prop_assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn conditioning_on_a_copy_leaves_nothing(pxy in joint(2, 3)) {
        // third axis copies the first
        let mut probs = vec![0.0; 2 * 3 * 2];
        for x in 0..2 {
            for y in 0..3 {
                probs[(x * 3 + y) * 2 + x] = pxy.probs()[x * 3 + y];
            }
        }
        let j = JointDistribution::new(vec![2, 3, 2], probs).unwrap();
        prop_assert!(conditional_mutual_information(&j, &[0], &[1], &[2]).unwrap().abs() < 1e-12);
    }

    #[test]
    fn per_slice_composition_of_conditional_information(p in simplex(8)) {
        let j = JointDistribution::new(vec![2, 2, 2], p.clone()).unwrap();
        let mut expect = 0.0;
        for c in 0..2 {
            let slice: Vec<f64> = (0..4).map(|k| p[k * 2 + c]).collect();
            let mass: f64 = slice.iter().sum();
            if mass > 0.0 {
                let s = JointDistribution::new(vec![2, 2], slice.iter().map(|v| v / mass).collect()).unwrap();
                expect += mass * mutual_information(&s).unwrap();
            }
        }
        let got = conditional_mutual_information(&j, &[0], &[1], &[2]).unwrap();
        prop_assert!((got - expect).abs() < 1e-12);
    }

    #[test]
    fn channel_rows_sum_to_one_over_output_sequences(w in channel(2, 2, 2), x in prop::collection::vec(0usize..2, 3), y in prop::collection::vec(0usize..2, 3)) {
        let mut total = 0.0;
        for idx in 0..8usize {
            let z = [idx >> 2 & 1, idx >> 1 & 1, idx & 1];
            total += product_channel_prob(&w, &x, &y, &z).unwrap();
        }
        prop_assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn pentagon_shape_on_product_inputs(w in channel(2, 2, 3), a in positive_simplex(2), b in positive_simplex(2)) {
        let px = Distribution::new(a).unwrap();
        let py = Distribution::new(b).unwrap();
        let d = TimeSharingDecomposition::product(&px, &py);
        let r = pentagon_rates(&w, &d).unwrap();
        prop_assert!(r.i1 <= r.i12 + 1e-12 && r.i2 <= r.i12 + 1e-12);
        prop_assert!(r.i12 <= r.i1 + r.i2 + 1e-12);
        let direct = joint_rates(&w, &JointDistribution::product(&px, &py)).unwrap();
        prop_assert!((direct.i1 - r.i1).abs() < 1e-12 && (direct.i2 - r.i2).abs() < 1e-12 && (direct.i12 - r.i12).abs() < 1e-12);
    }

    #[test]
    fn decomposition_marginal_is_a_distribution(q in positive_simplex(3), xs in prop::collection::vec(simplex(2), 3), ys in prop::collection::vec(simplex(3), 3)) {
        let d = TimeSharingDecomposition::new(
            Distribution::new(q).unwrap(),
            StochasticMatrix::from_rows(xs).unwrap(),
            StochasticMatrix::from_rows(ys).unwrap(),
        ).unwrap();
        let m = decomposition_marginal(&d);
        prop_assert_eq!(m.shape(), &[2, 3]);
        prop_assert!((m.probs().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(m.probs().iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn slack_model_shrinks_with_length(lambda in 0.0f64..0.9, n in 2usize..100_000) {
        let m = SlackModel::Converse { lambda, k_cap: None };
        prop_assert!(m.eps(n, 2, 2) >= m.eps(n * 2, 2, 2));
    }
}

#[test]
fn type_counts_match_stars_and_bars() {
    for n in 1..=12 {
        for k in 1..=4 {
            assert_eq!(
                enumerate_types(n, k).len(),
                binomial(n + k - 1, k - 1),
                "n={n} k={k}"
            );
        }
    }
    assert_eq!(enumerate_joint_types(3, 2, 2).len(), binomial(6, 3));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn region_is_down_closed_and_monotone_in_slack(w in channel(2, 2, 2), pxy in joint(2, 2), r1 in 0.0f64..0.6, r2 in 0.0f64..0.6, shrink in 0.0f64..1.0, eps in 0.0f64..0.2) {
        let opts = quick();
        let r = RatePair::new(r1, r2).unwrap();
        let v = region_membership(&w, &pxy, &r, 0.0, &opts).unwrap();
        if v.inside {
            let smaller = RatePair::new(r1 * shrink, r2).unwrap();
            prop_assert!(region_membership(&w, &pxy, &smaller, 0.0, &opts).unwrap().inside);
            prop_assert!(region_membership(&w, &pxy, &r, eps, &opts).unwrap().inside);
            let d = v.witness.expect("inside verdicts carry a witness");
            let rates = pentagon_rates(&w, &d).unwrap();
            prop_assert!(r1 <= rates.i1 + 1e-9 && r2 <= rates.i2 + 1e-9 && r1 + r2 <= rates.i12 + 1e-9);
            let m = decomposition_marginal(&d);
            prop_assert!(l1_distance(&m, &pxy).unwrap() < 1e-6);
        }
    }

    #[test]
    fn outside_on_product_inputs_violates_a_single_letter_bound(w in channel(2, 2, 2), a in positive_simplex(2), b in positive_simplex(2), r1 in 0.0f64..0.8, r2 in 0.0f64..0.8) {
        let p = JointDistribution::product(&Distribution::new(a).unwrap(), &Distribution::new(b).unwrap());
        let r = RatePair::new(r1, r2).unwrap();
        if !region_membership(&w, &p, &r, 0.0, &quick()).unwrap().inside {
            prop_assert!(haroutunian_feasible(&w, &p, &r).unwrap());
        }
    }

    #[test]
    fn capacity_agrees_with_a_dense_product_grid(w in channel(2, 2, 2), r1 in 0.0f64..0.6, r2 in 0.0f64..0.6) {
        let r = RatePair::new(r1, r2).unwrap();
        let verdict = capacity_membership_with(&w, &r, &quick()).unwrap();
        // the best |Q| = 1 pentagon over a 41 x 41 product grid is a lower bound on the region
        let mut grid_inside = false;
        for i in 0..=40 {
            for j in 0..=40 {
                let px = Distribution::new(vec![i as f64 / 40.0, 1.0 - i as f64 / 40.0]).unwrap();
                let py = Distribution::new(vec![j as f64 / 40.0, 1.0 - j as f64 / 40.0]).unwrap();
                let t = pentagon_rates(&w, &TimeSharingDecomposition::product(&px, &py)).unwrap();
                grid_inside |= t.slack(&r, 0.0) >= 1e-6;
            }
        }
        if grid_inside {
            prop_assert!(verdict.inside);
        }
        if verdict.inside {
            let d = verdict.witness.unwrap();
            prop_assert!(pentagon_rates(&w, &d).unwrap().slack(&r, 0.0) >= -1e-9);
        }
    }
}
