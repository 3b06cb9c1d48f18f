mod common;

use macx::code::*;
use macx::error::Error;
use macx::exponent::sphere_packing_exponent;
use macx::mac::{dependence_bound, product_channel_prob, Mac, RatePair, SlackModel};
use macx::prob::{enumerate_joint_types, joint_type, EmpiricalType};
use macx::search::SearchOptions;
use proptest::prelude::*;

fn uniform_type(n: usize) -> EmpiricalType {
    macx::cli::near_uniform_type(n, 2, 2).unwrap()
}

fn all_pairs(code: &MultiUserCode) -> Vec<(usize, usize)> {
    (0..code.m())
        .flat_map(|i| (0..code.n_codewords()).map(move |j| (i, j)))
        .collect()
}

fn sequences(n: usize, base: usize) -> Vec<Vec<usize>> {
    (0..base.pow(n as u32))
        .map(|mut idx| {
            let mut z = vec![0; n];
            for t in (0..n).rev() {
                z[t] = idx % base;
                idx /= base;
            }
            z
        })
        .collect()
}

#[test]
fn constant_composition_pairs_all_have_the_requested_type() {
    let p = uniform_type(8);
    let code = constant_composition_code(&p, 4, 4, 7).unwrap();
    for (i, j) in all_pairs(&code) {
        assert_eq!(joint_type(&code.u[i], &code.v[j], 2, 2).unwrap(), p);
    }
    let again = constant_composition_code(&p, 4, 4, 7).unwrap();
    assert_eq!(code, again);
}

#[test]
fn error_probabilities_match_hand_enumeration() {
    let w = common::symmetric_noise();
    let code = MultiUserCode::new(2, 2, vec![vec![0, 0], vec![1, 1]], vec![vec![0, 1]]).unwrap();
    let dec = ml_decode(&w, &code).unwrap();
    let stats = error_probabilities(&w, &code).unwrap();
    for i in 0..2 {
        let mut correct = 0.0;
        for (k, z) in sequences(2, 2).iter().enumerate() {
            if dec.decide(k) == Some((i, 0)) {
                correct += product_channel_prob(&w, &code.u[i], &code.v[0], z).unwrap();
            }
        }
        assert!((stats.per_pair_error[i][0] - (1.0 - correct)).abs() < 1e-15);
    }
    // both sums are odd for pair 0 and even for pair 1, so each letter is decoded independently
    assert!((stats.max_error - (1.0 - 0.81)).abs() < 1e-12);
}

#[test]
fn decode_table_is_the_argmax_over_pairs() {
    let w = common::noisy_adder();
    let code = MultiUserCode::new(
        2,
        2,
        vec![vec![0, 1], vec![1, 0]],
        vec![vec![0, 0], vec![1, 1], vec![0, 1]],
    )
    .unwrap();
    let dec = ml_decode(&w, &code).unwrap();
    for (k, z) in sequences(2, 3).iter().enumerate() {
        let mut best = (0, 0);
        let mut best_p = -1.0;
        for (i, j) in all_pairs(&code) {
            let p = product_channel_prob(&w, &code.u[i], &code.v[j], z).unwrap();
            if p > best_p * (1.0 + 1e-12) {
                best = (i, j);
                best_p = p;
            }
        }
        assert_eq!(dec.decide(k), Some(best), "z = {z:?}");
    }
}

#[test]
fn dominant_type_matches_exhaustive_counting() {
    let w = common::noisy_adder();
    // codewords of mixed composition
    let u = vec![
        vec![0, 0, 0, 1],
        vec![0, 1, 1, 0],
        vec![1, 1, 1, 0],
        vec![1, 0, 0, 1],
    ];
    let v = vec![vec![0, 1, 0, 1], vec![1, 1, 0, 0], vec![0, 0, 0, 0]];
    let code = MultiUserCode::new(2, 2, u, v).unwrap();
    let stats = error_probabilities(&w, &code).unwrap();
    let lambda = stats.avg_error;
    let dom = dominant_type(&code, &stats, lambda)
        .unwrap()
        .expect("dominant type");
    let mut best: Option<(EmpiricalType, usize)> = None;
    for t in enumerate_joint_types(4, 2, 2) {
        let count = all_pairs(&code)
            .into_iter()
            .filter(|&(i, j)| {
                stats.per_pair_error[i][j] <= (1.0 + lambda) / 2.0
                    && joint_type(&code.u[i], &code.v[j], 2, 2).unwrap() == t
            })
            .count();
        if count > 0
            && best
                .as_ref()
                .is_none_or(|b| count > b.1 || (count == b.1 && t.counts() < b.0.counts()))
        {
            best = Some((t, count));
        }
    }
    let (t, count) = best.unwrap();
    assert_eq!(dom.p, t);
    assert_eq!(dom.pairs.len(), count);
}

#[test]
fn too_few_well_decoded_pairs_leave_the_hypothesis_unmet() {
    let w = common::input_independent();
    let code = MultiUserCode::new(2, 2, vec![vec![0]; 5], vec![vec![0]; 5]).unwrap();
    let stats = error_probabilities(&w, &code).unwrap();
    assert!(dominant_type(&code, &stats, 0.0).unwrap().is_none());
    let report = strong_converse_check(
        &w,
        &code,
        &stats,
        0.0,
        &SlackModel::default(),
        &SearchOptions::default(),
    )
    .unwrap();
    assert!(report.hypothesis_unmet);
}

#[test]
fn dependence_bound_holds_on_an_adversarial_diagonal_set() {
    let words = vec![
        vec![0, 0, 1, 1],
        vec![0, 1, 0, 1],
        vec![1, 0, 1, 0],
        vec![1, 1, 0, 0],
    ];
    let code = MultiUserCode::new(2, 2, words.clone(), words).unwrap();
    let diag: Vec<_> = (0..4).map(|i| (i, i)).collect();
    let r = dependence_check(&code, &diag, 0.1).unwrap();
    assert!((r.lhs - 2.0).abs() < 1e-12);
    assert!((r.rhs - dependence_bound(0.1, 4, 2, 2)).abs() < 1e-15);
    assert!(r.pass);
}

#[test]
fn sphere_packing_preconditions_are_input_errors() {
    let w = common::symmetric_noise();
    let code = constant_composition_code(&uniform_type(4), 2, 2, 0).unwrap();
    let stats = error_probabilities(&w, &code).unwrap();
    let r = RatePair::new(0.2, 0.2).unwrap();
    let e = sphere_packing_exponent(&w, &r, &SearchOptions::default()).unwrap();
    assert!(sphere_packing_verify(&w, &code, &stats, &r, 0.05, &e).is_ok());
    for (r, delta) in [((0.3, 0.2), 0.05), ((0.2, 0.2), 0.0), ((0.0, 0.2), 0.05)] {
        let r = RatePair::new(r.0, r.1).unwrap();
        assert!(matches!(
            sphere_packing_verify(&w, &code, &stats, &r, delta, &e),
            Err(Error::RatePrecondition(_))
        ));
    }
}

#[test]
fn zero_exponent_means_the_bound_is_one_half() {
    let w = common::input_independent();
    let code = constant_composition_code(&uniform_type(4), 2, 2, 0).unwrap();
    let stats = error_probabilities(&w, &code).unwrap();
    let r = RatePair::new(0.2, 0.2).unwrap();
    let e = sphere_packing_exponent(&w, &r, &SearchOptions::default()).unwrap();
    assert_eq!(e.value, 0.0);
    let check = sphere_packing_verify(&w, &code, &stats, &r, 0.05, &e).unwrap();
    assert_eq!(check.bound, 0.5);
    assert!(check.pass);
}

#[test]
fn zero_error_codes_meet_the_bound_on_the_noiseless_adder() {
    // every pair lies in T_P for the uniform product type and the sums separate the four pairs
    let w = common::adder();
    let code = MultiUserCode::new(
        2,
        2,
        vec![vec![0, 0, 1, 1], vec![1, 1, 0, 0]],
        vec![vec![0, 1, 0, 1], vec![1, 0, 1, 0]],
    )
    .unwrap();
    let stats = error_probabilities(&w, &code).unwrap();
    assert_eq!(stats.max_error, 0.0);
    let r = RatePair::new(0.2, 0.2).unwrap();
    let e = sphere_packing_exponent(&w, &r, &SearchOptions::default()).unwrap();
    let check = sphere_packing_verify(&w, &code, &stats, &r, 0.05, &e).unwrap();
    assert!(e.value > 0.0);
    assert!(
        check.pass,
        "bound {} with exponent {}",
        check.bound, e.value
    );
}

#[test]
fn augustin_holds_on_rows_and_columns_of_a_noisy_code() {
    let w = common::random_seeded(7);
    let code = constant_composition_code(&uniform_type(6), 3, 3, 11).unwrap();
    let stats = error_probabilities(&w, &code).unwrap();
    let lambda_prime = (1.0 + stats.max_error) / 2.0;
    let (rows, cols) = rows_and_columns(&all_pairs(&code));
    for (j, is) in rows {
        let (sub, slices) = row_subcode(&w, &code, &stats, j, &is).unwrap();
        assert!(augustin_check(&sub, &slices, lambda_prime).unwrap().pass);
    }
    for (i, js) in cols {
        let (sub, slices) = column_subcode(&w, &code, &stats, i, &js).unwrap();
        assert!(augustin_check(&sub, &slices, lambda_prime).unwrap().pass);
    }
}

fn code_for(seed: u64, n: usize, m: usize, nn: usize) -> Option<MultiUserCode> {
    constant_composition_code(&uniform_type(n), m, nn, seed).ok()
}

fn channel(seed: u64) -> Mac {
    common::random_mac(seed, 2, 2, 3)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn fano_average_letter_joint_is_the_joint_type(seed in 0u64..10_000, n in 2usize..7, m in 1usize..5, nn in 1usize..5) {
        if let Some(code) = code_for(seed, n, m, nn) {
            let avg = fano_distribution(&code, &all_pairs(&code)).unwrap().average_letter_joint();
            let p = uniform_type(n).to_joint();
            for (a, b) in avg.probs().iter().zip(p.probs()) {
                prop_assert!((a - b).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn decoding_sets_are_disjoint(seed in 0u64..10_000, x in prop::collection::vec(0usize..2, 4), y in prop::collection::vec(0usize..2, 4)) {
        if let Some(code) = code_for(seed, 4, 2, 3) {
            let masses = decoding_set_masses(&channel(seed), &code, &x, &y).unwrap();
            prop_assert!(masses.iter().sum::<f64>() <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn wringing_terminates_and_keeps_well_decoded_pairs(seed in 0u64..10_000, n in 3usize..7, m in 2usize..5, nn in 2usize..5) {
        if let Some(code) = code_for(seed, n, m, nn) {
            let w = channel(seed ^ 0x5eed);
            let stats = error_probabilities(&w, &code).unwrap();
            let lambda = stats.avg_error;
            if let Some(dom) = dominant_type(&code, &stats, lambda).unwrap() {
                let (delta, sigma) = default_wring_parameters(n, lambda, 2, 2);
                let r = wring(&code, &dom.pairs, delta, sigma).unwrap();
                prop_assert!(r.k as f64 <= (2.0 * sigma / delta).ceil());
                prop_assert!(!r.emptied);
                for &(i, j) in &r.subcode {
                    prop_assert!(stats.per_pair_error[i][j] <= (1.0 + lambda) / 2.0);
                }
                prop_assert_eq!(r.sizes.len(), r.k + 1);
                prop_assert!(r.sizes.windows(2).all(|s| s[1] <= s[0]));
                if !r.capped {
                    prop_assert!(r.max_letter_information <= delta);
                    let gap = independence_gap(&code, &r.subcode).unwrap();
                    prop_assert!(gap <= independence_bound(delta) + 1e-9);
                }
            }
        }
    }
}
