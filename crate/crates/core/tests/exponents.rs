mod common;

use macx::error::Error;
use macx::exponent::{
    finite_n_gap, finite_n_gap_with, haroutunian_exponent, sphere_packing_exponent,
    sphere_packing_exponent_with, InputDomain, Method,
};
use macx::mac::{channel_divergence, Mac, RatePair, SlackModel};
use macx::oracle::exponent_grid_oracle;
use macx::prob::{Distribution, JointDistribution};
use macx::region::region_membership;
use macx::search::SearchOptions;
use macx::surface::exponent_surface;
use proptest::prelude::*;

fn uniform_product() -> JointDistribution {
    let u = Distribution::uniform(2).unwrap();
    JointDistribution::product(&u, &u)
}

#[test]
fn sphere_packing_witness_is_outside_and_reproduces_the_value() {
    let opts = SearchOptions::default();
    let r = RatePair::new(0.1, 0.1).unwrap();
    for w in [common::adder_like(), common::symmetric_noise()] {
        let res = sphere_packing_exponent(&w, &r, &opts).unwrap();
        assert!(res.converged);
        assert!(res.value > 0.0);
        let d = channel_divergence(&res.witness_v, &w, &res.witness_p).unwrap();
        assert!((d - res.value).abs() < 1e-9, "{d} vs {}", res.value);
        let v = region_membership(&res.witness_v, &res.witness_p, &r, 0.0, &opts).unwrap();
        assert!(!v.inside, "slack {}", v.slack);
    }
}

#[test]
fn haroutunian_witness_reproduces_the_value() {
    let w = common::symmetric_noise();
    let res = haroutunian_exponent(
        &w,
        &RatePair::new(0.1, 0.1).unwrap(),
        &SearchOptions::default(),
    )
    .unwrap();
    assert_eq!(res.method, Method::Haroutunian);
    let d = channel_divergence(&res.witness_v, &w, &res.witness_p).unwrap();
    assert!((d - res.value).abs() < 1e-9);
}

#[test]
fn above_the_alphabet_limits_both_exponents_vanish_at_w() {
    let opts = SearchOptions::default();
    let r = RatePair::new(1.0, 1.0).unwrap();
    for (_, w) in common::suite() {
        for res in [
            haroutunian_exponent(&w, &r, &opts).unwrap(),
            sphere_packing_exponent(&w, &r, &opts).unwrap(),
        ] {
            assert_eq!(res.value, 0.0);
            assert_eq!(res.witness_v, w);
        }
        assert_eq!(
            exponent_grid_oracle(&w, &r, Method::SpherePacking, 4)
                .unwrap()
                .value,
            0.0
        );
    }
}

#[test]
fn input_independent_channels_have_zero_exponents() {
    let w = common::input_independent();
    let opts = SearchOptions::default();
    for r in common::suite_rates() {
        assert_eq!(haroutunian_exponent(&w, &r, &opts).unwrap().value, 0.0);
        assert_eq!(sphere_packing_exponent(&w, &r, &opts).unwrap().value, 0.0);
    }
    let g = finite_n_gap(
        &w,
        &uniform_product(),
        &RatePair::new(0.2, 0.2).unwrap(),
        &[10, 100],
    )
    .unwrap();
    assert_eq!(g.limit, 0.0);
    assert!(g
        .points
        .iter()
        .all(|&(_, _, a)| a == 0.0 || a.is_infinite()));
}

#[test]
fn zero_slack_leaves_every_length_at_the_limit() {
    let w = common::symmetric_noise();
    let g = finite_n_gap_with(
        &w,
        &uniform_product(),
        &RatePair::new(0.1, 0.1).unwrap(),
        &[10, 100, 1000],
        &SlackModel::Zero,
    )
    .unwrap();
    assert!(g
        .points
        .iter()
        .all(|&(_, eps, a)| eps == 0.0 && a == g.limit));
    assert!(g.gaps().iter().all(|&d| d == 0.0));
}

#[test]
fn finite_gap_rejects_unsorted_lengths() {
    let w = common::symmetric_noise();
    let r = RatePair::new(0.1, 0.1).unwrap();
    assert!(finite_n_gap(&w, &uniform_product(), &r, &[100, 10]).is_err());
    assert!(finite_n_gap(&w, &uniform_product(), &r, &[]).is_err());
}

#[test]
fn product_restriction_keeps_the_ordering() {
    let w = common::adder_like();
    let opts = SearchOptions::default();
    let r = RatePair::new(0.1, 0.1).unwrap();
    let sp = sphere_packing_exponent_with(&w, &r, &opts, InputDomain::Product).unwrap();
    let h = macx::exponent::haroutunian_exponent_with(&w, &r, &opts, InputDomain::Product).unwrap();
    assert!(sp.value >= h.value - 1e-6, "sp {} h {}", sp.value, h.value);
}

#[test]
fn oracle_guards_and_rejects_itself_as_target() {
    let w3 = common::random_mac(1, 3, 2, 2);
    let r = RatePair::new(0.1, 0.1).unwrap();
    assert!(matches!(
        exponent_grid_oracle(&w3, &r, Method::SpherePacking, 8),
        Err(Error::SizeGuard(_))
    ));
    let w = common::adder_like();
    assert!(matches!(
        exponent_grid_oracle(&w, &r, Method::SpherePacking, 0),
        Err(Error::SizeGuard(_))
    ));
    assert!(exponent_grid_oracle(&w, &r, Method::GridOracle, 8).is_err());
}

#[test]
fn oracle_is_deterministic() {
    let w = common::symmetric_noise();
    let r = RatePair::new(0.1, 0.1).unwrap();
    let a = exponent_grid_oracle(&w, &r, Method::SpherePacking, 8).unwrap();
    let b = exponent_grid_oracle(&w, &r, Method::SpherePacking, 8).unwrap();
    assert_eq!(a, b);
}

#[test]
fn surface_cells_outside_capacity_are_zero() {
    let w = common::symmetric_noise();
    let s = exponent_surface(
        &w,
        &[0.1, 0.9],
        &[0.9],
        Method::SpherePacking,
        &SearchOptions::default(),
    )
    .unwrap();
    assert_eq!(s.rows.len(), 2);
    assert!(s.rows.iter().all(|row| row.value == 0.0));
    let one = exponent_surface(
        &w,
        &[0.5],
        &[0.5],
        Method::Haroutunian,
        &SearchOptions::default(),
    )
    .unwrap();
    assert_eq!(one.rows.len(), 1);
}

fn channel(seed: u64) -> Mac {
    common::random_mac(seed, 2, 2, 2)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn exponents_are_nonnegative_and_vanish_outside_capacity(seed in 0u64..1000, r1 in 0.0f64..1.2, r2 in 0.0f64..1.2) {
        let w = channel(seed);
        let r = RatePair::new(r1, r2).unwrap();
        let opts = SearchOptions::default();
        let h = haroutunian_exponent(&w, &r, &opts).unwrap();
        prop_assert!(h.value >= 0.0);
        if !macx::region::capacity_membership(&w, &r).unwrap().inside {
            let sp = sphere_packing_exponent(&w, &r, &opts).unwrap();
            prop_assert_eq!(sp.value, 0.0);
            prop_assert_eq!(&sp.witness_v, &w);
        }
    }

    #[test]
    fn oracle_is_monotone_in_each_rate(seed in 0u64..1000, r1 in 0.0f64..0.5, r2 in 0.0f64..0.5, step in 0.01f64..0.3) {
        let w = channel(seed);
        let base = exponent_grid_oracle(&w, &RatePair::new(r1, r2).unwrap(), Method::Haroutunian, 6).unwrap().value;
        let up = exponent_grid_oracle(&w, &RatePair::new(r1 + step, r2).unwrap(), Method::Haroutunian, 6).unwrap().value;
        prop_assert!(up <= base);
    }
}
