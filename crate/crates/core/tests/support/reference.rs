//! Oracle-computed reference values, frozen in `tests/fixtures/reference.txt`.

use std::collections::BTreeMap;
use std::path::PathBuf;

use macx::code::*;
use macx::exponent::{
    finite_n_gap, haroutunian_exponent_with, sphere_packing_exponent, sphere_packing_exponent_with,
    InputDomain, Method,
};
use macx::mac::{
    haroutunian_feasible, pentagon_rates, product_channel_prob, PentagonRates, RatePair,
    SlackModel, TimeSharingDecomposition,
};
use macx::oracle::exponent_grid_oracle;
use macx::prob::{
    conditional_kl, entropy, enumerate_types, joint_type, kl_divergence, l1_distance,
    mutual_information, Distribution, JointDistribution, StochasticMatrix,
};
use macx::region::{capacity_membership, region_membership};
use macx::search::SearchOptions;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::common;

pub const REL_TOL: f64 = 1e-9;
pub const ABS_TOL: f64 = 1e-12;

pub fn fixture_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/reference.txt")
}

fn uniform_product() -> JointDistribution {
    let u = Distribution::uniform(2).unwrap();
    JointDistribution::product(&u, &u)
}

fn flag(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

fn rp(a: f64, b: f64) -> RatePair {
    RatePair::new(a, b).unwrap()
}

fn random_words(rng: &mut ChaCha8Rng, count: usize, n: usize) -> Vec<Vec<usize>> {
    (0..count)
        .map(|_| (0..n).map(|_| rng.gen_range(0..2)).collect())
        .collect()
}

fn all_pairs(code: &MultiUserCode) -> Vec<(usize, usize)> {
    (0..code.m())
        .flat_map(|i| (0..code.n_codewords()).map(move |j| (i, j)))
        .collect()
}

/// Binary sequences of length `n` with `ones` ones, in lexicographic order.
fn weight_class(n: usize, ones: usize) -> Vec<Vec<usize>> {
    (0..1usize << n)
        .filter(|v| v.count_ones() as usize == ones)
        .map(|v| (0..n).map(|t| (v >> (n - 1 - t)) & 1).collect())
        .collect()
}

struct Recorder(BTreeMap<String, f64>);

impl Recorder {
    fn put(&mut self, key: &str, v: f64) {
        assert!(
            self.0.insert(key.to_string(), v).is_none(),
            "duplicate key {key}"
        );
    }
    fn rates(&mut self, key: &str, r: &PentagonRates) {
        self.put(&format!("{key}.i1"), r.i1);
        self.put(&format!("{key}.i2"), r.i2);
        self.put(&format!("{key}.i12"), r.i12);
    }
}

fn prob_values(rec: &mut Recorder) {
    rec.put(
        "entropy.quarter_half_quarter",
        entropy(&Distribution::new(vec![0.25, 0.5, 0.25]).unwrap()),
    );
    let p = Distribution::new(vec![1.0, 0.0]).unwrap();
    let q = Distribution::uniform(2).unwrap();
    rec.put("kl.point_vs_uniform", kl_divergence(&p, &q).unwrap());
    let v = StochasticMatrix::from_rows(vec![vec![0.9, 0.1], vec![0.2, 0.8]]).unwrap();
    let w = StochasticMatrix::from_rows(vec![vec![0.5, 0.5], vec![0.6, 0.4]]).unwrap();
    rec.put(
        "conditional_kl.two_rows",
        conditional_kl(&v, &w, &q).unwrap(),
    );
    let pxy = JointDistribution::new(vec![2, 2], vec![0.4, 0.1, 0.1, 0.4]).unwrap();
    rec.put(
        "mutual_information.diagonal_heavy",
        mutual_information(&pxy).unwrap(),
    );
    let a = JointDistribution::new(vec![2], vec![0.6, 0.4]).unwrap();
    let b = JointDistribution::new(vec![2], vec![0.5, 0.5]).unwrap();
    rec.put("l1.six_four_vs_uniform", l1_distance(&a, &b).unwrap());
    rec.put("types.n4_k3", enumerate_types(4, 3).len() as f64);
}

fn mac_values(rec: &mut Recorder) {
    let adder = common::adder();
    let u = Distribution::uniform(2).unwrap();
    let d = TimeSharingDecomposition::product(&u, &u);
    rec.rates(
        "pentagon.adder_uniform",
        &pentagon_rates(&adder, &d).unwrap(),
    );
    // per-letter probabilities 0.9, 0.5 and 0.2
    let w3 = macx::mac::Mac::new(&[
        vec![vec![0.9, 0.1], vec![0.5, 0.5]],
        vec![vec![0.2, 0.8], vec![0.5, 0.5]],
    ])
    .unwrap();
    rec.put(
        "product_prob.n3",
        product_channel_prob(&w3, &[0, 0, 1], &[0, 1, 0], &[0, 0, 0]).unwrap(),
    );

    let opts = SearchOptions::default();
    let p = uniform_product();
    for (key, r) in [
        ("region.adder_0.9", rp(0.9, 0.9)),
        ("region.adder_0.7", rp(0.7, 0.7)),
    ] {
        let v = region_membership(&adder, &p, &r, 0.0, &opts).unwrap();
        rec.put(&format!("{key}.inside"), flag(v.inside));
        rec.put(&format!("{key}.slack"), v.slack);
    }
    for (key, r) in [
        ("capacity.adder_0.74", rp(0.74, 0.74)),
        ("capacity.adder_0.76", rp(0.76, 0.76)),
    ] {
        let v = capacity_membership(&adder, &r).unwrap();
        rec.put(&format!("{key}.inside"), flag(v.inside));
        rec.put(&format!("{key}.slack"), v.slack);
    }
    rec.put(
        "haroutunian_feasible.adder_0.5",
        flag(haroutunian_feasible(&adder, &p, &rp(0.5, 0.5)).unwrap()),
    );
}

fn exponent_values(rec: &mut Recorder) {
    let opts = SearchOptions::default();
    let r = rp(0.25, 0.25);
    for (name, w) in [
        ("adder", common::adder()),
        ("adder_like", common::adder_like()),
    ] {
        rec.put(
            &format!("sp.{name}_0.25"),
            sphere_packing_exponent(&w, &r, &opts).unwrap().value,
        );
        rec.put(
            &format!("oracle32.{name}_0.25"),
            exponent_grid_oracle(&w, &r, Method::SpherePacking, 32)
                .unwrap()
                .value,
        );
        let sp = sphere_packing_exponent_with(&w, &r, &opts, InputDomain::Product).unwrap();
        let h = haroutunian_exponent_with(&w, &r, &opts, InputDomain::Product).unwrap();
        rec.put(&format!("product.sp.{name}_0.25"), sp.value);
        rec.put(&format!("product.h.{name}_0.25"), h.value);
    }
    // at the origin every test channel closer than the input-independent ones is visited,
    // which puts resolution 32 out of reach; 16 is the finest that runs in seconds
    let zero = rp(0.0, 0.0);
    for (name, w) in [
        ("symmetric_noise", common::symmetric_noise()),
        ("adder_like", common::adder_like()),
    ] {
        rec.put(
            &format!("sp.{name}_0"),
            sphere_packing_exponent(&w, &zero, &opts).unwrap().value,
        );
        rec.put(
            &format!("oracle16.{name}_0"),
            exponent_grid_oracle(&w, &zero, Method::SpherePacking, 16)
                .unwrap()
                .value,
        );
    }
    let sym = common::symmetric_noise();
    let r = rp(0.1, 0.1);
    for res in [16, 32] {
        rec.put(
            &format!("oracle{res}.symmetric_noise_0.1"),
            exponent_grid_oracle(&sym, &r, Method::SpherePacking, res)
                .unwrap()
                .value,
        );
    }
    let g = finite_n_gap(&sym, &uniform_product(), &r, &[10, 100, 1000]).unwrap();
    rec.put("gap.symmetric_noise.limit", g.limit);
    for (n, eps, alpha) in g.points {
        rec.put(&format!("gap.symmetric_noise.n{n}.eps"), eps);
        rec.put(&format!("gap.symmetric_noise.n{n}.alpha"), alpha);
    }
}

fn code_values(rec: &mut Recorder) {
    let p8 = macx::cli::near_uniform_type(8, 2, 2).unwrap();
    let code = constant_composition_code(&p8, 4, 4, 7).unwrap();
    let in_type = all_pairs(&code)
        .into_iter()
        .filter(|&(i, j)| joint_type(&code.u[i], &code.v[j], 2, 2).unwrap() == p8)
        .count();
    rec.put("construction.n8_4x4_seed7.pairs_in_type", in_type as f64);

    let sym = common::symmetric_noise();
    let two = MultiUserCode::new(2, 2, vec![vec![0, 0], vec![1, 1]], vec![vec![0, 1]]).unwrap();
    let stats = error_probabilities(&sym, &two).unwrap();
    rec.put("errors.n2_sym.max", stats.max_error);
    rec.put("errors.n2_sym.avg", stats.avg_error);

    let noisy = common::noisy_adder();
    let mixed = MultiUserCode::new(
        2,
        2,
        vec![
            vec![0, 0, 0, 1],
            vec![0, 1, 1, 0],
            vec![1, 1, 1, 0],
            vec![1, 0, 0, 1],
        ],
        vec![vec![0, 1, 0, 1], vec![1, 1, 0, 0], vec![0, 0, 0, 0]],
    )
    .unwrap();
    let stats = error_probabilities(&noisy, &mixed).unwrap();
    let dom = dominant_type(&mixed, &stats, stats.avg_error)
        .unwrap()
        .unwrap();
    rec.put("dominant.mixed_n4.pairs", dom.pairs.len() as f64);
    rec.put("dominant.mixed_n4.threshold", dom.threshold);

    let diag4 = weight_class(4, 2)[..4].to_vec();
    let diag = MultiUserCode::new(2, 2, diag4.clone(), diag4).unwrap();
    let pairs: Vec<_> = (0..4).map(|i| (i, i)).collect();
    rec.put(
        "fano.diagonal_n4.information",
        fano_distribution(&diag, &pairs)
            .unwrap()
            .mutual_information(),
    );
    let l1 = dependence_check(&diag, &pairs, 0.1).unwrap();
    rec.put("dependence.diagonal_n4.lhs", l1.lhs);
    rec.put("dependence.diagonal_n4.rhs", l1.rhs);
    rec.put("dependence.diagonal_n4.pass", flag(l1.pass));

    // correlated: the second user repeats the first user's words, so every dominant letter pair is fully dependent
    let words = vec![
        vec![0, 0, 0, 1, 1, 1],
        vec![1, 1, 1, 0, 0, 0],
        vec![1, 0, 1, 0, 1, 0],
        vec![0, 1, 0, 1, 0, 1],
    ];
    let corr = MultiUserCode::new(2, 2, words.clone(), words).unwrap();
    let stats = error_probabilities(&noisy, &corr).unwrap();
    let lambda = 0.5;
    let dom = dominant_type(&corr, &stats, lambda).unwrap().unwrap();
    let (delta, sigma) = default_wring_parameters(6, lambda, 2, 2);
    let wr = wring(&corr, &dom.pairs, delta, sigma).unwrap();
    rec.put("wring.correlated_n6.dominant_pairs", dom.pairs.len() as f64);
    rec.put("wring.correlated_n6.k", wr.k as f64);
    rec.put(
        "wring.correlated_n6.retained_fraction",
        wr.retained_fraction,
    );
    rec.put("wring.correlated_n6.floor", wr.floor);
    rec.put(
        "wring.correlated_n6.max_letter_information",
        wr.max_letter_information,
    );
    rec.put(
        "wring.correlated_n6.gap",
        independence_gap(&corr, &wr.subcode).unwrap(),
    );
    rec.put("wring.correlated_n6.gap_bound", independence_bound(delta));

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let u = random_words(&mut rng, 3, 5);
    let v = random_words(&mut rng, 2, 5);
    let rand5 = MultiUserCode::new(2, 2, u, v).unwrap();
    let stats = error_probabilities(&sym, &rand5).unwrap();
    let lambda = (1.0 + stats.avg_error) / 2.0;
    let rows: Vec<usize> = (0..3)
        .filter(|&i| stats.per_pair_error[i][0] <= lambda)
        .collect();
    let (sub, slices) = row_subcode(&sym, &rand5, &stats, 0, &rows).unwrap();
    let aug = augustin_check(&sub, &slices, lambda).unwrap();
    rec.put("augustin.random_n5_row0.rows", rows.len() as f64);
    rec.put("augustin.random_n5_row0.lambda", lambda);
    rec.put("augustin.random_n5_row0.lhs", aug.lhs);
    rec.put("augustin.random_n5_row0.rhs", aug.rhs);
    rec.put("augustin.random_n5_row0.pass", flag(aug.pass));

    let adder = common::adder();
    let mut words = weight_class(6, 3);
    words.shuffle(&mut ChaCha8Rng::seed_from_u64(6));
    let code = MultiUserCode::new(2, 2, words[..8].to_vec(), words[8..16].to_vec()).unwrap();
    let stats = error_probabilities(&adder, &code).unwrap();
    let sc = strong_converse_check(
        &adder,
        &code,
        &stats,
        0.1,
        &SlackModel::Converse {
            lambda: 0.1,
            k_cap: None,
        },
        &SearchOptions::default(),
    )
    .unwrap();
    rec.put("converse.adder_n6_8x8.max_error", stats.max_error);
    rec.put(
        "converse.adder_n6_8x8.hypothesis_unmet",
        flag(sc.hypothesis_unmet),
    );
    rec.put("converse.adder_n6_8x8.eps", sc.eps);
    rec.put("converse.adder_n6_8x8.inside", flag(sc.inside));
    rec.put("converse.adder_n6_8x8.slack", sc.slack);

    let p6 = macx::cli::near_uniform_type(6, 2, 2).unwrap();
    let code = constant_composition_code(&p6, 4, 4, 7).unwrap();
    let stats = error_probabilities(&adder, &code).unwrap();
    let r = rp(0.25, 0.25);
    let e = exponent_grid_oracle(&adder, &r, Method::SpherePacking, 32).unwrap();
    let chk = sphere_packing_verify(&adder, &code, &stats, &r, 0.05, &e).unwrap();
    rec.put("sp_verify.adder_n6_4x4.max_error", chk.max_error);
    rec.put("sp_verify.adder_n6_4x4.exponent", chk.exponent);
    rec.put("sp_verify.adder_n6_4x4.bound", chk.bound);
    rec.put("sp_verify.adder_n6_4x4.pass", flag(chk.pass));

    let v = capacity_membership(&adder, &rp(0.7, 0.7)).unwrap();
    rec.put("cli.capacity.adder_0.7.inside", flag(v.inside));
}

/// Recomputes every frozen value from its oracle.
pub fn compute() -> BTreeMap<String, f64> {
    let mut rec = Recorder(BTreeMap::new());
    prob_values(&mut rec);
    mac_values(&mut rec);
    exponent_values(&mut rec);
    code_values(&mut rec);
    rec.0
}

pub fn render(values: &BTreeMap<String, f64>) -> String {
    values.iter().map(|(k, v)| format!("{k} {v:?}\n")).collect()
}

pub fn parse(text: &str) -> BTreeMap<String, f64> {
    text.lines()
        .filter(|l| !l.trim().is_empty() && !l.starts_with('#'))
        .map(|l| {
            let (k, v) = l
                .split_once(' ')
                .unwrap_or_else(|| panic!("bad fixture line `{l}`"));
            (
                k.to_string(),
                v.trim()
                    .parse::<f64>()
                    .unwrap_or_else(|_| panic!("bad value in `{l}`")),
            )
        })
        .collect()
}

pub fn close(expected: f64, got: f64) -> bool {
    if expected.is_infinite() || got.is_infinite() {
        return expected == got;
    }
    (expected - got).abs() <= ABS_TOL + REL_TOL * expected.abs()
}

/// Keys whose recomputed value differs from the frozen one, or that are missing on either side.
pub fn mismatches(frozen: &BTreeMap<String, f64>, now: &BTreeMap<String, f64>) -> Vec<String> {
    let mut bad = Vec::new();
    for (k, v) in now {
        match frozen.get(k) {
            Some(f) if close(*f, *v) => {}
            Some(f) => bad.push(format!("{k}: frozen {f:?}, now {v:?}")),
            None => bad.push(format!("{k}: not frozen")),
        }
    }
    bad.extend(
        frozen
            .keys()
            .filter(|k| !now.contains_key(*k))
            .map(|k| format!("{k}: no longer computed")),
    );
    bad
}
