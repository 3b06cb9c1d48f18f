#![allow(dead_code)]

use macx::mac::{Mac, RatePair};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn binary_output(p1: [f64; 4]) -> Mac {
    Mac::new(&[
        vec![vec![1.0 - p1[0], p1[0]], vec![1.0 - p1[1], p1[1]]],
        vec![vec![1.0 - p1[2], p1[2]], vec![1.0 - p1[3], p1[3]]],
    ])
    .unwrap()
}

/// Output one is likelier the more inputs are one: `P(Z=1) = 0.05 + 0.45 (x + y)`.
pub fn adder_like() -> Mac {
    binary_output([0.05, 0.5, 0.5, 0.95])
}

/// Modulo-two sum observed through a binary symmetric channel with crossover 0.1.
pub fn symmetric_noise() -> Mac {
    binary_output([0.1, 0.9, 0.9, 0.1])
}

pub fn input_independent() -> Mac {
    binary_output([0.3, 0.3, 0.3, 0.3])
}

/// The receiver sees the first input exactly.
pub fn copy_x() -> Mac {
    binary_output([0.0, 0.0, 1.0, 1.0])
}

pub fn random_seeded(seed: u64) -> Mac {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p: [f64; 4] = std::array::from_fn(|_| rng.gen_range(0.05..0.95));
    binary_output(p)
}

pub fn suite() -> Vec<(&'static str, Mac)> {
    vec![
        ("adder-like", adder_like()),
        ("symmetric-noise", symmetric_noise()),
        ("input-independent", input_independent()),
        ("copy-x", copy_x()),
        ("random-seeded", random_seeded(7)),
    ]
}

pub fn suite_rates() -> Vec<RatePair> {
    [(0.1, 0.1), (0.25, 0.25), (0.5, 0.5)]
        .iter()
        .map(|&(a, b)| RatePair::new(a, b).unwrap())
        .collect()
}

/// `Z = X + Y` with no noise.
pub fn adder() -> Mac {
    Mac::deterministic(2, 2, 3, |x, y| x + y).unwrap()
}

/// `Z = X + Y` observed correctly with probability 0.9, otherwise uniformly among the other two sums.
pub fn noisy_adder() -> Mac {
    Mac::new(&[
        vec![vec![0.9, 0.05, 0.05], vec![0.05, 0.9, 0.05]],
        vec![vec![0.05, 0.9, 0.05], vec![0.05, 0.05, 0.9]],
    ])
    .unwrap()
}

/// A random channel with strictly positive entries.
pub fn random_mac(seed: u64, xs: usize, ys: usize, zs: usize) -> Mac {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut w = Vec::with_capacity(xs * ys * zs);
    for _ in 0..xs * ys {
        let row: Vec<f64> = (0..zs).map(|_| rng.gen_range(0.05..1.0)).collect();
        let s: f64 = row.iter().sum();
        w.extend(row.iter().map(|v| v / s));
    }
    Mac::from_flat(xs, ys, zs, w).unwrap()
}
