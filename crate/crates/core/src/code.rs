//! Explicit `(n, M, N)` codes for the two-user channel, evaluated exactly by
//! enumerating every output sequence: maximum-likelihood decoding, error
//! probabilities, dominant pair sets, wringing and the single-letter checks
//! built on top of them.
//!
//! Positions and codeword indices are 0-based throughout.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::exponent::ExponentResult;
use crate::mac::{dependence_bound, joint_rates, Mac, RatePair, SlackModel};
use crate::prob::{
    entropy_slice, joint_type, l1_distance, mutual_information, EmpiricalType, JointDistribution,
    StochasticMatrix,
};
use crate::region::region_membership;
use crate::search::SearchOptions;

/// Largest output space `|Z|^n` enumerated exactly.
pub const MAX_OUTPUT_SEQUENCES: usize = 10_000_000;
/// Largest type class enumerated when building constant-composition codes.
const MAX_TYPE_CLASS: usize = 1_000_000;
/// Random restarts of the constant-composition construction.
const CONSTRUCTION_ATTEMPTS: usize = 64;

const REJECT: u32 = u32::MAX;

/// `decode(z)` for every output sequence `z`, indexed in base `|Z|` with position 0 most significant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecodeMap {
    z_size: usize,
    n: usize,
    m: usize,
    table: Vec<u32>,
}

impl DecodeMap {
    /// Builds a map from an explicit decision per output sequence (`None` rejects).
    pub fn from_decisions(
        z_size: usize,
        n: usize,
        m: usize,
        decisions: &[Option<(usize, usize)>],
    ) -> Result<Self> {
        let total = output_count(z_size, n)?;
        if decisions.len() != total {
            return Err(Error::LengthMismatch {
                left: decisions.len(),
                right: total,
            });
        }
        let table = decisions
            .iter()
            .map(|d| d.map_or(REJECT, |(i, j)| (j * m + i) as u32))
            .collect();
        Ok(Self {
            z_size,
            n,
            m,
            table,
        })
    }

    pub fn z_size(&self) -> usize {
        self.z_size
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Decision for the output sequence with the given index, `None` for a rejection.
    pub fn decide(&self, z_index: usize) -> Option<(usize, usize)> {
        let c = self.table[z_index];
        (c != REJECT).then(|| (c as usize % self.m, c as usize / self.m))
    }

    /// Decision for an explicit output sequence.
    pub fn decide_sequence(&self, z: &[usize]) -> Result<Option<(usize, usize)>> {
        if z.len() != self.n {
            return Err(Error::LengthMismatch {
                left: z.len(),
                right: self.n,
            });
        }
        let mut idx = 0;
        for (t, &s) in z.iter().enumerate() {
            if s >= self.z_size {
                return Err(Error::SymbolOutOfRange {
                    symbol: s,
                    position: t,
                    size: self.z_size,
                });
            }
            idx = idx * self.z_size + s;
        }
        Ok(self.decide(idx))
    }
}

fn output_count(z_size: usize, n: usize) -> Result<usize> {
    let mut total: usize = 1;
    for _ in 0..n {
        total = total
            .checked_mul(z_size)
            .filter(|&t| t <= MAX_OUTPUT_SEQUENCES)
            .ok_or_else(|| {
                Error::SizeGuard(format!(
                    "|Z|^n = {z_size}^{n} exceeds {MAX_OUTPUT_SEQUENCES}"
                ))
            })?;
    }
    Ok(total)
}

/// Digits of `index` in base `base`, position 0 most significant.
fn sequence_of(mut index: usize, base: usize, out: &mut [usize]) {
    for slot in out.iter_mut().rev() {
        *slot = index % base;
        index /= base;
    }
}

/// An `(n, M, N)` code: `M` codewords for the first sender, `N` for the second.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiUserCode {
    pub n: usize,
    pub x_size: usize,
    pub y_size: usize,
    pub u: Vec<Vec<usize>>,
    pub v: Vec<Vec<usize>>,
    pub decode: Option<DecodeMap>,
}

impl MultiUserCode {
    pub fn new(
        x_size: usize,
        y_size: usize,
        u: Vec<Vec<usize>>,
        v: Vec<Vec<usize>>,
    ) -> Result<Self> {
        if x_size == 0 || y_size == 0 {
            return Err(Error::EmptyAlphabet);
        }
        if u.is_empty() || v.is_empty() {
            return Err(Error::InvalidParameter(
                "a code needs at least one codeword per sender".into(),
            ));
        }
        let n = u[0].len();
        if n == 0 {
            return Err(Error::EmptySequence);
        }
        for (words, size) in [(&u, x_size), (&v, y_size)] {
            for word in words.iter() {
                if word.len() != n {
                    return Err(Error::LengthMismatch {
                        left: word.len(),
                        right: n,
                    });
                }
                if let Some((t, &s)) = word.iter().enumerate().find(|(_, &s)| s >= size) {
                    return Err(Error::SymbolOutOfRange {
                        symbol: s,
                        position: t,
                        size,
                    });
                }
            }
        }
        Ok(Self {
            n,
            x_size,
            y_size,
            u,
            v,
            decode: None,
        })
    }

    pub fn m(&self) -> usize {
        self.u.len()
    }

    pub fn n_codewords(&self) -> usize {
        self.v.len()
    }

    /// `(log2 M / n, log2 N / n)`.
    pub fn rates(&self) -> (f64, f64) {
        let n = self.n as f64;
        (
            (self.m() as f64).log2() / n,
            (self.n_codewords() as f64).log2() / n,
        )
    }

    pub fn with_decoder(mut self, decode: DecodeMap) -> Result<Self> {
        if decode.n != self.n || decode.m != self.m() {
            return Err(Error::InvalidParameter(
                "decoder does not match the code".into(),
            ));
        }
        if decode
            .table
            .iter()
            .any(|&c| c != REJECT && c as usize >= self.m() * self.n_codewords())
        {
            return Err(Error::InvalidParameter(
                "decoder names a pair outside the code".into(),
            ));
        }
        self.decode = Some(decode);
        Ok(self)
    }

    fn check_channel(&self, w: &Mac) -> Result<()> {
        if w.x_size() != self.x_size {
            return Err(Error::AlphabetMismatch {
                left: self.x_size,
                right: w.x_size(),
            });
        }
        if w.y_size() != self.y_size {
            return Err(Error::AlphabetMismatch {
                left: self.y_size,
                right: w.y_size(),
            });
        }
        Ok(())
    }

    /// Parses `{"n": .., "u": [[..], ..], "v": [[..], ..]}` for the given input alphabets.
    pub fn from_json_str(s: &str, x_size: usize, y_size: usize) -> Result<Self> {
        let v: Value = serde_json::from_str(s).map_err(|e| Error::Parse {
            path: "$".into(),
            message: e.to_string(),
        })?;
        Self::from_json_value(&v, x_size, y_size)
    }

    pub fn from_json_value(doc: &Value, x_size: usize, y_size: usize) -> Result<Self> {
        let parse = |path: String, message: String| Error::Parse { path, message };
        let obj = doc
            .as_object()
            .ok_or_else(|| parse("$".into(), "expected an object".into()))?;
        let n = obj
            .get("n")
            .ok_or_else(|| parse("n".into(), "missing field".into()))?
            .as_u64()
            .filter(|&n| n > 0)
            .ok_or_else(|| parse("n".into(), "expected a positive integer".into()))?
            as usize;
        let words = |key: &str, size: usize| -> Result<Vec<Vec<usize>>> {
            let arr = obj
                .get(key)
                .ok_or_else(|| parse(key.to_string(), "missing field".into()))?
                .as_array()
                .ok_or_else(|| parse(key.to_string(), "expected an array of codewords".into()))?;
            if arr.is_empty() {
                return Err(parse(key.to_string(), "no codewords".into()));
            }
            arr.iter()
                .enumerate()
                .map(|(i, word)| {
                    let letters = word.as_array().ok_or_else(|| {
                        parse(format!("{key}[{i}]"), "expected an array of symbols".into())
                    })?;
                    if letters.len() != n {
                        return Err(parse(
                            format!("{key}[{i}]"),
                            format!("length {} differs from n = {n}", letters.len()),
                        ));
                    }
                    letters
                        .iter()
                        .enumerate()
                        .map(|(t, s)| {
                            s.as_u64()
                                .map(|s| s as usize)
                                .filter(|&s| s < size)
                                .ok_or_else(|| {
                                    parse(
                                        format!("{key}[{i}][{t}]"),
                                        format!("expected a symbol below {size}"),
                                    )
                                })
                        })
                        .collect()
                })
                .collect()
        };
        let u = words("u", x_size)?;
        let v = words("v", y_size)?;
        Self::new(x_size, y_size, u, v)
    }

    pub fn to_json_value(&self) -> Value {
        serde_json::json!({ "n": self.n, "u": self.u, "v": self.v })
    }
}

/// All sequences of length `n` whose symbol counts equal `counts`, in lexicographic order.
fn type_class(counts: &[usize], n: usize) -> Result<Vec<Vec<usize>>> {
    // multinomial coefficient, guarded
    let mut size: f64 = 1.0;
    let mut placed = 0;
    for &c in counts {
        for k in 1..=c {
            placed += 1;
            size *= placed as f64 / k as f64;
        }
    }
    if size > MAX_TYPE_CLASS as f64 {
        return Err(Error::SizeGuard(format!(
            "type class of size {size:.0} exceeds {MAX_TYPE_CLASS}"
        )));
    }
    let mut out = Vec::new();
    let mut left = counts.to_vec();
    let mut cur = Vec::with_capacity(n);
    fn rec(left: &mut [usize], cur: &mut Vec<usize>, n: usize, out: &mut Vec<Vec<usize>>) {
        if cur.len() == n {
            out.push(cur.clone());
            return;
        }
        for s in 0..left.len() {
            if left[s] > 0 {
                left[s] -= 1;
                cur.push(s);
                rec(left, cur, n, out);
                cur.pop();
                left[s] += 1;
            }
        }
    }
    rec(&mut left, &mut cur, n, &mut out);
    Ok(out)
}

/// A code whose `M * N` codeword pairs all have joint type `p`.
///
/// The first sender's codewords are distinct random members of the `P_X` type
/// class; the second sender's are drawn from the members of the `P_Y` class
/// that reach joint type `p` with every one of them. Restarts with fresh first
/// codewords before giving up.
pub fn constant_composition_code(
    p: &EmpiricalType,
    m: usize,
    n_codewords: usize,
    seed: u64,
) -> Result<MultiUserCode> {
    let shape = p.shape();
    if shape.len() != 2 {
        return Err(Error::InvalidParameter(format!(
            "expected a joint type on X x Y, got shape {shape:?}"
        )));
    }
    let (xs, ys) = (shape[0], shape[1]);
    let n = p.n();
    if m == 0 || n_codewords == 0 {
        return Err(Error::InvalidParameter("M and N must be positive".into()));
    }
    let counts = p.counts();
    let cx: Vec<usize> = (0..xs)
        .map(|x| (0..ys).map(|y| counts[x * ys + y]).sum())
        .collect();
    let cy: Vec<usize> = (0..ys)
        .map(|y| (0..xs).map(|x| counts[x * ys + y]).sum())
        .collect();
    let class_x = type_class(&cx, n)?;
    let class_y = type_class(&cy, n)?;
    if class_x.len() < m || class_y.len() < n_codewords {
        return Err(Error::Infeasible(format!(
            "type classes hold {} and {} sequences, fewer than M = {m}, N = {n_codewords}",
            class_x.len(),
            class_y.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..CONSTRUCTION_ATTEMPTS {
        let u: Vec<Vec<usize>> = class_x.choose_multiple(&mut rng, m).cloned().collect();
        let mut fits: Vec<&Vec<usize>> = class_y
            .iter()
            .filter(|v| {
                u.iter().all(|ui| {
                    let mut c = vec![0usize; xs * ys];
                    for (&a, &b) in ui.iter().zip(v.iter()) {
                        c[a * ys + b] += 1;
                    }
                    c == counts
                })
            })
            .collect();
        if fits.len() >= n_codewords {
            fits.shuffle(&mut rng);
            let v = fits.into_iter().take(n_codewords).cloned().collect();
            return MultiUserCode::new(xs, ys, u, v);
        }
    }
    Err(Error::Infeasible(format!(
        "no {m} x {n_codewords} code with every pair of the requested joint type found in {CONSTRUCTION_ATTEMPTS} attempts"
    )))
}

/// `W^n(z | u_i, v_j)` for all pairs at one output sequence, pair index `i * N + j`.
fn pair_likelihoods(w: &Mac, code: &MultiUserCode, z: &[usize], out: &mut [f64]) {
    let nn = code.n_codewords();
    for (i, ui) in code.u.iter().enumerate() {
        for (j, vj) in code.v.iter().enumerate() {
            let mut prob = 1.0;
            for t in 0..code.n {
                prob *= w.prob(z[t], ui[t], vj[t]);
                if prob == 0.0 {
                    break;
                }
            }
            out[i * nn + j] = prob;
        }
    }
}

/// Maximum-likelihood decoder over every output sequence. Likelihoods within a
/// relative `1e-12` count as tied (products of equal factors in different
/// order); ties go to the smallest `(i, j)`.
pub fn ml_decode(w: &Mac, code: &MultiUserCode) -> Result<DecodeMap> {
    code.check_channel(w)?;
    let zs = w.z_size();
    let total = output_count(zs, code.n)?;
    let (mm, nn) = (code.m(), code.n_codewords());
    let table: Vec<u32> = (0..total)
        .into_par_iter()
        .map_init(
            || (vec![0usize; code.n], vec![0.0; mm * nn]),
            |(z, lik), idx| {
                sequence_of(idx, zs, z);
                pair_likelihoods(w, code, z, lik);
                let mut best = 0;
                for k in 1..lik.len() {
                    if lik[k] > lik[best] * (1.0 + 1e-12) {
                        best = k;
                    }
                }
                // pair (i, j) sits at i * N + j; the map stores j * M + i
                let (i, j) = (best / nn, best % nn);
                (j * mm + i) as u32
            },
        )
        .collect();
    Ok(DecodeMap {
        z_size: zs,
        n: code.n,
        m: mm,
        table,
    })
}

/// Exact per-pair error probabilities of a code.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodeStats {
    /// `1 - W^n(D_ij | u_i, v_j)`, indexed `[i][j]`.
    pub per_pair_error: Vec<Vec<f64>>,
    pub max_error: f64,
    pub avg_error: f64,
}

impl CodeStats {
    pub fn from_errors(per_pair_error: Vec<Vec<f64>>) -> Self {
        let flat: Vec<f64> = per_pair_error.iter().flatten().copied().collect();
        let max_error = flat.iter().copied().fold(0.0, f64::max);
        let avg_error = flat.iter().sum::<f64>() / flat.len().max(1) as f64;
        Self {
            per_pair_error,
            max_error,
            avg_error,
        }
    }
}

fn decoder_for<'a>(w: &Mac, code: &'a MultiUserCode) -> Result<std::borrow::Cow<'a, DecodeMap>> {
    code.check_channel(w)?;
    match &code.decode {
        Some(d) if d.z_size == w.z_size() => Ok(std::borrow::Cow::Borrowed(d)),
        Some(_) => Err(Error::InvalidParameter(
            "decoder built for another output alphabet".into(),
        )),
        None => Ok(std::borrow::Cow::Owned(ml_decode(w, code)?)),
    }
}

/// Error probabilities under the code's decoder, or the ML decoder when it has none.
pub fn error_probabilities(w: &Mac, code: &MultiUserCode) -> Result<CodeStats> {
    let dec = decoder_for(w, code)?;
    let zs = w.z_size();
    let total = output_count(zs, code.n)?;
    let (mm, nn) = (code.m(), code.n_codewords());
    let mut z = vec![0usize; code.n];
    let mut correct = vec![0.0f64; mm * nn];
    for idx in 0..total {
        if let Some((i, j)) = dec.decide(idx) {
            sequence_of(idx, zs, &mut z);
            let mut prob = 1.0;
            for t in 0..code.n {
                prob *= w.prob(z[t], code.u[i][t], code.v[j][t]);
            }
            correct[i * nn + j] += prob;
        }
    }
    let per_pair_error = (0..mm)
        .map(|i| {
            (0..nn)
                .map(|j| (1.0 - correct[i * nn + j]).clamp(0.0, 1.0))
                .collect()
        })
        .collect();
    Ok(CodeStats::from_errors(per_pair_error))
}

/// `W^n(D_ij | x, y)` for every pair `(i, j)` (indexed `i * N + j`) at arbitrary input sequences.
pub fn decoding_set_masses(
    w: &Mac,
    code: &MultiUserCode,
    x: &[usize],
    y: &[usize],
) -> Result<Vec<f64>> {
    let dec = decoder_for(w, code)?;
    if x.len() != code.n || y.len() != code.n {
        return Err(Error::LengthMismatch {
            left: x.len().max(y.len()),
            right: code.n,
        });
    }
    let zs = w.z_size();
    let total = output_count(zs, code.n)?;
    let nn = code.n_codewords();
    let mut z = vec![0usize; code.n];
    let mut out = vec![0.0; code.m() * nn];
    for idx in 0..total {
        if let Some((i, j)) = dec.decide(idx) {
            sequence_of(idx, zs, &mut z);
            out[i * nn + j] += crate::mac::product_channel_prob(w, x, y, &z)?;
        }
    }
    Ok(out)
}

/// A joint type together with the pairs `(i, j)` of that type decoded correctly with probability at least `(1 - lambda) / 2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DominantType {
    pub p: EmpiricalType,
    pub pairs: Vec<(usize, usize)>,
    /// Minimum size `M N (1 - 2 lambda / (1 + lambda)) / (n + 1)^{|X||Y|}` the set had to reach.
    pub threshold: f64,
}

/// The joint type whose well-decoded pair set is largest, if that set is large enough.
pub fn dominant_type(
    code: &MultiUserCode,
    stats: &CodeStats,
    lambda: f64,
) -> Result<Option<DominantType>> {
    if !(0.0..1.0).contains(&lambda) {
        return Err(Error::InvalidParameter(format!(
            "lambda must lie in [0, 1), got {lambda}"
        )));
    }
    let level = (1.0 + lambda) / 2.0;
    let mut classes: BTreeMap<Vec<usize>, (EmpiricalType, Vec<(usize, usize)>)> = BTreeMap::new();
    for (i, ui) in code.u.iter().enumerate() {
        for (j, vj) in code.v.iter().enumerate() {
            if stats.per_pair_error[i][j] <= level {
                let t = joint_type(ui, vj, code.x_size, code.y_size)?;
                classes
                    .entry(t.counts().to_vec())
                    .or_insert_with(|| (t, Vec::new()))
                    .1
                    .push((i, j));
            }
        }
    }
    let xy = (code.x_size * code.y_size) as i32;
    let threshold = (code.m() * code.n_codewords()) as f64 * (1.0 - 2.0 * lambda / (1.0 + lambda))
        / ((code.n + 1) as f64).powi(xy);
    // map order is lexicographic in the counts, and only a strictly larger set replaces the incumbent
    let mut best: Option<(EmpiricalType, Vec<(usize, usize)>)> = None;
    for (_, (t, pairs)) in classes {
        if best.as_ref().is_none_or(|(_, b)| pairs.len() > b.len()) {
            best = Some((t, pairs));
        }
    }
    Ok(best
        .filter(|(_, pairs)| pairs.len() as f64 >= threshold)
        .map(|(p, pairs)| DominantType {
            p,
            pairs,
            threshold,
        }))
}

/// The uniform distribution on a set of codeword pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct FanoDistribution {
    pub n: usize,
    pub x_size: usize,
    pub y_size: usize,
    pub pairs: Vec<(Vec<usize>, Vec<usize>)>,
}

impl FanoDistribution {
    pub fn mass(&self) -> f64 {
        1.0 / self.pairs.len() as f64
    }

    /// Distribution of `(X_t, Y_t)`.
    pub fn letter_joint(&self, t: usize) -> JointDistribution {
        let ys = self.y_size;
        let mut probs = vec![0.0; self.x_size * ys];
        let w = self.mass();
        for (x, y) in &self.pairs {
            probs[x[t] * ys + y[t]] += w;
        }
        JointDistribution::new(vec![self.x_size, ys], probs).expect("uniform mass over pairs")
    }

    /// `(1/n) sum_t P(X_t, Y_t)`.
    pub fn average_letter_joint(&self) -> JointDistribution {
        let ys = self.y_size;
        let mut probs = vec![0.0; self.x_size * ys];
        let w = self.mass() / self.n as f64;
        for (x, y) in &self.pairs {
            for t in 0..self.n {
                probs[x[t] * ys + y[t]] += w;
            }
        }
        JointDistribution::new(vec![self.x_size, ys], probs).expect("uniform mass over pairs")
    }

    /// `I(X^n ; Y^n)` in bits, computed on the sparse support.
    pub fn mutual_information(&self) -> f64 {
        let mut xs: BTreeMap<&[usize], usize> = BTreeMap::new();
        let mut ys: BTreeMap<&[usize], usize> = BTreeMap::new();
        let mut joint: BTreeMap<(&[usize], &[usize]), usize> = BTreeMap::new();
        for (x, y) in &self.pairs {
            *xs.entry(x).or_default() += 1;
            *ys.entry(y).or_default() += 1;
            *joint.entry((x, y)).or_default() += 1;
        }
        let total = self.pairs.len() as f64;
        let h = |counts: Vec<usize>| {
            entropy_slice(
                &counts
                    .into_iter()
                    .map(|c| c as f64 / total)
                    .collect::<Vec<_>>(),
            )
        };
        let v = h(xs.into_values().collect()) + h(ys.into_values().collect())
            - h(joint.into_values().collect());
        v.max(0.0)
    }
}

/// Fano distribution of the pairs `(u_i, v_j)` listed in `pairs`.
pub fn fano_distribution(
    code: &MultiUserCode,
    pairs: &[(usize, usize)],
) -> Result<FanoDistribution> {
    if pairs.is_empty() {
        return Err(Error::EmptySet);
    }
    let mut list = Vec::with_capacity(pairs.len());
    for &(i, j) in pairs {
        if i >= code.m() || j >= code.n_codewords() {
            return Err(Error::InvalidParameter(format!(
                "pair ({i}, {j}) is outside the code"
            )));
        }
        list.push((code.u[i].clone(), code.v[j].clone()));
    }
    Ok(FanoDistribution {
        n: code.n,
        x_size: code.x_size,
        y_size: code.y_size,
        pairs: list,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DependenceReport {
    /// `I(X^n ; Y^n)` under the Fano distribution of the pair set.
    pub lhs: f64,
    /// `-log2(1 - 2 lambda / (1 + lambda)) + |X||Y| log2(n + 1)`.
    pub rhs: f64,
    pub pass: bool,
}

/// The dependence between the two codeword processes of a dominant pair set is logarithmic in `n`.
pub fn dependence_check(
    code: &MultiUserCode,
    pairs: &[(usize, usize)],
    lambda: f64,
) -> Result<DependenceReport> {
    if !(0.0..1.0).contains(&lambda) {
        return Err(Error::InvalidParameter(format!(
            "lambda must lie in [0, 1), got {lambda}"
        )));
    }
    let lhs = fano_distribution(code, pairs)?.mutual_information();
    let rhs = dependence_bound(lambda, code.n, code.x_size, code.y_size);
    Ok(DependenceReport {
        lhs,
        rhs,
        pass: lhs <= rhs + 1e-9,
    })
}

/// One conditioning step: position `t` fixed to `(x, y)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WringCoord {
    pub t: usize,
    pub x: usize,
    pub y: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WringingResult {
    pub coords: Vec<WringCoord>,
    pub k: usize,
    /// Pair-set size before the first step and after each step.
    pub sizes: Vec<usize>,
    pub subcode: Vec<(usize, usize)>,
    pub retained_fraction: f64,
    /// `(delta / (|X||Y| (2 sigma - delta)))^k`.
    pub floor: f64,
    pub floor_met: bool,
    /// The loop stopped because `k` reached `2 sigma / delta`.
    pub capped: bool,
    /// A step left no pairs (cannot happen with the greedy rule, kept as a guard).
    pub emptied: bool,
    /// `max_t I(X_t ; Y_t)` in bits on the returned subcode.
    pub max_letter_information: f64,
    pub delta: f64,
    pub sigma: f64,
}

/// `(delta, sigma) = (n^{-1/2}, -log2(1 - 2 lambda / (1 + lambda)) + |X||Y| log2(n + 1))`.
pub fn default_wring_parameters(n: usize, lambda: f64, x_size: usize, y_size: usize) -> (f64, f64) {
    (
        (n as f64).powf(-0.5),
        dependence_bound(lambda, n, x_size, y_size),
    )
}

fn letter_informations(f: &FanoDistribution) -> Vec<f64> {
    (0..f.n)
        .map(|t| mutual_information(&f.letter_joint(t)).expect("two-axis joint"))
        .collect()
}

/// Greedily conditions on single letters until every position has `I(X_t ; Y_t) <= delta`
/// or `k` reaches `2 sigma / delta`: each step takes the most dependent position and
/// its most likely symbol pair.
pub fn wring(
    code: &MultiUserCode,
    pairs: &[(usize, usize)],
    delta: f64,
    sigma: f64,
) -> Result<WringingResult> {
    if pairs.is_empty() {
        return Err(Error::EmptySet);
    }
    if !(delta > 0.0 && delta < sigma) {
        return Err(Error::InvalidParameter(format!(
            "need 0 < delta < sigma, got delta = {delta}, sigma = {sigma}"
        )));
    }
    let (xs, ys) = (code.x_size, code.y_size);
    let cap = 2.0 * sigma / delta;
    let mut current = pairs.to_vec();
    let mut sizes = vec![current.len()];
    let mut coords = Vec::new();
    let mut capped = false;
    let mut emptied = false;
    loop {
        let fano = fano_distribution(code, &current)?;
        let info = letter_informations(&fano);
        let Some(t) = (0..code.n)
            .filter(|&t| info[t] > delta)
            .fold(None, |b: Option<usize>, t| match b {
                Some(bt) if info[bt] >= info[t] => Some(bt),
                _ => Some(t),
            })
        else {
            break;
        };
        if (coords.len() as f64) >= cap {
            capped = true;
            break;
        }
        let pt = fano.letter_joint(t);
        let probs = pt.probs();
        let mut best = 0;
        for k in 1..xs * ys {
            if probs[k] > probs[best] {
                best = k;
            }
        }
        let (x, y) = (best / ys, best % ys);
        let next: Vec<(usize, usize)> = current
            .iter()
            .copied()
            .filter(|&(i, j)| code.u[i][t] == x && code.v[j][t] == y)
            .collect();
        coords.push(WringCoord { t, x, y });
        sizes.push(next.len());
        if next.is_empty() {
            emptied = true;
            break;
        }
        current = next;
    }
    let k = coords.len();
    let retained_fraction = current.len() as f64 / pairs.len() as f64;
    let floor = (delta / ((xs * ys) as f64 * (2.0 * sigma - delta))).powi(k as i32);
    let max_letter_information = letter_informations(&fano_distribution(code, &current)?)
        .into_iter()
        .fold(0.0, f64::max);
    Ok(WringingResult {
        coords,
        k,
        sizes,
        subcode: current,
        retained_fraction,
        floor,
        floor_met: retained_fraction >= floor,
        capped,
        emptied,
        max_letter_information,
        delta,
        sigma,
    })
}

/// `max_t || P(X_t, Y_t) - P(X_t) P(Y_t) ||_1` under the Fano distribution of `pairs`.
pub fn independence_gap(code: &MultiUserCode, pairs: &[(usize, usize)]) -> Result<f64> {
    let fano = fano_distribution(code, pairs)?;
    let mut gap: f64 = 0.0;
    for t in 0..code.n {
        let joint = fano.letter_joint(t);
        let px = joint.marginal_distribution(0)?;
        let py = joint.marginal_distribution(1)?;
        gap = gap.max(l1_distance(&joint, &JointDistribution::product(&px, &py))?);
    }
    Ok(gap)
}

/// The Pinsker ceiling `2 sqrt(delta ln 2)` on the gap after wringing at level `delta` bits.
pub fn independence_bound(delta: f64) -> f64 {
    2.0 * (delta * std::f64::consts::LN_2).sqrt()
}

/// A single-user code through a position-dependent channel.
#[derive(Debug, Clone, PartialEq)]
pub struct SingleUserCode {
    pub n: usize,
    pub x_size: usize,
    pub codewords: Vec<Vec<usize>>,
    /// Error probability of each codeword under its decoding set.
    pub errors: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AugustinReport {
    /// `log2 M`.
    pub lhs: f64,
    /// `sum_t I(X_t ; Z_t) + 3 / (1 - lambda) |X| sqrt(n)`.
    pub rhs: f64,
    pub informations: f64,
    pub pass: bool,
}

/// Converse for a non-stationary single-user channel: `log2 M < sum_t I(X_t ; Z_t) + 3 |X| sqrt(n) / (1 - lambda)`,
/// informations under the uniform distribution on the codewords. Every codeword must err with probability at most `lambda`.
pub fn augustin_check(
    code: &SingleUserCode,
    slices: &[StochasticMatrix],
    lambda: f64,
) -> Result<AugustinReport> {
    if !(0.0..1.0).contains(&lambda) {
        return Err(Error::InvalidParameter(format!(
            "lambda must lie in [0, 1), got {lambda}"
        )));
    }
    if slices.len() != code.n {
        return Err(Error::LengthMismatch {
            left: slices.len(),
            right: code.n,
        });
    }
    if code.codewords.is_empty() {
        return Err(Error::EmptySet);
    }
    if let Some(e) = code.errors.iter().find(|&&e| e > lambda + 1e-12) {
        return Err(Error::InvalidParameter(format!(
            "a codeword errs with probability {e} > lambda = {lambda}"
        )));
    }
    let mass = 1.0 / code.codewords.len() as f64;
    let mut informations = 0.0;
    for (t, slice) in slices.iter().enumerate() {
        if slice.inputs() != code.x_size {
            return Err(Error::AlphabetMismatch {
                left: slice.inputs(),
                right: code.x_size,
            });
        }
        let zs = slice.outputs();
        let mut probs = vec![0.0; code.x_size * zs];
        for word in &code.codewords {
            for (z, &q) in slice.row(word[t]).probs().iter().enumerate() {
                probs[word[t] * zs + z] += mass * q;
            }
        }
        informations += mutual_information(&JointDistribution::new(vec![code.x_size, zs], probs)?)?;
    }
    let lhs = (code.codewords.len() as f64).log2();
    let rhs = informations + 3.0 / (1.0 - lambda) * code.x_size as f64 * (code.n as f64).sqrt();
    Ok(AugustinReport {
        lhs,
        rhs,
        informations,
        pass: lhs < rhs,
    })
}

/// The code `{(u_i, D_ij) : i in rows}` for a fixed second codeword `v_j`, with channel slices `W(. | ., v_jt)`.
pub fn row_subcode(
    w: &Mac,
    code: &MultiUserCode,
    stats: &CodeStats,
    j: usize,
    rows: &[usize],
) -> Result<(SingleUserCode, Vec<StochasticMatrix>)> {
    code.check_channel(w)?;
    let slices = (0..code.n)
        .map(|t| {
            StochasticMatrix::from_rows(
                (0..w.x_size())
                    .map(|x| w.row(x, code.v[j][t]).to_vec())
                    .collect(),
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let sub = SingleUserCode {
        n: code.n,
        x_size: code.x_size,
        codewords: rows.iter().map(|&i| code.u[i].clone()).collect(),
        errors: rows.iter().map(|&i| stats.per_pair_error[i][j]).collect(),
    };
    Ok((sub, slices))
}

/// The code `{(v_j, D_ij) : j in cols}` for a fixed first codeword `u_i`, with channel slices `W(. | u_it, .)`.
pub fn column_subcode(
    w: &Mac,
    code: &MultiUserCode,
    stats: &CodeStats,
    i: usize,
    cols: &[usize],
) -> Result<(SingleUserCode, Vec<StochasticMatrix>)> {
    code.check_channel(w)?;
    let slices = (0..code.n)
        .map(|t| {
            StochasticMatrix::from_rows(
                (0..w.y_size())
                    .map(|y| w.row(code.u[i][t], y).to_vec())
                    .collect(),
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let sub = SingleUserCode {
        n: code.n,
        x_size: code.y_size,
        codewords: cols.iter().map(|&j| code.v[j].clone()).collect(),
        errors: cols.iter().map(|&j| stats.per_pair_error[i][j]).collect(),
    };
    Ok((sub, slices))
}

/// Groups a pair set into rows (fixed `j`) and columns (fixed `i`).
pub fn rows_and_columns(
    pairs: &[(usize, usize)],
) -> (BTreeMap<usize, Vec<usize>>, BTreeMap<usize, Vec<usize>>) {
    let mut rows: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    let mut cols: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for &(i, j) in pairs {
        rows.entry(j).or_default().push(i);
        cols.entry(i).or_default().push(j);
    }
    (rows, cols)
}

/// Constants of the per-user rate bounds on a wrung subcode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateBoundConstants {
    /// Multiplier of `|X| sqrt(n) / (1 - lambda')` in the single-user converse.
    pub augustin: f64,
    /// Coefficient of an extra `|Z|` term added to the two single-user bounds.
    pub z_term: f64,
}

impl Default for RateBoundConstants {
    fn default() -> Self {
        Self {
            augustin: 3.0,
            z_term: 0.0,
        }
    }
}

/// Left and right sides of the three rate bounds on a wrung subcode. Diagnostic only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateBoundDiagnostics {
    /// `(log2 M, log2 N, log2 MN)`.
    pub lhs: [f64; 3],
    /// `sum_t` of `I(X_t;Z_t|Y_t)`, `I(Y_t;Z_t|X_t)`, `I(X_tY_t;Z_t)` under the subcode's Fano distribution.
    pub informations: [f64; 3],
    pub rhs: [f64; 3],
    /// `rhs - lhs`.
    pub margins: [f64; 3],
}

/// The explicit pre-constant chain of the rate bounds, evaluated on a wrung subcode of a dominant pair set at level `lambda`.
pub fn rate_bound_diagnostics(
    w: &Mac,
    code: &MultiUserCode,
    wrung: &WringingResult,
    lambda: f64,
    constants: &RateBoundConstants,
) -> Result<RateBoundDiagnostics> {
    code.check_channel(w)?;
    let fano = fano_distribution(code, &wrung.subcode)?;
    let mut informations = [0.0; 3];
    for t in 0..code.n {
        let r = joint_rates(w, &fano.letter_joint(t))?;
        for (acc, v) in informations.iter_mut().zip(r.as_array()) {
            *acc += v;
        }
    }
    let n = code.n as f64;
    let (xs, ys, zs) = (code.x_size as f64, code.y_size as f64, w.z_size() as f64);
    let xy = xs * ys;
    let lam_prime = (1.0 + lambda) / 2.0;
    let lam_star = 2.0 * lambda / (1.0 + lambda);
    let k = wrung.k as f64;
    let (delta, sigma) = (wrung.delta, wrung.sigma);
    let aug = |width: f64| constants.augustin / (1.0 - lam_prime) * width * n.sqrt();
    let counting = -(1.0 - lam_star).log2() + n.log2() + xy * (n + 1.0).log2();
    let wringing = k * (xy * 2.0 * sigma / delta).log2();
    let single = |i: f64, width: f64| {
        (1.0 + 2.0 / n) * (i + aug(width)) + counting + wringing + constants.z_term * zs
    };
    let rhs = [
        single(informations[0], xs),
        single(informations[1], ys),
        informations[2] + aug(xy) + xy * (n + 1.0).log2() - (1.0 - lam_star).log2()
            + k * (2.0 * sigma / delta).log2()
            + k * xy.log2(),
    ];
    let lhs = [
        (code.m() as f64).log2(),
        (code.n_codewords() as f64).log2(),
        ((code.m() * code.n_codewords()) as f64).log2(),
    ];
    Ok(RateBoundDiagnostics {
        lhs,
        informations,
        rhs,
        margins: [rhs[0] - lhs[0], rhs[1] - lhs[1], rhs[2] - lhs[2]],
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrongConverseReport {
    /// No joint type carries a large enough well-decoded pair set.
    pub hypothesis_unmet: bool,
    pub rates: (f64, f64),
    pub eps: f64,
    pub dominant: Option<DominantType>,
    pub inside: bool,
    pub slack: f64,
}

/// Checks that the code's rates lie in the finite-length region of the channel at its dominant type.
pub fn strong_converse_check(
    w: &Mac,
    code: &MultiUserCode,
    stats: &CodeStats,
    lambda: f64,
    model: &SlackModel,
    opts: &SearchOptions,
) -> Result<StrongConverseReport> {
    code.check_channel(w)?;
    let (r1, r2) = code.rates();
    let eps = model.eps(code.n, code.x_size, code.y_size);
    let Some(dom) = dominant_type(code, stats, lambda)? else {
        return Ok(StrongConverseReport {
            hypothesis_unmet: true,
            rates: (r1, r2),
            eps,
            dominant: None,
            inside: false,
            slack: f64::NAN,
        });
    };
    let verdict = region_membership(w, &dom.p.to_joint(), &RatePair::new(r1, r2)?, eps, opts)?;
    Ok(StrongConverseReport {
        hypothesis_unmet: false,
        rates: (r1, r2),
        eps,
        dominant: Some(dom),
        inside: verdict.inside,
        slack: verdict.slack,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpherePackingCheck {
    pub max_error: f64,
    /// `(1/2) 2^{-n e (1 + delta)}`.
    pub bound: f64,
    pub exponent: f64,
    pub pass: bool,
}

/// Compares the code's maximal error with the sphere-packing lower bound at positive rates `r`,
/// which the code's rates must exceed by `delta > 0` in both coordinates.
pub fn sphere_packing_verify(
    w: &Mac,
    code: &MultiUserCode,
    stats: &CodeStats,
    r: &RatePair,
    delta: f64,
    e_sp: &ExponentResult,
) -> Result<SpherePackingCheck> {
    code.check_channel(w)?;
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::RatePrecondition(format!(
            "the bound needs delta > 0, got {delta}"
        )));
    }
    if !(r.r1 > 0.0 && r.r2 > 0.0) {
        return Err(Error::RatePrecondition(format!(
            "the bound needs positive rates, got ({}, {})",
            r.r1, r.r2
        )));
    }
    let (c1, c2) = code.rates();
    // tolerate the roundoff of log2 on exact powers of two
    if c1 + 1e-12 < r.r1 + delta || c2 + 1e-12 < r.r2 + delta {
        return Err(Error::RatePrecondition(format!(
            "code rates ({c1:.6}, {c2:.6}) do not exceed ({:.6}, {:.6}) by delta = {delta}",
            r.r1, r.r2
        )));
    }
    let bound = 0.5 * (-(code.n as f64) * e_sp.value * (1.0 + delta)).exp2();
    Ok(SpherePackingCheck {
        max_error: stats.max_error,
        bound,
        exponent: e_sp.value,
        pass: stats.max_error >= bound - 1e-12,
    })
}
