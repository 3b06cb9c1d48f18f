//! Finite-alphabet probability primitives.
//!
//! All information quantities are reported in bits. Divergences follow the
//! usual conventions `0 log 0 = 0` and `p log(p/0) = +inf`, so a divergence can
//! be `f64::INFINITY` without that being an error.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Entries must sum to one within this tolerance after construction.
pub const SIMPLEX_TOL: f64 = 1e-12;
/// Inputs within this distance of the simplex are renormalized; beyond it they are rejected.
pub const RENORM_TOL: f64 = 1e-9;

#[inline]
pub(crate) fn plog2p(p: f64) -> f64 {
    if p > 0.0 {
        -p * p.log2()
    } else {
        0.0
    }
}

/// Shannon entropy of a raw probability slice, in bits.
#[inline]
pub(crate) fn entropy_slice(p: &[f64]) -> f64 {
    p.iter().map(|&v| plog2p(v)).sum()
}

/// Relative entropy of raw slices, in bits. Lengths must agree.
#[inline]
pub(crate) fn kl_slice(p: &[f64], q: &[f64]) -> f64 {
    let mut d = 0.0;
    for (&a, &b) in p.iter().zip(q) {
        if a > 0.0 {
            if b <= 0.0 {
                return f64::INFINITY;
            }
            d += a * (a / b).log2();
        }
    }
    d.max(0.0)
}

fn check_and_normalize(mut probs: Vec<f64>) -> Result<Vec<f64>> {
    if probs.is_empty() {
        return Err(Error::EmptyAlphabet);
    }
    for (index, &value) in probs.iter().enumerate() {
        if !value.is_finite() {
            return Err(Error::NonFinite { index });
        }
        if value < 0.0 {
            return Err(Error::NegativeEntry { index, value });
        }
    }
    let sum: f64 = probs.iter().sum();
    if (sum - 1.0).abs() > RENORM_TOL {
        return Err(Error::NotNormalized { sum });
    }
    if (sum - 1.0).abs() > 0.0 {
        probs.iter_mut().for_each(|p| *p /= sum);
    }
    Ok(probs)
}

/// A probability vector on a finite alphabet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Distribution {
    probs: Vec<f64>,
}

impl TryFrom<Vec<f64>> for Distribution {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Distribution::new(v)
    }
}

impl From<Distribution> for Vec<f64> {
    fn from(d: Distribution) -> Self {
        d.probs
    }
}

impl Distribution {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        Ok(Self {
            probs: check_and_normalize(probs)?,
        })
    }

    pub fn uniform(k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::EmptyAlphabet);
        }
        Ok(Self {
            probs: vec![1.0 / k as f64; k],
        })
    }

    pub fn point_mass(k: usize, at: usize) -> Result<Self> {
        if at >= k {
            return Err(Error::SymbolOutOfRange {
                symbol: at,
                position: 0,
                size: k,
            });
        }
        let mut probs = vec![0.0; k];
        probs[at] = 1.0;
        Ok(Self { probs })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn get(&self, i: usize) -> f64 {
        self.probs[i]
    }

    pub fn permuted(&self, perm: &[usize]) -> Self {
        Self {
            probs: perm.iter().map(|&i| self.probs[i]).collect(),
        }
    }
}

/// A conditional kernel: one output distribution per input symbol.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StochasticMatrix {
    rows: Vec<Distribution>,
}

impl StochasticMatrix {
    pub fn new(rows: Vec<Distribution>) -> Result<Self> {
        let first = rows.first().ok_or(Error::EmptyAlphabet)?.len();
        for r in &rows {
            if r.len() != first {
                return Err(Error::AlphabetMismatch {
                    left: first,
                    right: r.len(),
                });
            }
        }
        Ok(Self { rows })
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        Self::new(
            rows.into_iter()
                .map(Distribution::new)
                .collect::<Result<Vec<_>>>()?,
        )
    }

    pub fn inputs(&self) -> usize {
        self.rows.len()
    }

    pub fn outputs(&self) -> usize {
        self.rows[0].len()
    }

    pub fn row(&self, i: usize) -> &Distribution {
        &self.rows[i]
    }

    pub fn rows(&self) -> &[Distribution] {
        &self.rows
    }
}

/// A joint distribution over the product of one or more finite alphabets,
/// stored row-major (last axis fastest).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointDistribution {
    shape: Vec<usize>,
    probs: Vec<f64>,
}

impl JointDistribution {
    pub fn new(shape: Vec<usize>, probs: Vec<f64>) -> Result<Self> {
        if shape.is_empty() || shape.contains(&0) {
            return Err(Error::EmptyAlphabet);
        }
        let size: usize = shape.iter().product();
        if size != probs.len() {
            return Err(Error::ShapeMismatch {
                left: shape,
                right: vec![probs.len()],
            });
        }
        Ok(Self {
            shape,
            probs: check_and_normalize(probs)?,
        })
    }

    /// Builds a two-axis joint from nested rows `m[x][y]`.
    pub fn from_matrix(m: &[Vec<f64>]) -> Result<Self> {
        let rows = m.len();
        let cols = m.first().map(Vec::len).unwrap_or(0);
        if m.iter().any(|r| r.len() != cols) {
            return Err(Error::ShapeMismatch {
                left: vec![rows, cols],
                right: m.iter().map(Vec::len).collect(),
            });
        }
        Self::new(vec![rows, cols], m.iter().flatten().copied().collect())
    }

    pub fn product(a: &Distribution, b: &Distribution) -> Self {
        let probs = a
            .probs()
            .iter()
            .flat_map(|&pa| b.probs().iter().map(move |&pb| pa * pb))
            .collect();
        Self {
            shape: vec![a.len(), b.len()],
            probs,
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    fn strides(&self) -> Vec<usize> {
        let mut s = vec![1; self.shape.len()];
        for i in (0..self.shape.len().saturating_sub(1)).rev() {
            s[i] = s[i + 1] * self.shape[i + 1];
        }
        s
    }

    pub fn get(&self, index: &[usize]) -> f64 {
        let off: usize = index.iter().zip(self.strides()).map(|(i, s)| i * s).sum();
        self.probs[off]
    }

    /// Marginal over the listed axes, kept in the listed order.
    pub fn marginal(&self, axes: &[usize]) -> Result<JointDistribution> {
        if axes.is_empty() {
            return Err(Error::AxisNaming("empty axis list".into()));
        }
        for (i, &a) in axes.iter().enumerate() {
            if a >= self.rank() || axes[..i].contains(&a) {
                return Err(Error::AxisNaming(format!(
                    "axis {a} invalid for rank {}",
                    self.rank()
                )));
            }
        }
        let shape: Vec<usize> = axes.iter().map(|&a| self.shape[a]).collect();
        let mut out = vec![0.0; shape.iter().product()];
        let mut idx = vec![0usize; self.rank()];
        for &p in &self.probs {
            let mut off = 0;
            for &a in axes {
                off = off * self.shape[a] + idx[a];
            }
            out[off] += p;
            for d in (0..self.rank()).rev() {
                idx[d] += 1;
                if idx[d] < self.shape[d] {
                    break;
                }
                idx[d] = 0;
            }
        }
        Ok(JointDistribution { shape, probs: out })
    }

    pub fn marginal_distribution(&self, axis: usize) -> Result<Distribution> {
        let m = self.marginal(&[axis])?;
        Ok(Distribution { probs: m.probs })
    }

    pub fn to_distribution(&self) -> Distribution {
        Distribution {
            probs: self.probs.clone(),
        }
    }
}

impl From<Distribution> for JointDistribution {
    fn from(d: Distribution) -> Self {
        Self {
            shape: vec![d.len()],
            probs: d.probs,
        }
    }
}

/// Occurrence counts of a sequence (or tuple of sequences) of length `n`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EmpiricalType {
    shape: Vec<usize>,
    counts: Vec<usize>,
    n: usize,
}

impl EmpiricalType {
    pub fn from_counts(shape: Vec<usize>, counts: Vec<usize>) -> Result<Self> {
        if shape.iter().product::<usize>() != counts.len() {
            return Err(Error::ShapeMismatch {
                left: shape,
                right: vec![counts.len()],
            });
        }
        let n = counts.iter().sum();
        if n == 0 {
            return Err(Error::EmptySequence);
        }
        Ok(Self { shape, counts, n })
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn to_joint(&self) -> JointDistribution {
        JointDistribution {
            shape: self.shape.clone(),
            probs: self
                .counts
                .iter()
                .map(|&c| c as f64 / self.n as f64)
                .collect(),
        }
    }

    pub fn to_distribution(&self) -> Distribution {
        self.to_joint().to_distribution()
    }
}

pub fn entropy(p: &Distribution) -> f64 {
    entropy_slice(p.probs())
}

pub fn kl_divergence(p: &Distribution, q: &Distribution) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::AlphabetMismatch {
            left: p.len(),
            right: q.len(),
        });
    }
    Ok(kl_slice(p.probs(), q.probs()))
}

/// `D(V||W|P) = sum_x P(x) D(V(.|x) || W(.|x))`; rows with `P(x) = 0` contribute nothing.
pub fn conditional_kl(v: &StochasticMatrix, w: &StochasticMatrix, p: &Distribution) -> Result<f64> {
    if v.inputs() != w.inputs() || v.inputs() != p.len() {
        return Err(Error::AlphabetMismatch {
            left: v.inputs(),
            right: if v.inputs() != w.inputs() {
                w.inputs()
            } else {
                p.len()
            },
        });
    }
    if v.outputs() != w.outputs() {
        return Err(Error::AlphabetMismatch {
            left: v.outputs(),
            right: w.outputs(),
        });
    }
    let mut total = 0.0;
    for x in 0..p.len() {
        let px = p.get(x);
        if px > 0.0 {
            total += px * kl_divergence(v.row(x), w.row(x))?;
        }
    }
    Ok(total)
}

pub fn mutual_information(pxy: &JointDistribution) -> Result<f64> {
    if pxy.rank() != 2 {
        return Err(Error::AxisNaming(format!(
            "mutual information needs a two-axis joint, got rank {}",
            pxy.rank()
        )));
    }
    conditional_mutual_information(pxy, &[0], &[1], &[])
}

/// `I(A ; B | C)` for disjoint, nonempty axis groups `a`, `b` and a possibly empty group `c`.
pub fn conditional_mutual_information(
    joint: &JointDistribution,
    a: &[usize],
    b: &[usize],
    c: &[usize],
) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::AxisNaming("empty argument group".into()));
    }
    let all: Vec<usize> = a.iter().chain(b).chain(c).copied().collect();
    for (i, &ax) in all.iter().enumerate() {
        if ax >= joint.rank() || all[..i].contains(&ax) {
            return Err(Error::AxisNaming(format!(
                "axis {ax} repeated or out of range for rank {}",
                joint.rank()
            )));
        }
    }
    let h = |axes: Vec<usize>| -> Result<f64> {
        if axes.is_empty() {
            return Ok(0.0);
        }
        Ok(entropy_slice(joint.marginal(&axes)?.probs()))
    };
    let ac: Vec<usize> = a.iter().chain(c).copied().collect();
    let bc: Vec<usize> = b.iter().chain(c).copied().collect();
    let i = h(ac)? + h(bc)? - h(all)? - h(c.to_vec())?;
    Ok(i.max(0.0))
}

pub fn l1_distance(p: &JointDistribution, q: &JointDistribution) -> Result<f64> {
    if p.shape() != q.shape() {
        return Err(Error::ShapeMismatch {
            left: p.shape().to_vec(),
            right: q.shape().to_vec(),
        });
    }
    Ok(p.probs()
        .iter()
        .zip(q.probs())
        .map(|(a, b)| (a - b).abs())
        .sum())
}

pub fn empirical_type(seq: &[usize], alphabet: usize) -> Result<EmpiricalType> {
    if seq.is_empty() {
        return Err(Error::EmptySequence);
    }
    let mut counts = vec![0; alphabet];
    for (position, &s) in seq.iter().enumerate() {
        if s >= alphabet {
            return Err(Error::SymbolOutOfRange {
                symbol: s,
                position,
                size: alphabet,
            });
        }
        counts[s] += 1;
    }
    EmpiricalType::from_counts(vec![alphabet], counts)
}

pub fn joint_type(x: &[usize], y: &[usize], x_size: usize, y_size: usize) -> Result<EmpiricalType> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    if x.is_empty() {
        return Err(Error::EmptySequence);
    }
    let mut counts = vec![0; x_size * y_size];
    for (position, (&a, &b)) in x.iter().zip(y).enumerate() {
        if a >= x_size {
            return Err(Error::SymbolOutOfRange {
                symbol: a,
                position,
                size: x_size,
            });
        }
        if b >= y_size {
            return Err(Error::SymbolOutOfRange {
                symbol: b,
                position,
                size: y_size,
            });
        }
        counts[a * y_size + b] += 1;
    }
    EmpiricalType::from_counts(vec![x_size, y_size], counts)
}

/// All count vectors of length `k` summing to `n`, in decreasing lexicographic order.
pub fn enumerate_types(n: usize, k: usize) -> Vec<EmpiricalType> {
    let mut out = Vec::new();
    if n == 0 || k == 0 {
        return out;
    }
    let mut counts = vec![0usize; k];
    fn rec(pos: usize, left: usize, counts: &mut [usize], out: &mut Vec<EmpiricalType>, n: usize) {
        let k = counts.len();
        if pos == k - 1 {
            counts[pos] = left;
            out.push(EmpiricalType {
                shape: vec![k],
                counts: counts.to_vec(),
                n,
            });
            return;
        }
        for c in (0..=left).rev() {
            counts[pos] = c;
            rec(pos + 1, left - c, counts, out, n);
        }
    }
    rec(0, n, &mut counts, &mut out, n);
    out
}

/// Reshapes a flat type over `|X||Y|` cells into a two-axis joint type.
pub fn enumerate_joint_types(n: usize, x_size: usize, y_size: usize) -> Vec<EmpiricalType> {
    enumerate_types(n, x_size * y_size)
        .into_iter()
        .map(|t| EmpiricalType {
            shape: vec![x_size, y_size],
            counts: t.counts,
            n,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(v: &[f64]) -> Distribution {
        Distribution::new(v.to_vec()).unwrap()
    }

    #[test]
    fn entropy_examples() {
        assert_eq!(entropy(&d(&[1.0, 0.0])), 0.0);
        assert!((entropy(&Distribution::uniform(4).unwrap()) - 2.0).abs() < 1e-15);
        // -(2 * 0.25 * log2 0.25 + 0.5 * log2 0.5) = 1 + 0.5
        assert!((entropy(&d(&[0.25, 0.5, 0.25])) - 1.5).abs() < 1e-15);
    }

    #[test]
    fn kl_examples() {
        let p = d(&[0.3, 0.7]);
        assert_eq!(kl_divergence(&p, &p).unwrap(), 0.0);
        assert!((kl_divergence(&d(&[1.0, 0.0]), &d(&[0.5, 0.5])).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(
            kl_divergence(&d(&[0.5, 0.5]), &d(&[1.0, 0.0])).unwrap(),
            f64::INFINITY
        );
        assert!(matches!(
            kl_divergence(&d(&[1.0]), &d(&[0.5, 0.5])),
            Err(Error::AlphabetMismatch { .. })
        ));
    }

    #[test]
    fn construction_tolerance() {
        let p = Distribution::new(vec![0.5, 0.5 + 1e-10]).unwrap();
        assert!((p.probs().iter().sum::<f64>() - 1.0).abs() < SIMPLEX_TOL);
        assert!(matches!(
            Distribution::new(vec![0.5, 0.3]),
            Err(Error::NotNormalized { .. })
        ));
        assert!(matches!(
            Distribution::new(vec![1.5, -0.5]),
            Err(Error::NegativeEntry { index: 1, .. })
        ));
    }

    #[test]
    fn conditional_kl_examples() {
        let v = StochasticMatrix::from_rows(vec![vec![0.9, 0.1], vec![0.2, 0.8]]).unwrap();
        let w = StochasticMatrix::from_rows(vec![vec![0.5, 0.5], vec![0.6, 0.4]]).unwrap();
        assert_eq!(conditional_kl(&v, &v, &d(&[0.5, 0.5])).unwrap(), 0.0);
        let d0 = kl_divergence(v.row(0), w.row(0)).unwrap();
        let d1 = kl_divergence(v.row(1), w.row(1)).unwrap();
        assert!((conditional_kl(&v, &w, &d(&[1.0, 0.0])).unwrap() - d0).abs() < 1e-15);
        assert!((conditional_kl(&v, &w, &d(&[0.5, 0.5])).unwrap() - 0.5 * (d0 + d1)).abs() < 1e-15);
        // an infinite row divergence is masked by zero input weight
        let hard = StochasticMatrix::from_rows(vec![vec![0.5, 0.5], vec![1.0, 0.0]]).unwrap();
        let tgt = StochasticMatrix::from_rows(vec![vec![0.5, 0.5], vec![0.0, 1.0]]).unwrap();
        assert_eq!(conditional_kl(&hard, &tgt, &d(&[1.0, 0.0])).unwrap(), 0.0);
        assert_eq!(
            conditional_kl(&hard, &tgt, &d(&[0.5, 0.5])).unwrap(),
            f64::INFINITY
        );
    }

    #[test]
    fn mutual_information_examples() {
        let prod = JointDistribution::product(&d(&[0.3, 0.7]), &d(&[0.6, 0.4]));
        assert!(mutual_information(&prod).unwrap().abs() < 1e-15);
        let diag = JointDistribution::from_matrix(&[vec![0.5, 0.0], vec![0.0, 0.5]]).unwrap();
        assert!((mutual_information(&diag).unwrap() - 1.0).abs() < 1e-15);
        // brute force: sum p log2 (p / (px py)) with px = py = 0.5
        let pxy = JointDistribution::from_matrix(&[vec![0.4, 0.1], vec![0.1, 0.4]]).unwrap();
        let oracle = 2.0 * 0.4 * (0.4f64 / 0.25).log2() + 2.0 * 0.1 * (0.1f64 / 0.25).log2();
        assert!((mutual_information(&pxy).unwrap() - oracle).abs() < 1e-14);
        assert!((oracle - 0.278_071_905_112_638_1).abs() < 1e-15);
    }

    #[test]
    fn cmi_examples() {
        // single-symbol conditioner reduces to plain mutual information
        let j = JointDistribution::new(vec![1, 2, 2], vec![0.4, 0.1, 0.1, 0.4]).unwrap();
        let plain = JointDistribution::from_matrix(&[vec![0.4, 0.1], vec![0.1, 0.4]]).unwrap();
        let cmi = conditional_mutual_information(&j, &[1], &[2], &[0]).unwrap();
        assert!((cmi - mutual_information(&plain).unwrap()).abs() < 1e-15);

        // per-slice oracle on a fixed 2x2x2 joint (axes a, b, c)
        let raw = [0.05, 0.15, 0.20, 0.02, 0.10, 0.08, 0.12, 0.28];
        let j = JointDistribution::new(vec![2, 2, 2], raw.to_vec()).unwrap();
        let mut oracle = 0.0;
        for c in 0..2 {
            let slice: Vec<f64> = (0..4).map(|ab| raw[ab * 2 + c]).collect();
            let pc: f64 = slice.iter().sum();
            let cond =
                JointDistribution::new(vec![2, 2], slice.iter().map(|v| v / pc).collect()).unwrap();
            oracle += pc * mutual_information(&cond).unwrap();
        }
        let got = conditional_mutual_information(&j, &[0], &[1], &[2]).unwrap();
        assert!((got - oracle).abs() < 1e-14, "{got} vs {oracle}");

        assert!(matches!(
            conditional_mutual_information(&j, &[0], &[0], &[2]),
            Err(Error::AxisNaming(_))
        ));
        assert!(matches!(
            conditional_mutual_information(&j, &[0], &[1], &[3]),
            Err(Error::AxisNaming(_))
        ));
    }

    #[test]
    fn l1_examples() {
        let p: JointDistribution = d(&[0.6, 0.4]).into();
        let q: JointDistribution = d(&[0.5, 0.5]).into();
        assert!((l1_distance(&p, &q).unwrap() - 0.2).abs() < 1e-15);
        assert_eq!(l1_distance(&p, &p).unwrap(), 0.0);
        let a: JointDistribution = d(&[1.0, 0.0]).into();
        let b: JointDistribution = d(&[0.0, 1.0]).into();
        assert_eq!(l1_distance(&a, &b).unwrap(), 2.0);
    }

    #[test]
    fn type_examples() {
        let t = empirical_type(&[0, 1, 1, 0], 2).unwrap();
        assert_eq!(t.counts(), &[2, 2]);
        assert_eq!(t.to_distribution().probs(), &[0.5, 0.5]);
        assert_eq!(empirical_type(&[2, 2, 2], 3).unwrap().counts(), &[0, 0, 3]);
        let s = [0, 2, 1, 1, 0];
        let doubled: Vec<usize> = s.iter().chain(&s).copied().collect();
        assert_eq!(
            empirical_type(&s, 3).unwrap().to_distribution(),
            empirical_type(&doubled, 3).unwrap().to_distribution()
        );
        assert!(matches!(
            empirical_type(&[0, 3], 2),
            Err(Error::SymbolOutOfRange {
                symbol: 3,
                position: 1,
                size: 2
            })
        ));

        let jt = joint_type(&[0, 1], &[0, 1], 2, 2).unwrap();
        assert_eq!(jt.to_joint().probs(), &[0.5, 0.0, 0.0, 0.5]);
        let jt = joint_type(&[0, 1, 1, 1], &[1, 1, 1, 1], 2, 2).unwrap();
        assert_eq!(jt.to_joint().probs(), &[0.0, 0.25, 0.0, 0.75]);
        assert!(matches!(
            joint_type(&[0], &[0, 1], 2, 2),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn enumerate_examples() {
        let t: Vec<Vec<usize>> = enumerate_types(2, 2)
            .iter()
            .map(|t| t.counts().to_vec())
            .collect();
        assert_eq!(t, vec![vec![2, 0], vec![1, 1], vec![0, 2]]);
        assert_eq!(enumerate_types(1, 5).len(), 5);
        let t = enumerate_types(4, 3);
        assert_eq!(t.len(), 15);
        assert!(15 <= 5usize.pow(3));
    }
}
