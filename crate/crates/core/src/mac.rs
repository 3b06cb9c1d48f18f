//! The two-user channel `W(z|x,y)`, its n-fold extension, time-sharing
//! decompositions, and the per-letter information quantities that bound rates.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::prob::{
    entropy_slice, kl_slice, Distribution, JointDistribution, StochasticMatrix, RENORM_TOL,
};

/// Largest time-sharing alphabet considered anywhere in the crate.
pub const MAX_TIME_SHARING: usize = 4;

/// A discrete memoryless multiple-access channel. `w[(x * |Y| + y) * |Z| + z] = W(z|x,y)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mac {
    x_size: usize,
    y_size: usize,
    z_size: usize,
    w: Vec<f64>,
}

impl Mac {
    /// Validates a nested `w[x][y][z]` tensor. Rows within `1e-9` of the simplex are renormalized.
    pub fn new(w: &[Vec<Vec<f64>>]) -> Result<Self> {
        let x_size = w.len();
        let y_size = w.first().map(Vec::len).unwrap_or(0);
        let z_size = w.first().and_then(|r| r.first()).map(Vec::len).unwrap_or(0);
        if x_size == 0 || y_size == 0 || z_size == 0 {
            return Err(Error::EmptyAlphabet);
        }
        let mut flat = Vec::with_capacity(x_size * y_size * z_size);
        for (x, plane) in w.iter().enumerate() {
            if plane.len() != y_size {
                return Err(Error::Parse {
                    path: format!("w[{x}]"),
                    message: format!("expected {y_size} rows, found {}", plane.len()),
                });
            }
            for (y, row) in plane.iter().enumerate() {
                if row.len() != z_size {
                    return Err(Error::Parse {
                        path: format!("w[{x}][{y}]"),
                        message: format!("expected {z_size} entries, found {}", row.len()),
                    });
                }
                flat.extend_from_slice(row);
            }
        }
        Self::from_flat(x_size, y_size, z_size, flat)
    }

    pub fn from_flat(x_size: usize, y_size: usize, z_size: usize, mut w: Vec<f64>) -> Result<Self> {
        if x_size == 0 || y_size == 0 || z_size == 0 {
            return Err(Error::EmptyAlphabet);
        }
        if w.len() != x_size * y_size * z_size {
            return Err(Error::ShapeMismatch {
                left: vec![x_size, y_size, z_size],
                right: vec![w.len()],
            });
        }
        for (i, row) in w.chunks_mut(z_size).enumerate() {
            let (x, y) = (i / y_size, i % y_size);
            for (z, &v) in row.iter().enumerate() {
                if !v.is_finite() || v < 0.0 {
                    return Err(Error::Parse {
                        path: format!("w[{x}][{y}][{z}]"),
                        message: format!("entry {v} is not a nonnegative number"),
                    });
                }
            }
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > RENORM_TOL {
                return Err(Error::Parse {
                    path: format!("w[{x}][{y}]"),
                    message: format!("row sums to {s}, expected 1"),
                });
            }
            row.iter_mut().for_each(|v| *v /= s);
        }
        Ok(Self {
            x_size,
            y_size,
            z_size,
            w,
        })
    }

    /// Builds a channel from a deterministic map `z = f(x, y)`.
    pub fn deterministic(
        x_size: usize,
        y_size: usize,
        z_size: usize,
        f: impl Fn(usize, usize) -> usize,
    ) -> Result<Self> {
        let mut w = vec![0.0; x_size * y_size * z_size];
        for x in 0..x_size {
            for y in 0..y_size {
                let z = f(x, y);
                if z >= z_size {
                    return Err(Error::SymbolOutOfRange {
                        symbol: z,
                        position: x * y_size + y,
                        size: z_size,
                    });
                }
                w[(x * y_size + y) * z_size + z] = 1.0;
            }
        }
        Self::from_flat(x_size, y_size, z_size, w)
    }

    /// Parses the channel file format: `{"x_size", "y_size", "z_size", "w": [[[..]]]}`.
    pub fn from_json_str(s: &str) -> Result<Self> {
        let v: Value = serde_json::from_str(s).map_err(|e| Error::Parse {
            path: "$".into(),
            message: e.to_string(),
        })?;
        Self::from_json_value(&v)
    }

    pub fn from_json_value(v: &Value) -> Result<Self> {
        let obj = v.as_object().ok_or_else(|| Error::Parse {
            path: "$".into(),
            message: "expected an object".into(),
        })?;
        let size = |key: &str| -> Result<usize> {
            obj.get(key)
                .and_then(Value::as_u64)
                .filter(|&n| n > 0)
                .map(|n| n as usize)
                .ok_or_else(|| Error::Parse {
                    path: key.into(),
                    message: "expected a positive integer".into(),
                })
        };
        let (xs, ys, zs) = (size("x_size")?, size("y_size")?, size("z_size")?);
        let w = obj.get("w").ok_or_else(|| Error::Parse {
            path: "w".into(),
            message: "missing field".into(),
        })?;
        let planes = expect_array(w, "w", xs)?;
        let mut flat = Vec::with_capacity(xs * ys * zs);
        for (x, plane) in planes.iter().enumerate() {
            let rows = expect_array(plane, &format!("w[{x}]"), ys)?;
            for (y, row) in rows.iter().enumerate() {
                let entries = expect_array(row, &format!("w[{x}][{y}]"), zs)?;
                for (z, e) in entries.iter().enumerate() {
                    flat.push(e.as_f64().ok_or_else(|| Error::Parse {
                        path: format!("w[{x}][{y}][{z}]"),
                        message: "expected a number".into(),
                    })?);
                }
            }
        }
        Self::from_flat(xs, ys, zs, flat)
    }

    pub fn to_json_value(&self) -> Value {
        serde_json::json!({
            "x_size": self.x_size,
            "y_size": self.y_size,
            "z_size": self.z_size,
            "w": self.nested(),
        })
    }

    pub fn nested(&self) -> Vec<Vec<Vec<f64>>> {
        (0..self.x_size)
            .map(|x| (0..self.y_size).map(|y| self.row(x, y).to_vec()).collect())
            .collect()
    }

    pub fn x_size(&self) -> usize {
        self.x_size
    }

    pub fn y_size(&self) -> usize {
        self.y_size
    }

    pub fn z_size(&self) -> usize {
        self.z_size
    }

    /// Number of input pairs `|X||Y|`.
    pub fn pairs(&self) -> usize {
        self.x_size * self.y_size
    }

    #[inline]
    pub fn row(&self, x: usize, y: usize) -> &[f64] {
        let o = (x * self.y_size + y) * self.z_size;
        &self.w[o..o + self.z_size]
    }

    #[inline]
    pub fn prob(&self, z: usize, x: usize, y: usize) -> f64 {
        self.w[(x * self.y_size + y) * self.z_size + z]
    }

    pub fn flat(&self) -> &[f64] {
        &self.w
    }

    /// The channel viewed as a stochastic matrix from pairs `(x, y)` to `Z`.
    pub fn as_matrix(&self) -> StochasticMatrix {
        StochasticMatrix::from_rows(self.w.chunks(self.z_size).map(<[f64]>::to_vec).collect())
            .expect("validated rows")
    }

    pub fn same_shape(&self, other: &Mac) -> bool {
        self.x_size == other.x_size && self.y_size == other.y_size && self.z_size == other.z_size
    }

    /// True if every input slice is the same output distribution.
    pub fn is_input_independent(&self) -> bool {
        let first = self.row(0, 0);
        self.w
            .chunks(self.z_size)
            .all(|r| r.iter().zip(first).all(|(a, b)| (a - b).abs() <= 1e-15))
    }
}

fn expect_array<'a>(v: &'a Value, path: &str, len: usize) -> Result<&'a Vec<Value>> {
    let a = v.as_array().ok_or_else(|| Error::Parse {
        path: path.into(),
        message: "expected an array".into(),
    })?;
    if a.len() != len {
        return Err(Error::Parse {
            path: path.into(),
            message: format!("expected {len} entries, found {}", a.len()),
        });
    }
    Ok(a)
}

/// Validates a raw nested tensor into a channel.
pub fn validate_mac(raw: &[Vec<Vec<f64>>]) -> Result<Mac> {
    Mac::new(raw)
}

/// `W^n(z|x,y) = prod_i W(z_i|x_i,y_i)`.
pub fn product_channel_prob(w: &Mac, x: &[usize], y: &[usize], z: &[usize]) -> Result<f64> {
    if x.len() != y.len() || x.len() != z.len() {
        return Err(Error::LengthMismatch {
            left: x.len(),
            right: if x.len() != y.len() { y.len() } else { z.len() },
        });
    }
    if x.is_empty() {
        return Err(Error::EmptySequence);
    }
    let mut p = 1.0;
    for (position, ((&a, &b), &c)) in x.iter().zip(y).zip(z).enumerate() {
        for (symbol, size) in [(a, w.x_size), (b, w.y_size), (c, w.z_size)] {
            if symbol >= size {
                return Err(Error::SymbolOutOfRange {
                    symbol,
                    position,
                    size,
                });
            }
        }
        p *= w.prob(c, a, b);
    }
    Ok(p)
}

/// A pair of per-user rates in bits per channel use.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatePair {
    pub r1: f64,
    pub r2: f64,
}

impl RatePair {
    pub fn new(r1: f64, r2: f64) -> Result<Self> {
        if !(r1.is_finite() && r2.is_finite()) || r1 < 0.0 || r2 < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "rates must be finite and nonnegative, got ({r1}, {r2})"
            )));
        }
        Ok(Self { r1, r2 })
    }

    pub fn sum(&self) -> f64 {
        self.r1 + self.r2
    }

    /// Right-hand sides of the three pentagon inequalities after subtracting a slack `eps`.
    pub(crate) fn thresholds(&self, eps: f64) -> [f64; 3] {
        [self.r1 - eps, self.r2 - eps, self.r1 + self.r2 - eps]
    }
}

/// `(I(X;Z|Y,Q), I(Y;Z|X,Q), I(XY;Z|Q))` in bits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PentagonRates {
    pub i1: f64,
    pub i2: f64,
    pub i12: f64,
}

impl PentagonRates {
    pub fn as_array(&self) -> [f64; 3] {
        [self.i1, self.i2, self.i12]
    }

    /// `min(i1 + eps - r1, i2 + eps - r2, i12 + eps - r1 - r2)`.
    pub fn slack(&self, r: &RatePair, eps: f64) -> f64 {
        let c = r.thresholds(eps);
        (self.i1 - c[0]).min(self.i2 - c[1]).min(self.i12 - c[2])
    }
}

/// Time-sharing structure `p(q) p(x|q) p(y|q)` with at most four components.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSharingDecomposition {
    pub q_weights: Distribution,
    pub px_given_q: StochasticMatrix,
    pub py_given_q: StochasticMatrix,
}

impl TimeSharingDecomposition {
    pub fn new(
        q_weights: Distribution,
        px_given_q: StochasticMatrix,
        py_given_q: StochasticMatrix,
    ) -> Result<Self> {
        let q = q_weights.len();
        if q > MAX_TIME_SHARING {
            return Err(Error::InvalidParameter(format!(
                "time-sharing alphabet of size {q} exceeds {MAX_TIME_SHARING}"
            )));
        }
        for m in [&px_given_q, &py_given_q] {
            if m.inputs() != q {
                return Err(Error::AlphabetMismatch {
                    left: q,
                    right: m.inputs(),
                });
            }
        }
        Ok(Self {
            q_weights,
            px_given_q,
            py_given_q,
        })
    }

    /// Single-component decomposition `p(x) p(y)`.
    pub fn product(px: &Distribution, py: &Distribution) -> Self {
        Self {
            q_weights: Distribution::point_mass(1, 0).expect("size 1"),
            px_given_q: StochasticMatrix::new(vec![px.clone()]).expect("one row"),
            py_given_q: StochasticMatrix::new(vec![py.clone()]).expect("one row"),
        }
    }

    /// For binary inputs: `Q = (X, Y)` with point-mass conditionals, weighted by `p` itself.
    pub fn point_masses(p: &JointDistribution) -> Result<Self> {
        if p.shape() != [2, 2] {
            return Err(Error::ShapeMismatch {
                left: p.shape().to_vec(),
                right: vec![2, 2],
            });
        }
        let mut px = Vec::new();
        let mut py = Vec::new();
        for x in 0..2 {
            for y in 0..2 {
                px.push(Distribution::point_mass(2, x)?);
                py.push(Distribution::point_mass(2, y)?);
            }
        }
        Self::new(
            Distribution::new(p.probs().to_vec())?,
            StochasticMatrix::new(px)?,
            StochasticMatrix::new(py)?,
        )
    }

    pub fn components(&self) -> usize {
        self.q_weights.len()
    }

    pub fn x_size(&self) -> usize {
        self.px_given_q.outputs()
    }

    pub fn y_size(&self) -> usize {
        self.py_given_q.outputs()
    }
}

/// `sum_q p(q) p(x|q) p(y|q)` as a joint on `X x Y`.
pub fn decomposition_marginal(d: &TimeSharingDecomposition) -> JointDistribution {
    let (xs, ys) = (d.x_size(), d.y_size());
    let mut out = vec![0.0; xs * ys];
    for q in 0..d.components() {
        let wq = d.q_weights.get(q);
        let a = d.px_given_q.row(q).probs();
        let b = d.py_given_q.row(q).probs();
        for x in 0..xs {
            for y in 0..ys {
                out[x * ys + y] += wq * a[x] * b[y];
            }
        }
    }
    JointDistribution::new(vec![xs, ys], out).expect("mixture of product distributions")
}

/// Row entropies `H(V(.|x,y))`, cached per channel for repeated rate evaluations.
pub(crate) fn row_entropies(v: &Mac) -> Vec<f64> {
    v.flat().chunks(v.z_size()).map(entropy_slice).collect()
}

/// Pentagon informations for a single product input `a x b` (one time-sharing component).
pub(crate) fn point_rates(
    v: &Mac,
    hrow: &[f64],
    a: &[f64],
    b: &[f64],
    scratch: &mut Vec<f64>,
) -> [f64; 3] {
    let (xs, ys, zs) = (v.x_size, v.y_size, v.z_size);
    scratch.clear();
    scratch.resize(zs, 0.0);
    let mut hcond = 0.0;
    for x in 0..xs {
        for y in 0..ys {
            hcond += a[x] * b[y] * hrow[x * ys + y];
        }
    }
    // H(Z|Y): mix over x for each y
    let mut h_zy = 0.0;
    for y in 0..ys {
        if b[y] <= 0.0 {
            continue;
        }
        scratch.iter_mut().for_each(|s| *s = 0.0);
        for x in 0..xs {
            if a[x] > 0.0 {
                for (s, &w) in scratch.iter_mut().zip(v.row(x, y)) {
                    *s += a[x] * w;
                }
            }
        }
        h_zy += b[y] * entropy_slice(scratch);
    }
    let mut h_zx = 0.0;
    for x in 0..xs {
        if a[x] <= 0.0 {
            continue;
        }
        scratch.iter_mut().for_each(|s| *s = 0.0);
        for y in 0..ys {
            if b[y] > 0.0 {
                for (s, &w) in scratch.iter_mut().zip(v.row(x, y)) {
                    *s += b[y] * w;
                }
            }
        }
        h_zx += a[x] * entropy_slice(scratch);
    }
    scratch.iter_mut().for_each(|s| *s = 0.0);
    for x in 0..xs {
        for y in 0..ys {
            let ab = a[x] * b[y];
            if ab > 0.0 {
                for (s, &w) in scratch.iter_mut().zip(v.row(x, y)) {
                    *s += ab * w;
                }
            }
        }
    }
    let h_z = entropy_slice(scratch);
    [
        (h_zy - hcond).max(0.0),
        (h_zx - hcond).max(0.0),
        (h_z - hcond).max(0.0),
    ]
}

/// Pentagon informations under `p(q) p(x|q) p(y|q) v(z|x,y)`.
pub fn pentagon_rates(v: &Mac, d: &TimeSharingDecomposition) -> Result<PentagonRates> {
    if d.x_size() != v.x_size {
        return Err(Error::AlphabetMismatch {
            left: v.x_size,
            right: d.x_size(),
        });
    }
    if d.y_size() != v.y_size {
        return Err(Error::AlphabetMismatch {
            left: v.y_size,
            right: d.y_size(),
        });
    }
    let hrow = row_entropies(v);
    let mut scratch = Vec::new();
    let mut acc = [0.0; 3];
    for q in 0..d.components() {
        let wq = d.q_weights.get(q);
        if wq <= 0.0 {
            continue;
        }
        let g = point_rates(
            v,
            &hrow,
            d.px_given_q.row(q).probs(),
            d.py_given_q.row(q).probs(),
            &mut scratch,
        );
        for k in 0..3 {
            acc[k] += wq * g[k];
        }
    }
    Ok(PentagonRates {
        i1: acc[0],
        i2: acc[1],
        i12: acc[2],
    })
}

/// `(I(X;Z|Y), I(Y;Z|X), I(XY;Z))` under `P_XY x V` with no auxiliary variable.
pub fn joint_rates(v: &Mac, p: &JointDistribution) -> Result<PentagonRates> {
    check_input_shape(v, p)?;
    let (xs, ys, zs) = (v.x_size, v.y_size, v.z_size);
    let pr = p.probs();
    let hrow = row_entropies(v);
    let hcond: f64 = pr.iter().zip(&hrow).map(|(a, b)| a * b).sum();
    let mut mix = vec![0.0; zs];
    let mut h_zy = 0.0;
    for y in 0..ys {
        let py: f64 = (0..xs).map(|x| pr[x * ys + y]).sum();
        if py <= 0.0 {
            continue;
        }
        mix.iter_mut().for_each(|m| *m = 0.0);
        for x in 0..xs {
            let pxy = pr[x * ys + y];
            for (m, &w) in mix.iter_mut().zip(v.row(x, y)) {
                *m += pxy / py * w;
            }
        }
        h_zy += py * entropy_slice(&mix);
    }
    let mut h_zx = 0.0;
    for x in 0..xs {
        let px: f64 = (0..ys).map(|y| pr[x * ys + y]).sum();
        if px <= 0.0 {
            continue;
        }
        mix.iter_mut().for_each(|m| *m = 0.0);
        for y in 0..ys {
            let pxy = pr[x * ys + y];
            for (m, &w) in mix.iter_mut().zip(v.row(x, y)) {
                *m += pxy / px * w;
            }
        }
        h_zx += px * entropy_slice(&mix);
    }
    mix.iter_mut().for_each(|m| *m = 0.0);
    for (i, &pxy) in pr.iter().enumerate() {
        for (m, &w) in mix.iter_mut().zip(&v.w[i * zs..(i + 1) * zs]) {
            *m += pxy * w;
        }
    }
    let h_z = entropy_slice(&mix);
    Ok(PentagonRates {
        i1: (h_zy - hcond).max(0.0),
        i2: (h_zx - hcond).max(0.0),
        i12: (h_z - hcond).max(0.0),
    })
}

/// True iff at least one of `I(X;Z|Y) <= r1`, `I(Y;Z|X) <= r2`, `I(XY;Z) <= r1 + r2` holds under `P x V`.
pub fn haroutunian_feasible(v: &Mac, p: &JointDistribution, r: &RatePair) -> Result<bool> {
    let i = joint_rates(v, p)?;
    Ok(i.i1 <= r.r1 || i.i2 <= r.r2 || i.i12 <= r.sum())
}

/// `D(V||W|P)` for two channels of the same shape.
pub fn channel_divergence(v: &Mac, w: &Mac, p: &JointDistribution) -> Result<f64> {
    if !v.same_shape(w) {
        return Err(Error::ShapeMismatch {
            left: vec![v.x_size, v.y_size, v.z_size],
            right: vec![w.x_size, w.y_size, w.z_size],
        });
    }
    check_input_shape(v, p)?;
    Ok(divergence_flat(v.flat(), w.flat(), p.probs(), v.z_size))
}

#[inline]
pub(crate) fn divergence_flat(v: &[f64], w: &[f64], p: &[f64], zs: usize) -> f64 {
    let mut d = 0.0;
    for (i, &pi) in p.iter().enumerate() {
        if pi > 0.0 {
            d += pi * kl_slice(&v[i * zs..(i + 1) * zs], &w[i * zs..(i + 1) * zs]);
        }
    }
    d
}

pub(crate) fn check_input_shape(v: &Mac, p: &JointDistribution) -> Result<()> {
    if p.shape() != [v.x_size, v.y_size] {
        return Err(Error::ShapeMismatch {
            left: vec![v.x_size, v.y_size],
            right: p.shape().to_vec(),
        });
    }
    Ok(())
}

/// Configurable rate slack `eps_n` of the finite-length region.
///
/// The default reconstructs the explicit constants of the strong-converse chain:
/// a `3/(1-lambda')` Augustin term per user, the wringing cost of `k` conditioned
/// letters, and the type-counting and dominant-type losses, all normalized by `n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SlackModel {
    /// `eps_n = 0` for every `n`.
    Zero,
    /// A fixed slack independent of `n`.
    Constant(f64),
    /// The explicit chain with maximal error level `lambda` and the wringing count capped at `k_cap`
    /// (`None` uses the cap `2 sigma / delta` with `delta = n^{-1/2}`).
    Converse { lambda: f64, k_cap: Option<f64> },
}

impl Default for SlackModel {
    fn default() -> Self {
        SlackModel::Converse {
            lambda: 0.0,
            k_cap: None,
        }
    }
}

impl SlackModel {
    pub fn eps(&self, n: usize, x_size: usize, y_size: usize) -> f64 {
        match *self {
            SlackModel::Zero => 0.0,
            SlackModel::Constant(c) => c,
            SlackModel::Converse { lambda, k_cap } => {
                let nf = n.max(1) as f64;
                let xy = (x_size * y_size) as f64;
                let lam_prime = (1.0 + lambda) / 2.0;
                let lam_star = 2.0 * lambda / (1.0 + lambda);
                let sigma = dependence_bound(lambda, n, x_size, y_size);
                let delta = nf.powf(-0.5);
                let cap = 2.0 * sigma / delta;
                let k = k_cap.map_or(cap, |c| c.min(cap));
                let width = (x_size.max(y_size) as f64).max(xy);
                let augustin = 3.0 / (1.0 - lam_prime) * width * nf.powf(-0.5);
                let wringing = if k > 0.0 {
                    k / nf * (2.0 * sigma * xy * nf.sqrt()).log2()
                } else {
                    0.0
                };
                let counting = (xy * (nf + 1.0).log2() + nf.log2() - (1.0 - lam_star).log2()) / nf;
                augustin + wringing + counting
            }
        }
    }
}

/// `-log2(1 - 2 lambda / (1 + lambda)) + |X||Y| log2(n + 1)`: the mutual-information
/// ceiling for the uniform distribution on a dominant subcode.
pub fn dependence_bound(lambda: f64, n: usize, x_size: usize, y_size: usize) -> f64 {
    let lam_star = 2.0 * lambda / (1.0 + lambda);
    -(1.0 - lam_star).log2() + (x_size * y_size) as f64 * ((n + 1) as f64).log2()
}
