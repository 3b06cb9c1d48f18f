//! Result types shared by the exponent solvers and the grid oracle.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mac::{channel_divergence, check_input_shape, Mac, RatePair, SlackModel};
use crate::prob::JointDistribution;
use crate::region::{capacity_membership_with, region_membership};
use crate::search::{simplex_lattice, SearchOptions};
use crate::sphere::SpherePacking;
use crate::tilt::{RateFunctional, Tilt};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Haroutunian,
    SpherePacking,
    GridOracle,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Haroutunian => "haroutunian",
            Method::SpherePacking => "sphere_packing",
            Method::GridOracle => "grid_oracle",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "haroutunian" | "h" => Ok(Method::Haroutunian),
            "sphere_packing" | "sphere-packing" | "sp" => Ok(Method::SpherePacking),
            "grid_oracle" | "grid-oracle" | "oracle" => Ok(Method::GridOracle),
            other => Err(Error::InvalidParameter(format!("unknown method `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    /// Outer input distributions evaluated.
    pub outer_evaluations: usize,
    /// Inner solver iterations (alternating-minimization sweeps, or grid channels visited).
    pub inner_iterations: usize,
    /// Region-membership searches or decomposition programs run.
    pub membership_calls: usize,
    /// Best decomposition slack of the rate pair under the witness (negative means outside).
    pub best_slack: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExponentResult {
    /// Exponent in bits; may be `+inf` when no test channel of finite divergence is feasible.
    pub value: f64,
    pub witness_p: JointDistribution,
    pub witness_v: Mac,
    pub method: Method,
    /// The exponent the grid oracle evaluated (equal to `method` for the solvers).
    pub target: Method,
    pub converged: bool,
    pub diagnostics: Diagnostics,
}

impl ExponentResult {
    /// `|D(witness_v || w | witness_p) - value|`, zero when both are infinite.
    pub fn witness_error(&self, w: &Mac) -> Result<f64> {
        let d = channel_divergence(&self.witness_v, w, &self.witness_p)?;
        if d.is_infinite() && self.value.is_infinite() {
            return Ok(0.0);
        }
        Ok((d - self.value).abs())
    }
}

/// Inner minimum at one input distribution.
#[derive(Debug, Clone)]
pub(crate) struct Inner {
    pub value: f64,
    pub v: Vec<f64>,
    pub converged: bool,
    /// Decomposition slack of the rate pair under `v` (Haroutunian: slack of the single pentagon).
    pub slack: f64,
    pub work: usize,
    /// `value` is only an upper bound, known to lie at or below the caller's floor.
    pub bounded: bool,
    /// Separating direction of the sphere-packing solution.
    pub lambda: Option<[f64; 3]>,
}

impl Inner {
    pub(crate) fn zero(w: &Mac, slack: f64) -> Self {
        Self {
            value: 0.0,
            v: w.flat().to_vec(),
            converged: true,
            slack,
            work: 0,
            bounded: false,
            lambda: None,
        }
    }

    /// Prefers the smaller value, then the lexicographically smaller channel.
    pub(crate) fn better_than(&self, other: &Inner) -> bool {
        match self.value.total_cmp(&other.value) {
            std::cmp::Ordering::Less => true,
            std::cmp::Ordering::Greater => false,
            std::cmp::Ordering::Equal => lex_less(&self.v, &other.v),
        }
    }
}

pub(crate) fn lex_less(a: &[f64], b: &[f64]) -> bool {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            std::cmp::Ordering::Less => return true,
            std::cmp::Ordering::Greater => return false,
            std::cmp::Ordering::Equal => {}
        }
    }
    false
}

/// Pairs of rows that must coincide for the `k`-th information to vanish under input support `p`.
///
/// `k = 0`: rows sharing `y`; `k = 1`: rows sharing `x`; `k = 2`: all rows. With `rectangles`,
/// two rows are only joined when the product support they span lies inside the support of `p`
/// (the structure a time-sharing decomposition of `p` can use).
pub(crate) fn vanishing_links(
    p: &[f64],
    xs: usize,
    ys: usize,
    k: usize,
    rectangles: bool,
) -> Vec<(usize, usize)> {
    let mut links = Vec::new();
    let on = |x: usize, y: usize| p[x * ys + y] > 0.0;
    for x in 0..xs {
        for y in 0..ys {
            if !on(x, y) {
                continue;
            }
            for x2 in 0..xs {
                for y2 in 0..ys {
                    if (x2, y2) <= (x, y) || !on(x2, y2) {
                        continue;
                    }
                    let joined = match k {
                        0 => y2 == y,
                        1 => x2 == x,
                        _ => !rectangles || (on(x, y2) && on(x2, y)),
                    };
                    if joined {
                        links.push((x * ys + y, x2 * ys + y2));
                    }
                }
            }
        }
    }
    links
}

/// `min D(V||W|P)` over `V` with `I_k <= c_k` under `P x V`, for one `k`.
pub(crate) fn haroutunian_single(w: &Mac, p: &[f64], k: usize, c: f64) -> Inner {
    let (xs, ys, zs) = (w.x_size(), w.y_size(), w.z_size());
    let mut lam = [0.0; 3];
    lam[k] = 1.0;
    let mut rf = RateFunctional::new();
    rf.add_input(p, xs, ys, lam, 1.0);
    let at_w = rf.value(w.flat(), zs);
    if at_w <= c {
        return Inner::zero(w, at_w - c);
    }
    let mut tilt = Tilt::new(w, p);
    if c < 0.0 {
        return Inner {
            value: f64::INFINITY,
            v: w.flat().to_vec(),
            converged: true,
            slack: at_w - c,
            work: 0,
            bounded: false,
            lambda: None,
        };
    }
    if c == 0.0 {
        let (value, v) = tilt.equalize(&vanishing_links(p, xs, ys, k, false));
        let slack = rf.value(&v, zs) - c;
        return Inner {
            value,
            v,
            converged: true,
            slack,
            work: 1,
            bounded: false,
            lambda: None,
        };
    }
    let mut s = Vec::new();
    let mut v = w.flat().to_vec();
    let out = tilt.solve(std::slice::from_ref(&rf), &[c], &mut s, &mut v);
    Inner {
        value: out.value,
        slack: out.rates[0] - c,
        v: out.v,
        converged: out.converged,
        work: tilt.newton_steps,
        bounded: false,
        lambda: None,
    }
}

/// Haroutunian's inner minimum at `p`: the cheapest of the three single-constraint problems.
pub(crate) fn haroutunian_inner(w: &Mac, p: &[f64], r: &RatePair, eps: f64) -> Inner {
    let c = r.thresholds(eps);
    let mut best: Option<Inner> = None;
    let mut work = 0;
    let mut converged = true;
    for (k, &ck) in c.iter().enumerate() {
        let cand = haroutunian_single(w, p, k, ck);
        work += cand.work;
        converged &= cand.converged;
        if best.as_ref().is_none_or(|b| cand.better_than(b)) {
            best = Some(cand);
        }
    }
    let mut best = best.expect("three constraints");
    best.work = work;
    best.converged = converged;
    best
}

/// Domain of the outer maximization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputDomain {
    /// Every joint distribution on `X x Y`.
    #[default]
    Joint,
    /// Only product distributions `P_X x P_Y`.
    Product,
}

/// Number of best grid seeds refined by local search.
const LOCAL_STARTS: usize = 3;
/// Smallest gain accepted by local search; inner solves are only this accurate.
const IMPROVE_TOL: f64 = 1e-9;

pub(crate) struct Outer {
    pub value: f64,
    pub p: Vec<f64>,
    pub inner: Inner,
    pub evaluations: usize,
    pub work: usize,
    pub converged: bool,
}

fn coords_to_joint(domain: InputDomain, xs: usize, ys: usize, c: &[f64]) -> Vec<f64> {
    match domain {
        InputDomain::Joint => c.to_vec(),
        InputDomain::Product => {
            let (a, b) = c.split_at(xs);
            (0..xs * ys).map(|i| a[i / ys] * b[i % ys]).collect()
        }
    }
}

/// Coordinate blocks that each live on a simplex.
fn blocks(domain: InputDomain, xs: usize, ys: usize) -> Vec<std::ops::Range<usize>> {
    match domain {
        InputDomain::Joint => vec![0..xs * ys],
        InputDomain::Product => vec![0..xs, xs..xs + ys],
    }
}

fn seeds(domain: InputDomain, xs: usize, ys: usize, res: usize) -> Vec<Vec<f64>> {
    match domain {
        InputDomain::Joint => simplex_lattice(xs * ys, res),
        InputDomain::Product => {
            let la = simplex_lattice(xs, res);
            let lb = simplex_lattice(ys, res);
            la.iter()
                .flat_map(|a| lb.iter().map(move |b| a.iter().chain(b).copied().collect()))
                .collect()
        }
    }
}

/// Grid-seeded multistart pattern search maximizing `eval` over input distributions.
///
/// `eval(p, incumbent)` must return the exact inner minimum whenever it exceeds the
/// incumbent's value; below it any value not above that floor is acceptable (early exit).
pub(crate) fn maximize_inputs<F>(
    xs: usize,
    ys: usize,
    domain: InputDomain,
    opts: &SearchOptions,
    eval: F,
) -> Outer
where
    F: Fn(&[f64], Option<&Inner>) -> Inner + Sync,
{
    let seed_coords = seeds(domain, xs, ys, opts.grid_resolution);
    let keep = opts.multistart_count.min(LOCAL_STARTS);
    // sequential so that seeds which cannot enter the top `keep` may exit early
    let mut evaluated: Vec<Inner> = Vec::with_capacity(seed_coords.len());
    let mut top: Vec<usize> = Vec::new();
    for c in &seed_coords {
        let incumbent = if top.len() >= keep {
            Some(&evaluated[top[keep - 1]])
        } else {
            None
        };
        let inner = eval(&coords_to_joint(domain, xs, ys, c), incumbent);
        if !inner.bounded {
            top.push(evaluated.len());
            // stable: earlier seeds win ties
            top.sort_by(|&a, &b| {
                let va = if a == evaluated.len() {
                    inner.value
                } else {
                    evaluated[a].value
                };
                let vb = if b == evaluated.len() {
                    inner.value
                } else {
                    evaluated[b].value
                };
                vb.total_cmp(&va).then(a.cmp(&b))
            });
            top.truncate(keep);
        }
        evaluated.push(inner);
    }
    let mut evaluations = seed_coords.len();
    let mut work: usize = evaluated.iter().map(|i| i.work).sum();
    let mut converged = evaluated.iter().all(|i| i.converged);
    let mut order: Vec<usize> = (0..seed_coords.len()).collect();
    // stable: equal values keep lattice order, exact values ahead of bounds
    order.sort_by(|&a, &b| {
        evaluated[b]
            .value
            .total_cmp(&evaluated[a].value)
            .then(evaluated[a].bounded.cmp(&evaluated[b].bounded))
    });
    let starts: Vec<usize> = order.into_iter().take(keep).collect();
    let blocks = blocks(domain, xs, ys);
    let budget = opts.max_iterations;
    let locals: Vec<(Vec<f64>, Inner, usize, usize, bool)> = starts
        .par_iter()
        .map(|&s| {
            let mut x = seed_coords[s].clone();
            let mut fx = evaluated[s].clone();
            let mut evals = 0usize;
            let mut work = 0usize;
            let mut finished = true;
            if fx.value.is_infinite() {
                return (x, fx, evals, work, finished);
            }
            let mut h = 0.5 / opts.grid_resolution as f64;
            // the value is flat near an interior maximum: a step h moves it by O(h^2)
            let h_min = opts.tolerance.sqrt();
            'search: while h >= h_min {
                let mut improved = false;
                for block in &blocks {
                    for i in block.clone() {
                        for j in block.clone() {
                            if i == j {
                                continue;
                            }
                            let delta = h.min(x[i]);
                            if delta <= 0.0 {
                                continue;
                            }
                            if evals >= budget {
                                finished = false;
                                break 'search;
                            }
                            let mut y = x.clone();
                            y[i] -= delta;
                            y[j] += delta;
                            let fy = eval(&coords_to_joint(domain, xs, ys, &y), Some(&fx));
                            evals += 1;
                            work += fy.work;
                            if fy.value > fx.value + IMPROVE_TOL {
                                x = y;
                                fx = fy;
                                improved = true;
                            }
                        }
                    }
                }
                if !improved {
                    h *= 0.5;
                }
            }
            (x, fx, evals, work, finished)
        })
        .collect();
    let mut best: Option<(Vec<f64>, Inner)> = None;
    for (x, fx, evals, w, finished) in locals {
        evaluations += evals;
        work += w;
        converged &= finished && fx.converged;
        if best.as_ref().is_none_or(|(_, b)| fx.value > b.value) {
            best = Some((x, fx));
        }
    }
    let (x, inner) = best.expect("at least one start");
    Outer {
        value: inner.value,
        p: coords_to_joint(domain, xs, ys, &x),
        inner,
        evaluations,
        work,
        converged,
    }
}

fn to_result(
    w: &Mac,
    method: Method,
    outer: Outer,
    membership_calls: usize,
) -> Result<ExponentResult> {
    let p = JointDistribution::new(vec![w.x_size(), w.y_size()], outer.p)?;
    let v = Mac::from_flat(w.x_size(), w.y_size(), w.z_size(), outer.inner.v)?;
    // report the divergence of the returned witness itself
    let value = if outer.value.is_finite() {
        channel_divergence(&v, w, &p)?
    } else {
        outer.value
    };
    Ok(ExponentResult {
        value,
        witness_p: p,
        witness_v: v,
        method,
        target: method,
        converged: outer.converged,
        diagnostics: Diagnostics {
            outer_evaluations: outer.evaluations,
            inner_iterations: outer.work,
            membership_calls,
            best_slack: outer.inner.slack,
        },
    })
}

/// Haroutunian's exponent: joint inputs, test channels meeting at least one single-letter rate constraint.
pub fn haroutunian_exponent(w: &Mac, r: &RatePair, opts: &SearchOptions) -> Result<ExponentResult> {
    haroutunian_exponent_with(w, r, opts, InputDomain::Joint)
}

pub fn haroutunian_exponent_with(
    w: &Mac,
    r: &RatePair,
    opts: &SearchOptions,
    domain: InputDomain,
) -> Result<ExponentResult> {
    opts.validate()?;
    let outer = maximize_inputs(w.x_size(), w.y_size(), domain, opts, |p, _| {
        haroutunian_inner(w, p, r, 0.0)
    });
    to_result(w, Method::Haroutunian, outer, 0)
}

/// Sphere-packing exponent: joint inputs, test channels under which the rate pair leaves the region.
pub fn sphere_packing_exponent(
    w: &Mac,
    r: &RatePair,
    opts: &SearchOptions,
) -> Result<ExponentResult> {
    sphere_packing_exponent_with(w, r, opts, InputDomain::Joint)
}

pub fn sphere_packing_exponent_with(
    w: &Mac,
    r: &RatePair,
    opts: &SearchOptions,
    domain: InputDomain,
) -> Result<ExponentResult> {
    opts.validate()?;
    let (xs, ys) = (w.x_size(), w.y_size());
    let cap = capacity_membership_with(w, r, opts)?;
    if !cap.inside {
        // no input distribution admits a decomposition reaching r, so V = W already works
        let p = JointDistribution::new(vec![xs, ys], vec![1.0 / (xs * ys) as f64; xs * ys])?;
        return Ok(ExponentResult {
            value: 0.0,
            witness_p: p,
            witness_v: w.clone(),
            method: Method::SpherePacking,
            target: Method::SpherePacking,
            converged: true,
            diagnostics: Diagnostics {
                outer_evaluations: 0,
                inner_iterations: 0,
                membership_calls: 1,
                best_slack: cap.slack,
            },
        });
    }
    let c = r.thresholds(0.0);
    let mut outer = maximize_inputs(xs, ys, domain, opts, |p, incumbent| {
        SpherePacking::new(w, p, c).solve(r, 0.0, incumbent)
    });
    // re-solve at the maximizer with every pentagon inequality tightened by the tolerance,
    // so that the witness sits strictly outside rather than on the boundary
    let mut tightened = false;
    if outer.value.is_finite() && outer.value > 0.0 {
        let tau = opts.tolerance;
        let strict = SpherePacking::new(w, &outer.p, r.thresholds(tau)).solve(r, tau, None);
        if strict.value.is_finite() {
            outer.work += strict.work;
            outer.converged &= strict.converged;
            outer.value = strict.value;
            outer.inner = strict;
            tightened = true;
        }
    }
    let mut result = to_result(w, Method::SpherePacking, outer, 1)?;
    if result.value.is_finite() {
        let verdict = region_membership(&result.witness_v, &result.witness_p, r, 0.0, opts)?;
        result.diagnostics.best_slack = verdict.slack;
        result.diagnostics.membership_calls += 1;
        if verdict.inside && tightened {
            result.converged = false;
        }
    }
    Ok(result)
}

/// Finite-length inner minima at a fixed input distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiniteGap {
    /// `(n, eps_n, alpha_n)` in the order of the requested lengths.
    pub points: Vec<(usize, f64, f64)>,
    /// The limit `alpha*` (no slack).
    pub limit: f64,
    pub converged: bool,
}

impl FiniteGap {
    /// `alpha_n - alpha*` per length.
    pub fn gaps(&self) -> Vec<f64> {
        self.points
            .iter()
            .map(|&(_, _, a)| a - self.limit)
            .collect()
    }
}

/// `alpha_n = min D(V||W|P)` over `V` with `r` outside the region at slack `eps_n`, with `eps_n` from the default slack model.
pub fn finite_n_gap(
    w: &Mac,
    p: &JointDistribution,
    r: &RatePair,
    n_list: &[usize],
) -> Result<FiniteGap> {
    finite_n_gap_with(w, p, r, n_list, &SlackModel::default())
}

pub fn finite_n_gap_with(
    w: &Mac,
    p: &JointDistribution,
    r: &RatePair,
    n_list: &[usize],
    model: &SlackModel,
) -> Result<FiniteGap> {
    check_input_shape(w, p)?;
    if n_list.is_empty() || n_list.contains(&0) || n_list.windows(2).any(|s| s[1] <= s[0]) {
        return Err(Error::InvalidParameter(
            "block lengths must be positive and increasing".into(),
        ));
    }
    let probs = p.probs();
    let at = |eps: f64| SpherePacking::new(w, probs, r.thresholds(eps)).solve(r, eps, None);
    let limit = at(0.0);
    let mut converged = limit.converged;
    let mut points = Vec::with_capacity(n_list.len());
    for &n in n_list {
        let eps = model.eps(n, w.x_size(), w.y_size());
        if !(eps >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "slack model gave {eps} at n = {n}"
            )));
        }
        let inner = at(eps);
        converged &= inner.converged;
        points.push((n, eps, inner.value));
    }
    Ok(FiniteGap {
        points,
        limit: limit.value,
        converged,
    })
}
