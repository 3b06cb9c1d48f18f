//! Rate-region membership: does some time-sharing decomposition with at most
//! four components, reproducing a prescribed input distribution, yield a
//! pentagon that contains the queried rate pair?
//!
//! The search works on the component inputs `(p(x|q), p(y|q))` only. For any
//! fixed set of components, the best weights are found exactly by a small
//! linear program that maximizes the worst pentagon margin, with marginal
//! mismatch priced by an exact L1 penalty. Component inputs are then improved
//! by a multistart pattern search. A positive answer always comes with a
//! witness that is re-evaluated independently; a negative answer only means
//! the search failed to find one.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lp::{WeightProgram, WeightSolver};
use crate::mac::{
    check_input_shape, decomposition_marginal, pentagon_rates, point_rates, row_entropies, Mac,
    PentagonRates, RatePair, TimeSharingDecomposition, MAX_TIME_SHARING,
};
use crate::prob::{l1_distance, Distribution, JointDistribution, StochasticMatrix};
use crate::search::SearchOptions;

/// Price of one unit of L1 marginal mismatch, in bits.
pub const MARGINAL_PENALTY: f64 = 1e3;
/// Closed-region slop: slacks at or above `-BOUNDARY_SLOP` count as inside.
pub const BOUNDARY_SLOP: f64 = 1e-9;
/// A witness must reproduce the target marginal within this L1 distance.
pub const MARGINAL_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionVerdict {
    pub inside: bool,
    /// Best found `min(i1 + eps - r1, i2 + eps - r2, i12 + eps - r1 - r2)`.
    pub slack: f64,
    pub witness: Option<TimeSharingDecomposition>,
    pub witness_rates: Option<PentagonRates>,
    /// Always false for `inside == false`: outside verdicts are search-based.
    pub certified: bool,
}

/// A set of at most four product inputs.
#[derive(Debug, Clone)]
pub(crate) struct Components {
    pub a: Vec<Vec<f64>>,
    pub b: Vec<Vec<f64>>,
}

pub(crate) struct ComponentSearch<'a> {
    v: &'a Mac,
    hrow: Vec<f64>,
    target: Vec<f64>,
    free_marginal: bool,
    thresholds: [f64; 3],
    solver: WeightSolver,
    scratch: Vec<f64>,
    rates: Vec<[f64; 3]>,
    moments: Vec<f64>,
    pub evaluations: usize,
}

#[derive(Debug, Clone)]
pub(crate) struct SearchOutcome {
    pub objective: f64,
    pub residual: f64,
    pub components: Components,
    pub weights: Vec<f64>,
}

impl<'a> ComponentSearch<'a> {
    /// `p = None` releases the marginal constraint (capacity region).
    pub(crate) fn new(v: &'a Mac, p: Option<&JointDistribution>, r: &RatePair, eps: f64) -> Self {
        let (target, free_marginal) = match p {
            Some(p) => (p.probs().to_vec(), false),
            None => (vec![1.0], true),
        };
        Self {
            v,
            hrow: row_entropies(v),
            target,
            free_marginal,
            thresholds: r.thresholds(eps),
            solver: WeightSolver::new(),
            scratch: Vec::new(),
            rates: Vec::new(),
            moments: Vec::new(),
            evaluations: 0,
        }
    }

    fn moment_len(&self) -> usize {
        if self.free_marginal {
            1
        } else {
            self.v.pairs()
        }
    }

    fn refresh(&mut self, c: &Components, only: Option<usize>) {
        let q = c.a.len();
        let j = self.moment_len();
        let ys = self.v.y_size();
        self.rates.resize(q, [0.0; 3]);
        self.moments.resize(q * j, 0.0);
        for k in 0..q {
            if only.is_some_and(|o| o != k) {
                continue;
            }
            self.rates[k] = point_rates(self.v, &self.hrow, &c.a[k], &c.b[k], &mut self.scratch);
            if self.free_marginal {
                self.moments[k] = 1.0;
            } else {
                for (x, &ax) in c.a[k].iter().enumerate() {
                    for (y, &by) in c.b[k].iter().enumerate() {
                        self.moments[k * j + x * ys + y] = ax * by;
                    }
                }
            }
        }
    }

    fn solve_weights(&mut self) -> (f64, f64, Vec<f64>) {
        self.evaluations += 1;
        let sol = self.solver.solve(&WeightProgram {
            rates: &self.rates,
            moments: &self.moments,
            target: &self.target,
            thresholds: self.thresholds,
            penalty: MARGINAL_PENALTY,
        });
        let obj = sol.margin - MARGINAL_PENALTY * sol.residual;
        (obj, sol.residual, sol.weights)
    }

    pub(crate) fn evaluate(&mut self, c: &Components) -> SearchOutcome {
        self.refresh(c, None);
        let (objective, residual, weights) = self.solve_weights();
        SearchOutcome {
            objective,
            residual,
            components: c.clone(),
            weights,
        }
    }

    /// Pattern search over the component inputs, starting from `c`.
    /// Stops early once the objective reaches `stop_at`.
    pub(crate) fn local_search(
        &mut self,
        c: Components,
        budget: usize,
        h_min: f64,
        stop_at: f64,
    ) -> SearchOutcome {
        let mut cur = c;
        self.refresh(&cur, None);
        let (mut best, _, _) = self.solve_weights();
        let start_evals = self.evaluations;
        let mut h = 0.25;
        'outer: while h >= h_min {
            let mut improved = true;
            while improved {
                improved = false;
                for q in 0..cur.a.len() {
                    for block in 0..2 {
                        let len = if block == 0 {
                            cur.a[q].len()
                        } else {
                            cur.b[q].len()
                        };
                        for i in 0..len {
                            for j in 0..len {
                                if i == j {
                                    continue;
                                }
                                if self.evaluations - start_evals >= budget || best >= stop_at {
                                    break 'outer;
                                }
                                let vec = if block == 0 {
                                    &mut cur.a[q]
                                } else {
                                    &mut cur.b[q]
                                };
                                let delta = h.min(vec[i]);
                                if delta <= 0.0 {
                                    continue;
                                }
                                vec[i] -= delta;
                                vec[j] += delta;
                                self.refresh(&cur, Some(q));
                                let (obj, _, _) = self.solve_weights();
                                if obj > best + 1e-15 {
                                    best = obj;
                                    improved = true;
                                } else {
                                    let vec = if block == 0 {
                                        &mut cur.a[q]
                                    } else {
                                        &mut cur.b[q]
                                    };
                                    vec[i] += delta;
                                    vec[j] -= delta;
                                    self.refresh(&cur, Some(q));
                                }
                            }
                        }
                    }
                }
            }
            h *= 0.5;
        }
        self.evaluate(&cur)
    }

    /// Multistart search: structured starts first, then seeded random starts.
    pub(crate) fn run(
        &mut self,
        opts: &SearchOptions,
        stop_at: f64,
        extra: &[Components],
    ) -> SearchOutcome {
        let mut starts: Vec<Components> = extra.to_vec();
        starts.extend(self.structured_starts());
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        let (xs, ys) = (self.v.x_size(), self.v.y_size());
        while starts.len() < opts.multistart_count.max(1) {
            starts.push(Components {
                a: (0..MAX_TIME_SHARING)
                    .map(|_| dirichlet(&mut rng, xs))
                    .collect(),
                b: (0..MAX_TIME_SHARING)
                    .map(|_| dirichlet(&mut rng, ys))
                    .collect(),
            });
        }
        let h_min = (opts.tolerance * 1e-2).max(1e-12);
        let mut best: Option<SearchOutcome> = None;
        for s in starts
            .into_iter()
            .take(opts.multistart_count.max(1) + extra.len())
        {
            let out = self.local_search(s, opts.max_iterations, h_min, stop_at);
            if best.as_ref().is_none_or(|b| out.objective > b.objective) {
                best = Some(out);
            }
            if best.as_ref().is_some_and(|b| b.objective >= stop_at) {
                break;
            }
        }
        best.expect("at least one start")
    }

    fn structured_starts(&self) -> Vec<Components> {
        let (xs, ys) = (self.v.x_size(), self.v.y_size());
        let mut out = Vec::new();
        let (mx, my) = if self.free_marginal {
            (vec![1.0 / xs as f64; xs], vec![1.0 / ys as f64; ys])
        } else {
            marginals(&self.target, xs, ys)
        };
        // product of the marginals, with corner companions
        let corners: Vec<(usize, usize)> =
            (0..xs).flat_map(|x| (0..ys).map(move |y| (x, y))).collect();
        let mut a = vec![mx.clone()];
        let mut b = vec![my.clone()];
        for &(x, y) in corners.iter().take(MAX_TIME_SHARING - 1) {
            a.push(unit(xs, x));
            b.push(unit(ys, y));
        }
        out.push(Components { a, b });
        if corners.len() <= MAX_TIME_SHARING {
            out.push(Components {
                a: corners.iter().map(|&(x, _)| unit(xs, x)).collect(),
                b: corners.iter().map(|&(_, y)| unit(ys, y)).collect(),
            });
        }
        out
    }
}

fn unit(k: usize, i: usize) -> Vec<f64> {
    let mut v = vec![0.0; k];
    v[i] = 1.0;
    v
}

pub(crate) fn marginals(p: &[f64], xs: usize, ys: usize) -> (Vec<f64>, Vec<f64>) {
    let mut mx = vec![0.0; xs];
    let mut my = vec![0.0; ys];
    for x in 0..xs {
        for y in 0..ys {
            mx[x] += p[x * ys + y];
            my[y] += p[x * ys + y];
        }
    }
    (mx, my)
}

pub(crate) fn dirichlet(rng: &mut impl Rng, k: usize) -> Vec<f64> {
    let mut v: Vec<f64> = (0..k).map(|_| -(1.0 - rng.gen::<f64>()).ln()).collect();
    let s: f64 = v.iter().sum();
    v.iter_mut().for_each(|x| *x /= s);
    v
}

pub(crate) fn witness_from(out: &SearchOutcome) -> Result<TimeSharingDecomposition> {
    let keep: Vec<usize> = (0..out.weights.len())
        .filter(|&q| out.weights[q] > 1e-14)
        .collect();
    if keep.is_empty() {
        return Err(Error::NoDecomposition);
    }
    let total: f64 = keep.iter().map(|&q| out.weights[q]).sum();
    let weights = keep.iter().map(|&q| out.weights[q] / total).collect();
    let clean = |v: &[f64]| -> Result<Distribution> {
        let s: f64 = v.iter().sum();
        Distribution::new(v.iter().map(|x| x.max(0.0) / s).collect())
    };
    TimeSharingDecomposition::new(
        Distribution::new(weights)?,
        StochasticMatrix::new(
            keep.iter()
                .map(|&q| clean(&out.components.a[q]))
                .collect::<Result<_>>()?,
        )?,
        StochasticMatrix::new(
            keep.iter()
                .map(|&q| clean(&out.components.b[q]))
                .collect::<Result<_>>()?,
        )?,
    )
}

fn verdict_from(
    v: &Mac,
    p: Option<&JointDistribution>,
    r: &RatePair,
    eps: f64,
    out: &SearchOutcome,
) -> Result<RegionVerdict> {
    let witness = witness_from(out)?;
    let rates = pentagon_rates(v, &witness)?;
    let slack = rates.slack(r, eps);
    let marginal_ok = match p {
        Some(p) => l1_distance(&decomposition_marginal(&witness), p)? <= MARGINAL_TOL,
        None => true,
    };
    if !marginal_ok {
        return Err(Error::NoDecomposition);
    }
    let inside = slack >= -BOUNDARY_SLOP;
    Ok(RegionVerdict {
        inside,
        slack,
        witness: Some(witness),
        witness_rates: Some(rates),
        certified: inside,
    })
}

/// Membership of `r` in the region of channel `v` at input distribution `p`,
/// with every pentagon inequality relaxed by `eps`.
pub fn region_membership(
    v: &Mac,
    p: &JointDistribution,
    r: &RatePair,
    eps: f64,
    opts: &SearchOptions,
) -> Result<RegionVerdict> {
    check_input_shape(v, p)?;
    opts.validate()?;
    if !(eps >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "slack must be nonnegative, got {eps}"
        )));
    }
    let mut search = ComponentSearch::new(v, Some(p), r, eps);
    let out = search.run(opts, f64::INFINITY, &[]);
    if out.residual > MARGINAL_TOL {
        return Err(Error::NoDecomposition);
    }
    verdict_from(v, Some(p), r, eps, &out)
}

/// Membership of `r` in the capacity region (the input distribution is free).
pub fn capacity_membership(w: &Mac, r: &RatePair) -> Result<RegionVerdict> {
    capacity_membership_with(w, r, &SearchOptions::default())
}

pub fn capacity_membership_with(
    w: &Mac,
    r: &RatePair,
    opts: &SearchOptions,
) -> Result<RegionVerdict> {
    opts.validate()?;
    let mut search = ComponentSearch::new(w, None, r, 0.0);
    let out = search.run(opts, f64::INFINITY, &[]);
    verdict_from(w, None, r, 0.0, &out)
}
