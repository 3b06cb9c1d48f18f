//! Sphere-packing inner problem at a fixed input distribution `P`:
//!
//! ```text
//! minimize D(V||W|P)  over V  such that  r lies outside C_V(P)
//! ```
//!
//! `C_V(P)` is convex, so `r` lies outside it exactly when some direction
//! `lambda` in the probability simplex separates:
//! `max_mu lambda . E_mu I(V) < lambda . r`, the maximum running over
//! time-sharing measures `mu` that reproduce `P`. For a fixed `lambda` the
//! feasible set is convex and is handled by cutting planes. The master problem
//! keeps finitely many measures as constraints. The most violated measure is
//! found by column generation over product inputs. The minimum over `lambda`
//! is a local search seeded by LP duals.

use crate::exponent::{haroutunian_inner, vanishing_links, Inner};
use crate::lp::{WeightProgram, WeightSolver};
use crate::mac::{point_rates, row_entropies, Mac, RatePair};
use crate::region::marginals;
use crate::search::simplex_lattice;
use crate::tilt::{solve_dense, RateFunctional, Tilt};

/// Lattice denominator of the fixed product-input columns.
const SEP_RESOLUTION: usize = 8;
/// Upper limit on the number of fixed columns (the lattice is coarsened to fit).
const SEP_MAX_GRID: usize = 400;
const SEP_PENALTY: f64 = 1e4;
/// A generated column must improve the LP by more than this reduced profit.
const PRICE_TOL: f64 = 1e-10;
/// A master solution is accepted when the separation exceeds `lambda . r` by at most this.
const CUT_TOL: f64 = 1e-9;
const MAX_PRICING_ROUNDS: usize = 60;
/// Pricing rounds without LP progress before column generation stops.
const STALL_ROUNDS: usize = 2;
/// LP gain per round below which a round counts as stalled.
const STALL_GAIN: f64 = 1e-10;
/// A stalled round whose best reduced profit is below this ends pricing at once.
const STALL_GAP: f64 = 1e-5;
/// Pricing stops once the optimum is known to within this.
const GAP_TOL: f64 = 1e-8;
/// A violated cut is kept once its remaining possible deepening is below this fraction of its violation.
const CUT_DEPTH: f64 = 0.1;
const MAX_CUT_ROUNDS: usize = 80;
const POOL_LIMIT: usize = 48;
/// Smallest step of the search over `lambda`.
/// Pattern search hands over to Newton polishing at this step.
const PATTERN_STEP: f64 = 1.0 / 256.0;
const POLISH_STEP: f64 = 1e-5;
const POLISH_ITERS: usize = 6;
const LAMBDA_STEP: f64 = 1e-4;

/// A time-sharing measure: weights over product inputs `a x b`.
#[derive(Debug, Clone)]
pub(crate) struct Measure {
    pub weights: Vec<f64>,
    pub a: Vec<Vec<f64>>,
    pub b: Vec<Vec<f64>>,
}

impl Measure {
    /// Adds `scale * other`, merging repeated product inputs.
    fn absorb(&mut self, other: &Measure, scale: f64) {
        for ((w, a), b) in other.weights.iter().zip(&other.a).zip(&other.b) {
            match (0..self.weights.len()).find(|&q| close(&self.a[q], a) && close(&self.b[q], b)) {
                Some(q) => self.weights[q] += scale * w,
                None => {
                    self.weights.push(scale * w);
                    self.a.push(a.clone());
                    self.b.push(b.clone());
                }
            }
        }
    }

    fn functional(&self, lambda: [f64; 3], xs: usize, ys: usize, p: &[f64]) -> RateFunctional {
        let mut rf = RateFunctional::new();
        let mut pi = vec![0.0; xs * ys];
        for ((w, a), b) in self.weights.iter().zip(&self.a).zip(&self.b) {
            for x in 0..xs {
                for y in 0..ys {
                    pi[x * ys + y] = a[x] * b[y];
                }
            }
            rf.add_input(&pi, xs, ys, lambda, *w);
        }
        rf.mask(p);
        rf
    }
}

#[derive(Debug, Clone, Copy)]
enum Objective {
    /// Maximize `lambda . E_mu I(V)`.
    Scalar([f64; 3]),
    /// Maximize `min_k E_mu I_k(V) - c_k`; the duals give the separating direction.
    MaxMin([f64; 3]),
}

#[derive(Debug, Clone)]
pub(crate) struct Separation {
    /// Scalar objective, or the max-min margin.
    pub value: f64,
    /// Direction used (scalar) or recovered from the duals (max-min).
    pub lambda: [f64; 3],
    pub measure: Measure,
}

/// Column generation over product inputs for the two decomposition programs.
pub(crate) struct Separator {
    xs: usize,
    ys: usize,
    p: Vec<f64>,
    grid: Vec<(Vec<f64>, Vec<f64>)>,
    /// Search directions on `(a, b)`: single transfers within a block and their pairings.
    directions: Vec<Vec<f64>>,
    pool: Vec<(Vec<f64>, Vec<f64>)>,
    solver: WeightSolver,
    scratch: Vec<f64>,
    pub lp_calls: usize,
}

impl Separator {
    pub(crate) fn new(xs: usize, ys: usize, p: &[f64]) -> Self {
        let mut res = SEP_RESOLUTION;
        while res > 1
            && simplex_lattice(xs, res).len() * simplex_lattice(ys, res).len() > SEP_MAX_GRID
        {
            res -= 1;
        }
        let la = simplex_lattice(xs, res);
        let lb = simplex_lattice(ys, res);
        let mut grid: Vec<(Vec<f64>, Vec<f64>)> = la
            .iter()
            .flat_map(|a| lb.iter().map(move |b| (a.clone(), b.clone())))
            .collect();
        grid.push(marginals(p, xs, ys));
        let transfers = |n: usize| -> Vec<Vec<f64>> {
            let mut out = Vec::new();
            for i in 0..n {
                for j in 0..n {
                    if i != j {
                        let mut d = vec![0.0; n];
                        d[i] = -1.0;
                        d[j] = 1.0;
                        out.push(d);
                    }
                }
            }
            out
        };
        let (ta, tb) = (transfers(xs), transfers(ys));
        let mut directions = Vec::new();
        for d in &ta {
            directions.push(
                d.iter()
                    .copied()
                    .chain(std::iter::repeat_n(0.0, ys))
                    .collect(),
            );
        }
        for d in &tb {
            directions.push(
                std::iter::repeat_n(0.0, xs)
                    .chain(d.iter().copied())
                    .collect(),
            );
        }
        for da in &ta {
            for db in &tb {
                directions.push(da.iter().chain(db).copied().collect());
            }
        }
        Self {
            directions,
            xs,
            ys,
            p: p.to_vec(),
            grid,
            pool: Vec::new(),
            solver: WeightSolver::new(),
            scratch: Vec::new(),
            lp_calls: 0,
        }
    }

    fn moments(&self, a: &[f64], b: &[f64], out: &mut Vec<f64>) {
        for &ax in a {
            for &by in b {
                out.push(ax * by);
            }
        }
    }

    /// Pricing may stop once the answer is known to lie on one side of `threshold`.
    pub(crate) fn scalar(&mut self, v: &Mac, lambda: [f64; 3], threshold: f64) -> Separation {
        self.run(v, Objective::Scalar(lambda), Some(threshold))
    }

    pub(crate) fn max_min(&mut self, v: &Mac, c: [f64; 3], threshold: Option<f64>) -> Separation {
        self.run(v, Objective::MaxMin(c), threshold)
    }

    fn run(&mut self, v: &Mac, obj: Objective, threshold: Option<f64>) -> Separation {
        let hrow = row_entropies(v);
        let mut cols: Vec<(Vec<f64>, Vec<f64>)> =
            self.grid.iter().chain(&self.pool).cloned().collect();
        let mut rates: Vec<[f64; 3]> = cols
            .iter()
            .map(|(a, b)| point_rates(v, &hrow, a, b, &mut self.scratch))
            .collect();
        let mut moments = Vec::with_capacity(cols.len() * self.p.len());
        for (a, b) in &cols {
            self.moments(a, b, &mut moments);
        }
        let mut added = Vec::new();
        let mut rounds = 0;
        let mut last = f64::NEG_INFINITY;
        let mut stalled = 0;
        loop {
            rounds += 1;
            self.lp_calls += 1;
            let (sol, lam, offset) = match obj {
                Objective::Scalar(lam) => {
                    let values: Vec<f64> = rates.iter().map(|g| dot(&lam, g)).collect();
                    (
                        self.solver
                            .solve_scalar(&values, &moments, &self.p, SEP_PENALTY),
                        lam,
                        0.0,
                    )
                }
                Objective::MaxMin(c) => {
                    let sol = self.solver.solve(&WeightProgram {
                        rates: &rates,
                        moments: &moments,
                        target: &self.p,
                        thresholds: c,
                        penalty: SEP_PENALTY,
                    });
                    let mut lam = [
                        sol.duals[0].max(0.0),
                        sol.duals[1].max(0.0),
                        sol.duals[2].max(0.0),
                    ];
                    let t: f64 = lam.iter().sum();
                    if t > 0.0 {
                        lam.iter_mut().for_each(|l| *l /= t);
                    } else {
                        lam = [0.0, 0.0, 1.0];
                    }
                    let offset = dot(&lam, &c);
                    (sol, lam, offset)
                }
            };
            let y: Vec<f64> = sol.duals[sol.duals.len() - self.p.len()..].to_vec();
            if rounds > MAX_PRICING_ROUNDS {
                return self.finish(obj, &cols, &rates, sol.weights, lam);
            }
            // reduced profit of a product input: lam . (I - c) - y . (a x b)
            let reduced = |g: &[f64; 3], a: &[f64], b: &[f64]| -> f64 {
                let mut m = 0.0;
                for (x, &ax) in a.iter().enumerate() {
                    for (yy, &by) in b.iter().enumerate() {
                        m += y[x * b.len() + yy] * ax * by;
                    }
                }
                dot(&lam, g) - offset - m
            };
            let mut ranked: Vec<(f64, usize)> = cols
                .iter()
                .zip(&rates)
                .enumerate()
                .map(|(q, ((a, b), g))| (reduced(g, a, b), q))
                .collect();
            ranked.sort_by(|l, r| r.0.total_cmp(&l.0).then(l.1.cmp(&r.1)));
            let mut starts: Vec<usize> = ranked.iter().take(2).map(|&(_, q)| q).collect();
            for (q, &wq) in sol.weights.iter().enumerate() {
                if wq > 0.0 && !starts.contains(&q) {
                    starts.push(q);
                }
            }
            let mut fresh: Vec<(f64, Vec<f64>, Vec<f64>)> = Vec::new();
            for q in starts {
                let (a, b) = cols[q].clone();
                let (val, a, b) = self.price(v, &hrow, &lam, offset, &y, a, b);
                if val > PRICE_TOL && !fresh.iter().any(|(_, fa, fb)| near(fa, &a) && near(fb, &b))
                {
                    fresh.push((val, a, b));
                }
            }
            // degenerate duals and slowly converging supports keep producing columns that barely move the optimum
            if sol.margin > last + STALL_GAIN {
                last = sol.margin;
                stalled = 0;
            } else {
                stalled += 1;
            }
            // the weights sum to one, so LP value plus best reduced profit bounds the optimum
            let gap = fresh.iter().map(|f| f.0).fold(0.0, f64::max);
            let decided = threshold.is_some_and(|t| {
                sol.margin + gap <= t || (sol.margin > t && gap <= CUT_DEPTH * (sol.margin - t))
            });
            if fresh.is_empty()
                || gap <= GAP_TOL
                || decided
                || stalled >= STALL_ROUNDS
                || (stalled > 0 && gap <= STALL_GAP)
            {
                return self.finish(obj, &cols, &rates, sol.weights, lam);
            }
            for (_, a, b) in fresh {
                rates.push(point_rates(v, &hrow, &a, &b, &mut self.scratch));
                self.moments(&a, &b, &mut moments);
                added.push((a.clone(), b.clone()));
                cols.push((a, b));
            }
            self.remember(&added);
            added.clear();
        }
    }

    fn remember(&mut self, cols: &[(Vec<f64>, Vec<f64>)]) {
        for c in cols {
            if !self
                .pool
                .iter()
                .any(|(a, b)| close(a, &c.0) && close(b, &c.1))
            {
                self.pool.push(c.clone());
            }
        }
        if self.pool.len() > POOL_LIMIT {
            let drop = self.pool.len() - POOL_LIMIT;
            self.pool.drain(..drop);
        }
    }

    /// Pattern search maximizing the reduced profit over a product input.
    #[allow(clippy::too_many_arguments)]
    fn price(
        &mut self,
        v: &Mac,
        hrow: &[f64],
        lam: &[f64; 3],
        offset: f64,
        y: &[f64],
        mut a: Vec<f64>,
        mut b: Vec<f64>,
    ) -> (f64, Vec<f64>, Vec<f64>) {
        let ys = self.ys;
        let eval = |a: &[f64], b: &[f64], scratch: &mut Vec<f64>| -> f64 {
            let g = point_rates(v, hrow, a, b, scratch);
            let mut m = 0.0;
            for (x, &ax) in a.iter().enumerate() {
                for (yy, &by) in b.iter().enumerate() {
                    m += y[x * ys + yy] * ax * by;
                }
            }
            dot(lam, &g) - offset - m
        };
        let xs = self.xs;
        let mut best = eval(&a, &b, &mut self.scratch);
        let mut h = 0.5 / SEP_RESOLUTION as f64;
        let mut evals = 0;
        let mut trial = (a.clone(), b.clone());
        while h >= PATTERN_STEP && evals < 4000 {
            let mut improved = false;
            for d in &self.directions {
                // largest feasible step along d, capped at h
                let mut t = h;
                for (k, &dk) in d.iter().enumerate() {
                    if dk < 0.0 {
                        let cur = if k < xs { a[k] } else { b[k - xs] };
                        t = t.min(cur / -dk);
                    }
                }
                if t <= 0.0 {
                    continue;
                }
                // extend a successful move while it keeps paying off
                let mut accepted = false;
                loop {
                    trial.0.copy_from_slice(&a);
                    trial.1.copy_from_slice(&b);
                    let mut ok = true;
                    for (k, &dk) in d.iter().enumerate() {
                        let slot = if k < xs {
                            &mut trial.0[k]
                        } else {
                            &mut trial.1[k - xs]
                        };
                        *slot += t * dk;
                        if *slot < 0.0 {
                            if *slot < -1e-15 {
                                ok = false;
                            }
                            *slot = 0.0;
                        }
                    }
                    if !ok {
                        break;
                    }
                    let val = eval(&trial.0, &trial.1, &mut self.scratch);
                    evals += 1;
                    if val > best {
                        best = val;
                        a.copy_from_slice(&trial.0);
                        b.copy_from_slice(&trial.1);
                        accepted = true;
                        t *= 2.0;
                    } else {
                        break;
                    }
                }
                improved |= accepted;
            }
            if !improved {
                h *= 0.5;
            }
        }
        let mut at = [a, b];
        let best = polish(&mut at, best, |c: &[Vec<f64>; 2]| {
            eval(&c[0], &c[1], &mut self.scratch)
        });
        let [a, b] = at;
        (best, a, b)
    }

    fn finish(
        &self,
        obj: Objective,
        cols: &[(Vec<f64>, Vec<f64>)],
        rates: &[[f64; 3]],
        weights: Vec<f64>,
        lambda: [f64; 3],
    ) -> Separation {
        let mut m = Measure {
            weights: Vec::new(),
            a: Vec::new(),
            b: Vec::new(),
        };
        let mut e = [0.0; 3];
        for (q, &wq) in weights.iter().enumerate() {
            if wq > 0.0 {
                m.weights.push(wq);
                m.a.push(cols[q].0.clone());
                m.b.push(cols[q].1.clone());
                for k in 0..3 {
                    e[k] += wq * rates[q][k];
                }
            }
        }
        let value = match obj {
            Objective::Scalar(lam) => dot(&lam, &e),
            Objective::MaxMin(c) => (0..3).map(|k| e[k] - c[k]).fold(f64::INFINITY, f64::min),
        };
        Separation {
            value,
            lambda,
            measure: m,
        }
    }
}

/// Finite-difference Newton ascent on the interior coordinates of a pair of simplex points.
///
/// Coordinate `k` of a block moves against that block's first entry; entries within
/// `POLISH_STEP` of the boundary stay fixed. Returns the (never smaller) final value.
fn polish<F>(pts: &mut [Vec<f64>; 2], mut best: f64, mut f: F) -> f64
where
    F: FnMut(&[Vec<f64>; 2]) -> f64,
{
    let h = POLISH_STEP;
    for _ in 0..POLISH_ITERS {
        let free: Vec<(usize, usize)> = (0..2)
            .flat_map(|blk| (1..pts[blk].len()).map(move |k| (blk, k)))
            .filter(|&(blk, k)| pts[blk][k] > 2.0 * h && pts[blk][0] > 2.0 * h)
            .collect();
        let d = free.len();
        if d == 0 {
            break;
        }
        let shifted = |pts: &[Vec<f64>; 2], moves: &[(usize, f64)]| {
            let mut q = pts.clone();
            for &(i, t) in moves {
                let (blk, k) = free[i];
                q[blk][k] += t;
                q[blk][0] -= t;
            }
            q
        };
        let f0 = f(pts);
        let fp: Vec<f64> = (0..d).map(|i| f(&shifted(pts, &[(i, h)]))).collect();
        let fm: Vec<f64> = (0..d).map(|i| f(&shifted(pts, &[(i, -h)]))).collect();
        let mut hess = vec![0.0; d * d];
        let mut grad = vec![0.0; d];
        for i in 0..d {
            grad[i] = (fp[i] - fm[i]) / (2.0 * h);
            hess[i * d + i] = (fp[i] - 2.0 * f0 + fm[i]) / (h * h);
            for j in 0..i {
                let fij = f(&shifted(pts, &[(i, h), (j, h)]));
                let hij = (fij - fp[i] - fp[j] + f0) / (h * h);
                hess[i * d + j] = hij;
                hess[j * d + i] = hij;
            }
        }
        // Newton step of the concave model: -H^{-1} g
        let mut rhs: Vec<f64> = grad.iter().map(|g| -g).collect();
        let Some(mut step) = solve_dense(&mut hess, &mut rhs, d) else {
            break;
        };
        if step.iter().zip(&grad).map(|(s, g)| s * g).sum::<f64>() <= 0.0 {
            break;
        }
        // stay inside the simplices
        let mut t: f64 = 1.0;
        for (i, &(blk, k)) in free.iter().enumerate() {
            if step[i] < 0.0 {
                t = t.min(pts[blk][k] / -step[i]);
            }
        }
        for blk in 0..2 {
            let out: f64 = free
                .iter()
                .zip(&step)
                .filter(|((b, _), _)| *b == blk)
                .map(|(_, s)| s)
                .sum();
            if out > 0.0 {
                t = t.min(pts[blk][0] / out);
            }
        }
        step.iter_mut().for_each(|s| *s *= t);
        let mut moved = false;
        for _ in 0..4 {
            let moves: Vec<(usize, f64)> = step.iter().copied().enumerate().collect();
            let mut q = shifted(pts, &moves);
            q.iter_mut().flatten().for_each(|x| *x = x.max(0.0));
            let val = f(&q);
            if val > best {
                let gain = val - best;
                *pts = q;
                best = val;
                moved = gain > 1e-13;
                break;
            }
            step.iter_mut().for_each(|s| *s *= 0.5);
        }
        if !moved {
            break;
        }
    }
    best
}

fn dot(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn close(a: &[f64], b: &[f64]) -> bool {
    a.iter().zip(b).all(|(x, y)| (x - y).abs() <= 1e-14)
}

/// Columns this close add nothing but degeneracy to one pricing round.
fn near(a: &[f64], b: &[f64]) -> bool {
    a.iter().zip(b).all(|(x, y)| (x - y).abs() <= 1e-6)
}

/// Result of the convex problem at one direction.
#[derive(Debug, Clone)]
struct Directional {
    value: f64,
    v: Vec<f64>,
    converged: bool,
}

pub(crate) struct SpherePacking<'a> {
    w: &'a Mac,
    p: &'a [f64],
    c: [f64; 3],
    tilt: Tilt<'a>,
    sep: Separator,
    converged: bool,
}

impl<'a> SpherePacking<'a> {
    pub(crate) fn new(w: &'a Mac, p: &'a [f64], c: [f64; 3]) -> Self {
        Self {
            w,
            p,
            c,
            tilt: Tilt::new(w, p),
            sep: Separator::new(w.x_size(), w.y_size(), p),
            converged: true,
        }
    }

    fn mac(&self, v: &[f64]) -> Mac {
        Mac::from_flat(
            self.w.x_size(),
            self.w.y_size(),
            self.w.z_size(),
            v.to_vec(),
        )
        .expect("stochastic iterate")
    }

    /// `min D(V||W|P)` subject to `max_mu lambda . E_mu I(V) <= lambda . c`.
    fn directional(&mut self, lambda: [f64; 3], warm: &[f64]) -> Directional {
        let (xs, ys) = (self.w.x_size(), self.w.y_size());
        let lc = dot(&lambda, &self.c);
        if lc < -1e-15 {
            return Directional {
                value: f64::INFINITY,
                v: self.w.flat().to_vec(),
                converged: true,
            };
        }
        if lc <= 1e-15 {
            // every usable product input must carry zero information in the weighted directions
            let mut links = Vec::new();
            for k in 0..3 {
                if lambda[k] > 0.0 {
                    links.extend(vanishing_links(self.p, xs, ys, k, true));
                }
            }
            let (value, v) = self.tilt.equalize(&links);
            return Directional {
                value,
                v,
                converged: true,
            };
        }
        let at_w = self.sep.scalar(self.w, lambda, lc);
        if at_w.value <= lc {
            return Directional {
                value: 0.0,
                v: self.w.flat().to_vec(),
                converged: true,
            };
        }
        let mut v = warm.to_vec();
        let first = self.sep.scalar(&self.mac(&v), lambda, lc + CUT_TOL);
        let mut cuts = vec![at_w.measure];
        if first.value > lc + CUT_TOL {
            cuts.push(first.measure);
        }
        let mut s: Vec<f64> = Vec::new();
        for _ in 0..MAX_CUT_ROUNDS {
            let rfs: Vec<RateFunctional> = cuts
                .iter()
                .map(|m| m.functional(lambda, xs, ys, self.p))
                .collect();
            let out = self.tilt.solve(&rfs, &vec![lc; rfs.len()], &mut s, &mut v);
            if out.infeasible {
                return Directional {
                    value: f64::INFINITY,
                    v: out.v,
                    converged: true,
                };
            }
            let next = self.sep.scalar(&self.mac(&out.v), lambda, lc + CUT_TOL);
            if next.value <= lc + CUT_TOL {
                return Directional {
                    value: out.value,
                    v: out.v,
                    converged: out.converged,
                };
            }
            // fold the active cuts into one aggregate measure carrying their total multiplier
            let total: f64 = s.iter().sum();
            if total > 0.0 {
                let mut agg = Measure {
                    weights: Vec::new(),
                    a: Vec::new(),
                    b: Vec::new(),
                };
                for (m, &sj) in cuts.iter().zip(&s) {
                    if sj > 0.0 {
                        agg.absorb(m, sj / total);
                    }
                }
                cuts = vec![agg];
                s = vec![0.0];
            }
            // the newest cut usually takes over the whole multiplier
            cuts.push(next.measure);
            s.push(total);
        }
        let value = self.tilt.divergence(&v);
        Directional {
            value,
            v,
            converged: false,
        }
    }

    /// Inner minimum, or any value not above the incumbent's once one is found.
    pub(crate) fn solve(&mut self, r: &RatePair, eps: f64, incumbent: Option<&Inner>) -> Inner {
        let floor = incumbent.map_or(f64::NEG_INFINITY, |i| i.value);
        let bound = haroutunian_inner(self.w, self.p, r, eps);
        // the sphere-packing minimum never exceeds the single-pentagon one
        if bound.value <= floor || bound.value == 0.0 {
            let bounded = bound.value > 0.0;
            return Inner { bounded, ..bound };
        }
        // the incumbent's direction usually already rules this input out
        if let Some(lam) = incumbent.and_then(|i| i.lambda) {
            let d = self.directional(lam, &bound.v);
            if d.value <= floor {
                return Inner {
                    value: d.value,
                    v: d.v,
                    converged: d.converged,
                    slack: 0.0,
                    work: self.sep.lp_calls + self.tilt.newton_steps,
                    bounded: true,
                    lambda: Some(lam),
                };
            }
        }
        let at_w = self.sep.max_min(self.w, self.c, Some(0.0));
        if at_w.value < 0.0 {
            return Inner::zero(self.w, at_w.value);
        }
        let hint = self.sep.max_min(&self.mac(&bound.v), self.c, None).lambda;
        let mut best_lam = hint;
        let mut best = self.directional(hint, &bound.v);
        let mut evals = 1;
        let consider =
            |this: &mut Self, lam: [f64; 3], best: &mut Directional, best_lam: &mut [f64; 3]| {
                let warm = best.v.clone();
                let cand = this.directional(lam, &warm);
                this.converged &= cand.converged;
                if cand.value < best.value {
                    *best = cand;
                    *best_lam = lam;
                    true
                } else {
                    false
                }
            };
        for k in 0..3 {
            if best.value <= floor {
                break;
            }
            let mut e = [0.0; 3];
            e[k] = 1.0;
            consider(self, e, &mut best, &mut best_lam);
            evals += 1;
        }
        // the duals at the current minimizer point towards a better direction
        for _ in 0..8 {
            if best.value <= floor || !best.value.is_finite() {
                break;
            }
            let lam = self.sep.max_min(&self.mac(&best.v), self.c, None).lambda;
            evals += 1;
            if lam == best_lam || !consider(self, lam, &mut best, &mut best_lam) {
                break;
            }
        }
        let mut h = 0.125;
        while h >= LAMBDA_STEP && best.value > floor && best.value.is_finite() {
            let mut improved = false;
            for i in 0..3 {
                for j in 0..3 {
                    if i == j || best_lam[i] <= 0.0 {
                        continue;
                    }
                    let mut lam = best_lam;
                    let d = h.min(lam[i]);
                    lam[i] -= d;
                    lam[j] += d;
                    evals += 1;
                    if consider(self, lam, &mut best, &mut best_lam) {
                        improved = true;
                    }
                }
            }
            if !improved {
                h *= 0.5;
            }
        }
        let slack = self.sep.max_min(&self.mac(&best.v), self.c, None).value;
        Inner {
            value: best.value,
            v: best.v,
            converged: self.converged && bound.converged,
            slack,
            work: evals + self.sep.lp_calls + self.tilt.newton_steps,
            bounded: false,
            lambda: Some(best_lam),
        }
    }
}
