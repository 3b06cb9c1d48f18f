//! Convex inner problems of the exponent solvers:
//!
//! ```text
//! minimize D(V||W|P)  subject to  R_j(V) <= c_j,  j = 1..m
//! ```
//!
//! where every `R_j` is a nonnegative combination of (conditional) mutual
//! informations of `V` under fixed inputs. Each such term has the variational
//! form `sum_i omega_i D(V_i || avg_omega(V))`, so `R_j` is a sum of "groups"
//! of weighted rows. The Lagrangian is minimized by a damped Newton method on
//! the rows of `V`, and the multipliers by a projected Newton ascent on the
//! concave dual, using the exact dual Hessian obtained by implicit
//! differentiation.

use crate::mac::Mac;

/// A nonnegative combination of weighted-row divergences from their weighted average.
#[derive(Debug, Clone, Default)]
pub(crate) struct RateFunctional {
    pub groups: Vec<(Vec<f64>, f64)>,
}

impl RateFunctional {
    pub(crate) fn new() -> Self {
        Self::default()
    }

    /// Adds `scale * sum_k lambda_k I_k` for the three pentagon informations under input `pi` on `X x Y`.
    pub(crate) fn add_input(
        &mut self,
        pi: &[f64],
        xs: usize,
        ys: usize,
        lambda: [f64; 3],
        scale: f64,
    ) {
        let mut push = |omega: Vec<f64>| {
            let total: f64 = omega.iter().sum();
            if total > 0.0 {
                self.groups.push((omega, total));
            }
        };
        if lambda[0] > 0.0 {
            for y in 0..ys {
                let mut om = vec![0.0; xs * ys];
                for x in 0..xs {
                    om[x * ys + y] = scale * lambda[0] * pi[x * ys + y];
                }
                push(om);
            }
        }
        if lambda[1] > 0.0 {
            for x in 0..xs {
                let mut om = vec![0.0; xs * ys];
                for y in 0..ys {
                    om[x * ys + y] = scale * lambda[1] * pi[x * ys + y];
                }
                push(om);
            }
        }
        if lambda[2] > 0.0 {
            push(pi.iter().map(|&q| scale * lambda[2] * q).collect());
        }
    }

    /// Drops weight on pairs outside the support of `p` (those rows are pinned to `W`).
    pub(crate) fn mask(&mut self, p: &[f64]) {
        for (om, total) in &mut self.groups {
            for (o, &pi) in om.iter_mut().zip(p) {
                if pi <= 0.0 {
                    *o = 0.0;
                }
            }
            *total = om.iter().sum();
        }
        self.groups.retain(|(_, t)| *t > 0.0);
    }

    pub(crate) fn value(&self, v: &[f64], zs: usize) -> f64 {
        let mut avg = vec![0.0; zs];
        let mut acc = 0.0;
        for (om, total) in &self.groups {
            group_average(om, *total, v, zs, &mut avg);
            for (i, &o) in om.iter().enumerate() {
                if o > 0.0 {
                    acc += o
                        * crate::prob::kl_slice(&v[i * zs..(i + 1) * zs], &avg)
                        * std::f64::consts::LN_2;
                }
            }
        }
        acc / std::f64::consts::LN_2
    }
}

fn group_average(om: &[f64], total: f64, v: &[f64], zs: usize, out: &mut [f64]) {
    out.iter_mut().for_each(|a| *a = 0.0);
    for (i, &o) in om.iter().enumerate() {
        if o > 0.0 {
            for (a, &x) in out.iter_mut().zip(&v[i * zs..(i + 1) * zs]) {
                *a += o * x;
            }
        }
    }
    out.iter_mut().for_each(|a| *a /= total);
}

#[derive(Debug, Clone)]
pub(crate) struct DualOutcome {
    /// `D(V||W|P)` in bits.
    pub value: f64,
    pub v: Vec<f64>,
    pub rates: Vec<f64>,
    pub converged: bool,
    /// No finite-divergence channel meets the constraints.
    pub infeasible: bool,
}

/// Rows of `V` free to move: pairs with positive input probability, restricted to the support of `W`.
pub(crate) struct Tilt<'a> {
    w: &'a [f64],
    p: &'a [f64],
    zs: usize,
    rows: Vec<usize>,
    supp: Vec<Vec<usize>>,
    offsets: Vec<usize>,
    nvar: usize,
    pub newton_steps: usize,
}

const LN2: f64 = std::f64::consts::LN_2;
/// A multiplier this large with the constraint still violated is taken as infeasibility.
const INFEASIBLE_MULTIPLIER: f64 = 1e9;

impl<'a> Tilt<'a> {
    pub(crate) fn new(w: &'a Mac, p: &'a [f64]) -> Self {
        let zs = w.z_size();
        let flat = w.flat();
        let rows: Vec<usize> = (0..p.len()).filter(|&i| p[i] > 0.0).collect();
        let supp: Vec<Vec<usize>> = rows
            .iter()
            .map(|&i| (0..zs).filter(|&z| flat[i * zs + z] > 0.0).collect())
            .collect();
        let mut offsets = Vec::with_capacity(rows.len());
        let mut nvar = 0;
        for s in &supp {
            offsets.push(nvar);
            nvar += s.len();
        }
        Self {
            w: flat,
            p,
            zs,
            rows,
            supp,
            offsets,
            nvar,
            newton_steps: 0,
        }
    }

    /// `D(V||W|P)` in nats.
    fn divergence_nats(&self, v: &[f64]) -> f64 {
        let zs = self.zs;
        let mut d = 0.0;
        for (r, &i) in self.rows.iter().enumerate() {
            for &z in &self.supp[r] {
                let x = v[i * zs + z];
                if x > 0.0 {
                    d += self.p[i] * x * (x / self.w[i * zs + z]).ln();
                }
            }
        }
        d
    }

    pub(crate) fn divergence(&self, v: &[f64]) -> f64 {
        self.divergence_nats(v) / LN2
    }

    /// Lagrangian in nats: `D + sum_j s_j R_j`.
    fn lagrangian(&self, v: &[f64], rates: &[RateFunctional], s: &[f64]) -> f64 {
        let mut l = self.divergence_nats(v);
        for (rf, &sj) in rates.iter().zip(s) {
            if sj > 0.0 {
                l += sj * rf.value(v, self.zs) * LN2;
            }
        }
        l
    }

    /// Gradient (nats) of the Lagrangian over the free entries, and optionally its Hessian.
    fn derivatives(
        &self,
        v: &[f64],
        rates: &[RateFunctional],
        s: &[f64],
        grad: &mut Vec<f64>,
        hess: Option<&mut Vec<f64>>,
    ) {
        let zs = self.zs;
        let n = self.nvar;
        grad.clear();
        grad.resize(n, 0.0);
        let mut hess = hess;
        if let Some(h) = hess.as_deref_mut() {
            h.clear();
            h.resize(n * n, 0.0);
        }
        for (r, &i) in self.rows.iter().enumerate() {
            for (k, &z) in self.supp[r].iter().enumerate() {
                let idx = self.offsets[r] + k;
                let x = v[i * zs + z];
                grad[idx] += self.p[i] * (x / self.w[i * zs + z]).ln();
                if let Some(h) = hess.as_deref_mut() {
                    h[idx * n + idx] += self.p[i] / x;
                }
            }
        }
        let mut avg = vec![0.0; zs];
        for (rf, &sj) in rates.iter().zip(s) {
            if sj <= 0.0 {
                continue;
            }
            for (om, total) in &rf.groups {
                group_average(om, *total, v, zs, &mut avg);
                for (r, &i) in self.rows.iter().enumerate() {
                    let oi = om[i];
                    if oi <= 0.0 {
                        continue;
                    }
                    for (k, &z) in self.supp[r].iter().enumerate() {
                        let idx = self.offsets[r] + k;
                        let x = v[i * zs + z];
                        grad[idx] += sj * oi * (x / avg[z]).ln();
                        if let Some(h) = hess.as_deref_mut() {
                            h[idx * n + idx] += sj * oi / x;
                            for (r2, &i2) in self.rows.iter().enumerate() {
                                let o2 = om[i2];
                                if o2 <= 0.0 {
                                    continue;
                                }
                                if let Some(k2) = self.supp[r2].iter().position(|&zz| zz == z) {
                                    let idx2 = self.offsets[r2] + k2;
                                    h[idx * n + idx2] -= sj * oi * o2 / (total * avg[z]);
                                }
                            }
                        }
                    }
                }
            }
        }
    }

    /// Gradient (nats) of one rate functional over the free entries.
    fn rate_gradient(&self, v: &[f64], rf: &RateFunctional, out: &mut Vec<f64>) {
        let zs = self.zs;
        out.clear();
        out.resize(self.nvar, 0.0);
        let mut avg = vec![0.0; zs];
        for (om, total) in &rf.groups {
            group_average(om, *total, v, zs, &mut avg);
            for (r, &i) in self.rows.iter().enumerate() {
                let oi = om[i];
                if oi <= 0.0 {
                    continue;
                }
                for (k, &z) in self.supp[r].iter().enumerate() {
                    out[self.offsets[r] + k] += oi * (v[i * zs + z] / avg[z]).ln();
                }
            }
        }
    }

    /// Assembles the equality-constrained Newton system `[H A'; A 0]`.
    fn kkt(&self, hess: &[f64]) -> Vec<f64> {
        let n = self.nvar;
        let m = self.rows.len();
        let dim = n + m;
        let mut k = vec![0.0; dim * dim];
        for a in 0..n {
            k[a * dim..a * dim + n].copy_from_slice(&hess[a * n..(a + 1) * n]);
        }
        for (r, s) in self.supp.iter().enumerate() {
            for kk in 0..s.len() {
                let idx = self.offsets[r] + kk;
                k[idx * dim + n + r] = 1.0;
                k[(n + r) * dim + idx] = 1.0;
            }
        }
        k
    }

    /// Minimizes the Lagrangian over `V` (in place) by damped Newton steps.
    pub(crate) fn minimize(&mut self, rates: &[RateFunctional], s: &[f64], v: &mut [f64]) -> bool {
        let n = self.nvar;
        let m = self.rows.len();
        let zs = self.zs;
        if n == 0 {
            return true;
        }
        let mut grad = Vec::new();
        let mut hess = Vec::new();
        let mut trial = v.to_vec();
        let mut value = self.lagrangian(v, rates, s);
        for _ in 0..200 {
            self.newton_steps += 1;
            self.derivatives(v, rates, s, &mut grad, Some(&mut hess));
            let mut kkt = self.kkt(&hess);
            let mut rhs: Vec<f64> = grad.iter().map(|g| -g).collect();
            rhs.resize(n + m, 0.0);
            let Some(step) = solve_dense(&mut kkt, &mut rhs, n + m) else {
                return false;
            };
            let step = &step[..n];
            let decrement: f64 = -grad.iter().zip(step).map(|(g, d)| g * d).sum::<f64>();
            let largest = step.iter().fold(0.0f64, |a, d| a.max(d.abs()));
            if largest <= 1e-15 {
                return true;
            }
            let mut alpha: f64 = 1.0;
            for (r, &i) in self.rows.iter().enumerate() {
                for (k, &z) in self.supp[r].iter().enumerate() {
                    let d = step[self.offsets[r] + k];
                    if d < 0.0 {
                        alpha = alpha.min(0.95 * v[i * zs + z] / -d);
                    }
                }
            }
            // inside the quadratic-convergence region the decrease is below roundoff: take the step
            let polish = decrement <= 1e-12 * value.abs().max(1.0) && alpha >= 1.0;
            let mut accepted = false;
            for _ in 0..60 {
                trial.copy_from_slice(v);
                for (r, &i) in self.rows.iter().enumerate() {
                    for (k, &z) in self.supp[r].iter().enumerate() {
                        trial[i * zs + z] += alpha * step[self.offsets[r] + k];
                    }
                }
                renormalize(&mut trial, &self.rows, zs);
                let t = self.lagrangian(&trial, rates, s);
                if polish || t <= value - 1e-4 * alpha * decrement || (t <= value && alpha < 1e-6) {
                    v.copy_from_slice(&trial);
                    value = t;
                    accepted = true;
                    break;
                }
                alpha *= 0.5;
            }
            if !accepted {
                // no further decrease representable in floating point
                return decrement <= 1e-9 * value.abs().max(1.0);
            }
        }
        false
    }

    /// Minimizes `D(V||W|P)` subject to `rates[j](V) <= c[j]`, all `c[j] > 0`.
    ///
    /// `s` and `v` are warm starts and are overwritten with the solution.
    pub(crate) fn solve(
        &mut self,
        rates: &[RateFunctional],
        c: &[f64],
        s: &mut Vec<f64>,
        v: &mut Vec<f64>,
    ) -> DualOutcome {
        let m = rates.len();
        let zs = self.zs;
        s.resize(m, 0.0);
        s.iter_mut().for_each(|x| *x = x.max(0.0));
        let tol: Vec<f64> = c.iter().map(|&cj| 1e-11 * cj.max(1.0)).collect();
        let mut converged = false;
        let mut iterations = 0;
        let mut ok = self.minimize(rates, s, v);
        let mut phi =
            self.lagrangian(v, rates, s) - s.iter().zip(c).map(|(a, b)| a * b * LN2).sum::<f64>();
        let mut r: Vec<f64> = rates.iter().map(|rf| rf.value(v, zs)).collect();
        let mut trial_v = v.clone();
        while iterations < 100 {
            iterations += 1;
            let g: Vec<f64> = (0..m).map(|j| r[j] - c[j]).collect();
            let kkt_ok = (0..m).all(|j| {
                if s[j] > 0.0 {
                    g[j].abs() <= tol[j]
                } else {
                    g[j] <= tol[j]
                }
            });
            if kkt_ok {
                converged = ok;
                break;
            }
            if (0..m).any(|j| s[j] >= INFEASIBLE_MULTIPLIER && g[j] > tol[j]) {
                // the constraint cannot be met at finite divergence
                return DualOutcome {
                    value: f64::INFINITY,
                    v: v.clone(),
                    rates: r,
                    converged: true,
                    infeasible: true,
                };
            }
            let free: Vec<usize> = (0..m).filter(|&j| s[j] > 0.0 || g[j] > 0.0).collect();
            // dual Hessian -J H^{-1} J' on the tangent space of the row constraints
            let n = self.nvar;
            let rows = self.rows.len();
            let mut grad = Vec::new();
            let mut hess = Vec::new();
            self.derivatives(v, rates, s, &mut grad, Some(&mut hess));
            let kkt = self.kkt(&hess);
            let jac: Vec<Vec<f64>> = free
                .iter()
                .map(|&j| {
                    let mut out = Vec::new();
                    self.rate_gradient(v, &rates[j], &mut out);
                    out
                })
                .collect();
            let mut solved = Vec::with_capacity(free.len());
            for jrow in &jac {
                let mut kk = kkt.clone();
                let mut rhs = jrow.clone();
                rhs.resize(n + rows, 0.0);
                match solve_dense(&mut kk, &mut rhs, n + rows) {
                    Some(x) => solved.push(x[..n].to_vec()),
                    None => break,
                }
            }
            let mut step = vec![0.0; m];
            if solved.len() == free.len() {
                // everything in nats: dphi/ds_j = (R_j - c_j) ln 2, d2phi/ds2 = -J H^{-1} J'
                let full: Vec<Vec<f64>> = jac
                    .iter()
                    .map(|jp| {
                        solved
                            .iter()
                            .map(|sq| jp.iter().zip(sq).map(|(x, y)| x * y).sum::<f64>())
                            .collect()
                    })
                    .collect();
                // projected Newton: multipliers at zero pushed further down stay fixed
                let mut active: Vec<usize> = (0..free.len()).collect();
                while !active.is_empty() {
                    let f = active.len();
                    let mut a = vec![0.0; f * f];
                    for (p, &fp) in active.iter().enumerate() {
                        for (q, &fq) in active.iter().enumerate() {
                            a[p * f + q] = full[fp][fq];
                        }
                    }
                    let ridge = 1e-13
                        * (0..f)
                            .map(|p| a[p * f + p].abs())
                            .fold(0.0, f64::max)
                            .max(1e-300);
                    for p in 0..f {
                        a[p * f + p] += ridge;
                    }
                    let mut rhs: Vec<f64> = active.iter().map(|&fp| g[free[fp]] * LN2).collect();
                    let Some(x) = solve_dense(&mut a, &mut rhs, f) else {
                        break;
                    };
                    let blocked: Vec<usize> = (0..f)
                        .filter(|&p| s[free[active[p]]] <= 0.0 && x[p] < 0.0)
                        .collect();
                    if blocked.is_empty() {
                        for (p, &fp) in active.iter().enumerate() {
                            step[free[fp]] = x[p];
                        }
                        break;
                    }
                    active = (0..f)
                        .filter(|p| !blocked.contains(p))
                        .map(|p| active[p])
                        .collect();
                }
            }
            if step.iter().all(|&x| x == 0.0) {
                // fall back to geometric growth (or decay) of the multipliers
                for &j in &free {
                    step[j] = if g[j] > 0.0 {
                        9.0 * s[j].max(1.0)
                    } else {
                        -s[j]
                    };
                }
            }
            let mut alpha = 1.0;
            let mut accepted = false;
            for _ in 0..50 {
                let s_try: Vec<f64> = (0..m)
                    .map(|j| (s[j] + alpha * step[j]).clamp(0.0, 2.0 * INFEASIBLE_MULTIPLIER))
                    .collect();
                trial_v.copy_from_slice(v);
                let ok_try = self.minimize(rates, &s_try, &mut trial_v);
                let phi_try = self.lagrangian(&trial_v, rates, &s_try)
                    - s_try.iter().zip(c).map(|(a, b)| a * b * LN2).sum::<f64>();
                if phi_try >= phi - 1e-14 * phi.abs().max(1.0) {
                    *s = s_try;
                    v.copy_from_slice(&trial_v);
                    phi = phi_try;
                    ok = ok_try;
                    accepted = true;
                    break;
                }
                alpha *= 0.5;
            }
            r = rates.iter().map(|rf| rf.value(v, zs)).collect();
            if !accepted {
                break;
            }
        }
        DualOutcome {
            value: self.divergence(v),
            v: v.clone(),
            rates: r,
            converged,
            infeasible: false,
        }
    }

    /// Minimizes `D(V||W|P)` when the rows joined by `links` must coincide.
    /// Returns `+inf` when some forced common row cannot avoid the zeros of `W`.
    pub(crate) fn equalize(&self, links: &[(usize, usize)]) -> (f64, Vec<f64>) {
        let zs = self.zs;
        let pairs = self.p.len();
        let mut parent: Vec<usize> = (0..pairs).collect();
        fn find(parent: &mut [usize], a: usize) -> usize {
            let mut a = a;
            while parent[a] != a {
                parent[a] = parent[parent[a]];
                a = parent[a];
            }
            a
        }
        for &(a, b) in links {
            if self.p[a] > 0.0 && self.p[b] > 0.0 {
                let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
                if ra != rb {
                    parent[ra.max(rb)] = ra.min(rb);
                }
            }
        }
        let mut v = self.w.to_vec();
        let mut total = 0.0;
        for root in 0..pairs {
            if self.p[root] <= 0.0 || find(&mut parent, root) != root {
                continue;
            }
            let members: Vec<usize> = (0..pairs)
                .filter(|&i| self.p[i] > 0.0 && find(&mut parent, i) == root)
                .collect();
            let mass: f64 = members.iter().map(|&i| self.p[i]).sum();
            let mut t = vec![0.0; zs];
            for (z, tz) in t.iter_mut().enumerate() {
                if members.iter().any(|&i| self.w[i * zs + z] <= 0.0) {
                    continue;
                }
                *tz = (members
                    .iter()
                    .map(|&i| self.p[i] * self.w[i * zs + z].ln())
                    .sum::<f64>()
                    / mass)
                    .exp();
            }
            let norm: f64 = t.iter().sum();
            if norm <= 0.0 {
                return (f64::INFINITY, self.w.to_vec());
            }
            t.iter_mut().for_each(|x| *x /= norm);
            for &i in &members {
                v[i * zs..(i + 1) * zs].copy_from_slice(&t);
            }
            // sum_i p_i D(T||W_i) = -mass * log(norm) for the normalized geometric mean
            total += -mass * norm.log2();
        }
        (total.max(0.0), v)
    }
}

fn renormalize(v: &mut [f64], rows: &[usize], zs: usize) {
    for &i in rows {
        let row = &mut v[i * zs..(i + 1) * zs];
        row.iter_mut().for_each(|x| *x = x.max(0.0));
        let s: f64 = row.iter().sum();
        row.iter_mut().for_each(|x| *x /= s);
    }
}

/// Gaussian elimination with partial pivoting; `a` is `n x n` row-major and is destroyed.
pub(crate) fn solve_dense(a: &mut [f64], b: &mut [f64], n: usize) -> Option<Vec<f64>> {
    for col in 0..n {
        let piv =
            (col..n).max_by(|&i, &j| a[i * n + col].abs().total_cmp(&a[j * n + col].abs()))?;
        if a[piv * n + col].abs() < 1e-300 {
            return None;
        }
        if piv != col {
            for k in 0..n {
                a.swap(piv * n + k, col * n + k);
            }
            b.swap(piv, col);
        }
        let d = a[col * n + col];
        for row in col + 1..n {
            let f = a[row * n + col] / d;
            if f != 0.0 {
                for k in col..n {
                    a[row * n + k] -= f * a[col * n + k];
                }
                b[row] -= f * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut acc = b[row];
        for k in row + 1..n {
            acc -= a[row * n + k] * x[k];
        }
        x[row] = acc / a[row * n + row];
        if !x[row].is_finite() {
            return None;
        }
    }
    Some(x)
}
