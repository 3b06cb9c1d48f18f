//! Dense primal simplex for the small linear programs that arise when
//! choosing time-sharing weights over a fixed set of product inputs.
//!
//! Problems are given in equality form `max c.x  s.t.  A x = b, x >= 0` with
//! `b >= 0` and a caller-supplied starting basis of unit columns, so no
//! phase-one is needed.

const PIVOT_TOL: f64 = 1e-11;
const COST_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum LpStatus {
    Optimal,
    Unbounded,
    IterationLimit,
}

#[derive(Debug, Default)]
pub(crate) struct Simplex {
    rows: usize,
    cols: usize,
    // rows x (cols + 1), last column is the right-hand side
    tab: Vec<f64>,
    // reduced profits c_j - z_j, last entry is -objective
    profit: Vec<f64>,
    basis: Vec<usize>,
}

impl Simplex {
    #[cfg(test)]
    pub(crate) fn new() -> Self {
        Self::default()
    }

    /// Loads `A` (row-major, `rows x cols`), `b`, `c` and the starting basis.
    /// The starting basis columns must form an identity in `A`.
    pub(crate) fn load(
        &mut self,
        rows: usize,
        cols: usize,
        a: &[f64],
        b: &[f64],
        c: &[f64],
        basis: &[usize],
    ) {
        debug_assert_eq!(a.len(), rows * cols);
        debug_assert!(b.iter().all(|&v| v >= 0.0));
        self.rows = rows;
        self.cols = cols;
        let w = cols + 1;
        self.tab.clear();
        self.tab.resize(rows * w, 0.0);
        for r in 0..rows {
            self.tab[r * w..r * w + cols].copy_from_slice(&a[r * cols..(r + 1) * cols]);
            self.tab[r * w + cols] = b[r];
        }
        self.basis.clear();
        self.basis.extend_from_slice(basis);
        self.profit.clear();
        self.profit.extend_from_slice(c);
        self.profit.push(0.0);
        for r in 0..rows {
            let cb = c[basis[r]];
            if cb != 0.0 {
                for j in 0..=cols {
                    self.profit[j] -= cb * self.tab[r * w + j];
                }
            }
        }
    }

    pub(crate) fn solve(&mut self, max_iter: usize) -> LpStatus {
        let w = self.cols + 1;
        let mut degenerate_run = 0usize;
        for _ in 0..max_iter {
            let bland = degenerate_run > 2 * (self.rows + 2);
            let mut enter = usize::MAX;
            let mut best = COST_TOL;
            for j in 0..self.cols {
                let p = self.profit[j];
                if p > best {
                    enter = j;
                    if bland {
                        break;
                    }
                    best = p;
                }
            }
            if enter == usize::MAX {
                return LpStatus::Optimal;
            }
            let mut leave = usize::MAX;
            let mut ratio = f64::INFINITY;
            for r in 0..self.rows {
                let a = self.tab[r * w + enter];
                if a > PIVOT_TOL {
                    let q = self.tab[r * w + self.cols] / a;
                    if q < ratio - 1e-15
                        || (q <= ratio + 1e-15
                            && leave != usize::MAX
                            && self.basis[r] < self.basis[leave])
                    {
                        ratio = q;
                        leave = r;
                    }
                }
            }
            if leave == usize::MAX {
                return LpStatus::Unbounded;
            }
            if ratio <= 1e-15 {
                degenerate_run += 1;
            } else {
                degenerate_run = 0;
            }
            self.pivot(leave, enter);
        }
        LpStatus::IterationLimit
    }

    fn pivot(&mut self, row: usize, col: usize) {
        let w = self.cols + 1;
        let piv = self.tab[row * w + col];
        let inv = 1.0 / piv;
        for j in 0..w {
            self.tab[row * w + j] *= inv;
        }
        self.tab[row * w + col] = 1.0;
        let (before, rest) = self.tab.split_at_mut(row * w);
        let (prow, after) = rest.split_at_mut(w);
        for other in before.chunks_mut(w).chain(after.chunks_mut(w)) {
            let f = other[col];
            if f != 0.0 {
                for (o, &p) in other.iter_mut().zip(prow.iter()) {
                    *o -= f * p;
                }
                other[col] = 0.0;
            }
        }
        let f = self.profit[col];
        if f != 0.0 {
            for (o, &p) in self.profit.iter_mut().zip(prow.iter()) {
                *o -= f * p;
            }
            self.profit[col] = 0.0;
        }
        self.basis[row] = col;
    }

    #[cfg(test)]
    pub(crate) fn objective(&self) -> f64 {
        -self.profit[self.cols]
    }

    /// Dual value of the row whose starting basic column was `col` with cost `cost`.
    pub(crate) fn dual(&self, col: usize, cost: f64) -> f64 {
        cost - self.profit[col]
    }

    /// Writes the primal solution into `x` (length `cols`).
    pub(crate) fn primal(&self, x: &mut Vec<f64>) {
        let w = self.cols + 1;
        x.clear();
        x.resize(self.cols, 0.0);
        for r in 0..self.rows {
            x[self.basis[r]] = self.tab[r * w + self.cols].max(0.0);
        }
    }
}

/// Data for the weight-selection program over a fixed set of product inputs.
///
/// Each candidate component `g` carries its three pentagon informations and its
/// `|X||Y|` product-input moments. The program maximizes the worst pentagon
/// margin `t` over nonnegative weights whose mixture reproduces `target`,
/// with marginal mismatch priced at `penalty` per unit of L1 error.
pub(crate) struct WeightProgram<'a> {
    pub rates: &'a [[f64; 3]],
    pub moments: &'a [f64],
    pub target: &'a [f64],
    pub thresholds: [f64; 3],
    pub penalty: f64,
}

#[derive(Debug, Clone)]
pub(crate) struct WeightSolution {
    pub margin: f64,
    pub residual: f64,
    pub weights: Vec<f64>,
    /// Row duals: the three margin rows (absent in the scalar program), then the marginal rows.
    pub duals: Vec<f64>,
    #[cfg_attr(not(test), allow(dead_code))]
    pub status: LpStatus,
}

#[derive(Debug, Default)]
pub(crate) struct WeightSolver {
    lp: Simplex,
    a: Vec<f64>,
    b: Vec<f64>,
    c: Vec<f64>,
    basis: Vec<usize>,
    x: Vec<f64>,
}

impl WeightSolver {
    pub(crate) fn new() -> Self {
        Self::default()
    }

    pub(crate) fn solve(&mut self, prog: &WeightProgram<'_>) -> WeightSolution {
        let g = prog.rates.len();
        let j = prog.target.len();
        debug_assert_eq!(prog.moments.len(), g * j);
        let rows = 3 + j;
        // columns: weights (g), shifted margin (1), slacks u (3), s+ (j), s- (j)
        let cols = g + 1 + 3 + 2 * j;
        let shift = prog.thresholds.iter().map(|c| c.abs()).sum::<f64>() + 1.0;
        self.a.clear();
        self.a.resize(rows * cols, 0.0);
        self.b.clear();
        self.c.clear();
        self.c.resize(cols, 0.0);
        self.basis.clear();
        for k in 0..3 {
            let row = &mut self.a[k * cols..(k + 1) * cols];
            for (q, r) in prog.rates.iter().enumerate() {
                row[q] = -(r[k] - prog.thresholds[k]);
            }
            row[g] = 1.0;
            row[g + 1 + k] = 1.0;
            self.b.push(shift);
            self.basis.push(g + 1 + k);
        }
        for jj in 0..j {
            let row = &mut self.a[(3 + jj) * cols..(4 + jj) * cols];
            for q in 0..g {
                row[q] = prog.moments[q * j + jj];
            }
            row[g + 4 + jj] = 1.0;
            row[g + 4 + j + jj] = -1.0;
            self.b.push(prog.target[jj].max(0.0));
            self.basis.push(g + 4 + jj);
        }
        self.c[g] = 1.0;
        for jj in 0..2 * j {
            self.c[g + 4 + jj] = -prog.penalty;
        }
        self.lp
            .load(rows, cols, &self.a, &self.b, &self.c, &self.basis);
        let status = self.lp.solve(200 * rows + cols);
        self.lp.primal(&mut self.x);
        let residual: f64 = self.x[g + 4..].iter().sum();
        let margin = self.x[g] - shift;
        let mut duals: Vec<f64> = (0..3).map(|k| self.lp.dual(g + 1 + k, 0.0)).collect();
        duals.extend((0..j).map(|jj| self.lp.dual(g + 4 + jj, -prog.penalty)));
        WeightSolution {
            margin,
            residual,
            weights: self.x[..g].to_vec(),
            duals,
            status,
        }
    }
}

impl WeightSolver {
    /// Maximizes `sum_q w_q values_q` over `w >= 0` whose mixture of `moments` reproduces
    /// `target`, with mismatch priced at `penalty` per unit of L1 error.
    pub(crate) fn solve_scalar(
        &mut self,
        values: &[f64],
        moments: &[f64],
        target: &[f64],
        penalty: f64,
    ) -> WeightSolution {
        let g = values.len();
        let j = target.len();
        debug_assert_eq!(moments.len(), g * j);
        // columns: weights (g), s+ (j), s- (j)
        let cols = g + 2 * j;
        self.a.clear();
        self.a.resize(j * cols, 0.0);
        self.b.clear();
        self.c.clear();
        self.c.resize(cols, 0.0);
        self.basis.clear();
        for jj in 0..j {
            let row = &mut self.a[jj * cols..(jj + 1) * cols];
            for q in 0..g {
                row[q] = moments[q * j + jj];
            }
            row[g + jj] = 1.0;
            row[g + j + jj] = -1.0;
            self.b.push(target[jj].max(0.0));
            self.basis.push(g + jj);
        }
        self.c[..g].copy_from_slice(values);
        for x in &mut self.c[g..] {
            *x = -penalty;
        }
        self.lp
            .load(j, cols, &self.a, &self.b, &self.c, &self.basis);
        let status = self.lp.solve(200 * j + cols);
        self.lp.primal(&mut self.x);
        let residual: f64 = self.x[g..].iter().sum();
        let weights = self.x[..g].to_vec();
        let margin = weights.iter().zip(values).map(|(w, v)| w * v).sum();
        let duals = (0..j).map(|jj| self.lp.dual(g + jj, -penalty)).collect();
        WeightSolution {
            margin,
            residual,
            weights,
            duals,
            status,
        }
    }
}
