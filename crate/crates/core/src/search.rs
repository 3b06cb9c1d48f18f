use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Knobs shared by the region search and the exponent solvers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchOptions {
    /// Grid points per free coordinate, minus one (the simplex lattice denominator).
    pub grid_resolution: usize,
    pub multistart_count: usize,
    pub seed: u64,
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self {
            grid_resolution: 4,
            multistart_count: 64,
            seed: 0,
            tolerance: 1e-6,
            max_iterations: 4000,
        }
    }
}

impl SearchOptions {
    pub fn validate(&self) -> Result<()> {
        if self.grid_resolution == 0 || self.multistart_count == 0 || self.max_iterations == 0 {
            return Err(Error::InvalidParameter(
                "grid_resolution, multistart_count and max_iterations must be positive".into(),
            ));
        }
        if !(self.tolerance > 0.0 && self.tolerance <= 1e-2) {
            return Err(Error::InvalidParameter(format!(
                "tolerance must lie in (0, 1e-2], got {}",
                self.tolerance
            )));
        }
        Ok(())
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

/// All points of the simplex lattice `{k / res}` in dimension `dim`, in decreasing lexicographic order.
pub(crate) fn simplex_lattice(dim: usize, res: usize) -> Vec<Vec<f64>> {
    let mut out = Vec::new();
    if dim == 0 {
        return out;
    }
    let mut counts = vec![0usize; dim];
    fn rec(pos: usize, left: usize, res: usize, counts: &mut [usize], out: &mut Vec<Vec<f64>>) {
        let dim = counts.len();
        if pos == dim - 1 {
            counts[pos] = left;
            out.push(counts.iter().map(|&c| c as f64 / res as f64).collect());
            return;
        }
        for c in (0..=left).rev() {
            counts[pos] = c;
            rec(pos + 1, left - c, res, counts, out);
        }
    }
    rec(0, res, res, &mut counts, &mut out);
    out
}
