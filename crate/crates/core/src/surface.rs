//! Exponent values over a rectangular grid of rate pairs.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exponent::{haroutunian_exponent, sphere_packing_exponent, Method};
use crate::mac::{Mac, RatePair};
use crate::oracle::exponent_grid_oracle;
use crate::report::{format_sig, CSV_DIGITS};
use crate::search::SearchOptions;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurfaceRow {
    pub r1: f64,
    pub r2: f64,
    pub value: f64,
    pub method: Method,
    pub converged: bool,
}

/// Cells in row-major order: `r1` is the slow index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Surface {
    pub r1_grid: Vec<f64>,
    pub r2_grid: Vec<f64>,
    pub rows: Vec<SurfaceRow>,
}

impl Surface {
    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.rows[i * self.r2_grid.len() + j].value
    }

    /// CSV with header `r1,r2,value,method,converged`, floats at 9 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("r1,r2,value,method,converged\n");
        for row in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                format_sig(row.r1, CSV_DIGITS),
                format_sig(row.r2, CSV_DIGITS),
                format_sig(row.value, CSV_DIGITS),
                row.method.as_str(),
                row.converged
            ));
        }
        out
    }
}

fn check_grid(name: &str, grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::InvalidParameter(format!("{name} grid is empty")));
    }
    if let Some(x) = grid.iter().find(|x| !x.is_finite() || **x < 0.0) {
        return Err(Error::InvalidParameter(format!(
            "{name} grid has invalid rate {x}"
        )));
    }
    if grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidParameter(format!(
            "{name} grid is not sorted"
        )));
    }
    Ok(())
}

/// One exponent per grid cell. `Method::GridOracle` evaluates the sphere-packing
/// exponent on the grid oracle at `opts.grid_resolution`.
pub fn exponent_surface(
    w: &Mac,
    r1_grid: &[f64],
    r2_grid: &[f64],
    method: Method,
    opts: &SearchOptions,
) -> Result<Surface> {
    check_grid("r1", r1_grid)?;
    check_grid("r2", r2_grid)?;
    opts.validate()?;
    let cells: Vec<(f64, f64)> = r1_grid
        .iter()
        .flat_map(|&a| r2_grid.iter().map(move |&b| (a, b)))
        .collect();
    // collect keeps cell order whatever the completion order
    let rows = cells
        .par_iter()
        .map(|&(r1, r2)| {
            let r = RatePair::new(r1, r2)?;
            let res = match method {
                Method::Haroutunian => haroutunian_exponent(w, &r, opts)?,
                Method::SpherePacking => sphere_packing_exponent(w, &r, opts)?,
                Method::GridOracle => {
                    exponent_grid_oracle(w, &r, Method::SpherePacking, opts.grid_resolution)?
                }
            };
            Ok(SurfaceRow {
                r1,
                r2,
                value: res.value,
                method,
                converged: res.converged,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Surface {
        r1_grid: r1_grid.to_vec(),
        r2_grid: r2_grid.to_vec(),
        rows,
    })
}

/// `count` evenly spaced points from `start` to `stop` inclusive.
pub fn linspace(start: f64, stop: f64, count: usize) -> Result<Vec<f64>> {
    if count == 0 || !start.is_finite() || !stop.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "bad range {start}:{stop}:{count}"
        )));
    }
    if stop < start {
        return Err(Error::InvalidParameter(format!(
            "inverted range {start}:{stop}"
        )));
    }
    if count == 1 {
        return Ok(vec![start]);
    }
    let step = (stop - start) / (count - 1) as f64;
    Ok((0..count)
        .map(|i| {
            if i + 1 == count {
                stop
            } else {
                start + step * i as f64
            }
        })
        .collect())
}
