//! Inverse-CDF uniformisation of conditional tables.
//!
//! A conditional `P(X | parents)` becomes `X = f(parents, U)` with
//! `U ~ Uniform[0, 1)`: for each parent row, value `x` owns the interval
//! `[F(x-1), F(x))`. For the exact engine the uniform noise is quantised into
//! the atoms of the common refinement of every row's breakpoints, so each atom
//! maps to exactly one value in every row and atom lengths are the noise
//! probabilities.

use super::{Mechanism, NoiseSpec};
use crate::error::{Error, Result};

const ROW_TOL: f64 = 1e-9;
/// Breakpoints closer than this are merged.
const MERGE_TOL: f64 = 1e-14;

/// Rows are indexed by the flattened parent tuple (row-major, parents in declared order).
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalTable {
    pub support: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Uniformized {
    /// Per row, the upper CDF bound of each value (last entry is exactly 1).
    pub cdf: Vec<Vec<f64>>,
    /// Sorted atom boundaries, starting at 0 and ending at 1.
    pub breakpoints: Vec<f64>,
    pub noise: NoiseSpec,
    /// Row-major `rows × atoms` table of value indices.
    pub table: Vec<usize>,
}

impl Uniformized {
    pub fn n_rows(&self) -> usize {
        self.cdf.len()
    }

    pub fn n_atoms(&self) -> usize {
        self.breakpoints.len() - 1
    }

    /// `f(row, u)`: the smallest value whose CDF exceeds `u`.
    pub fn inverse_cdf(&self, row: usize, u: f64) -> usize {
        inverse_cdf(&self.cdf[row], u)
    }

    pub fn mechanism(&self, node: impl Into<String>, parents: Vec<String>) -> Mechanism {
        Mechanism::new(node, parents, self.noise.id.clone(), self.table.clone())
    }

    /// Conditional induced by the quantised noise: per row, the total atom mass mapped to each value.
    pub fn reconstruct(&self, n_values: usize) -> Vec<Vec<f64>> {
        let atoms = self.n_atoms();
        (0..self.n_rows())
            .map(|r| {
                let mut row = vec![0.0; n_values];
                for a in 0..atoms {
                    row[self.table[r * atoms + a]] += self.noise.probs[a];
                }
                row
            })
            .collect()
    }
}

pub(crate) fn inverse_cdf(cdf: &[f64], u: f64) -> usize {
    for (x, c) in cdf.iter().enumerate() {
        if u < *c {
            return x;
        }
    }
    // u at or beyond 1 through rounding: the last value with positive mass
    let mut last = cdf.len() - 1;
    while last > 0 && cdf[last] <= cdf[last - 1] {
        last -= 1;
    }
    last
}

pub(crate) fn row_cdf(row: &[f64], index: usize) -> Result<Vec<f64>> {
    if row.is_empty() {
        return Err(Error::InvalidConditional { row: index, sum: 0.0 });
    }
    if row.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
        return Err(Error::InvalidConditional { row: index, sum: row.iter().sum() });
    }
    let sum: f64 = row.iter().sum();
    if (sum - 1.0).abs() > ROW_TOL {
        return Err(Error::InvalidConditional { row: index, sum });
    }
    let mut acc = 0.0;
    let mut cdf: Vec<f64> = row
        .iter()
        .map(|p| {
            acc += p;
            acc.min(1.0)
        })
        .collect();
    // trailing zero-mass values must not extend past the last positive one
    let last_pos = row.iter().rposition(|p| *p > 0.0).unwrap_or(0);
    for c in cdf.iter_mut().skip(last_pos) {
        *c = 1.0;
    }
    Ok(cdf)
}

/// Sorted union of the given points with 0 and 1, merging near-duplicates.
pub(crate) fn merge_breakpoints(points: impl IntoIterator<Item = f64>) -> Vec<f64> {
    let mut pts: Vec<f64> = points.into_iter().filter(|p| *p > 0.0 && *p < 1.0).collect();
    pts.push(0.0);
    pts.push(1.0);
    pts.sort_by(|a, b| a.partial_cmp(b).expect("finite breakpoints"));
    let mut out: Vec<f64> = Vec::with_capacity(pts.len());
    for p in pts {
        match out.last() {
            Some(l) if p - l <= MERGE_TOL => {
                if p == 1.0 {
                    *out.last_mut().unwrap() = 1.0;
                }
            }
            _ => out.push(p),
        }
    }
    if out.len() == 1 {
        out.push(1.0);
    }
    out
}

pub fn uniformize(noise_id: impl Into<String>, conditional: &ConditionalTable) -> Result<Uniformized> {
    uniformize_with_breakpoints(noise_id, conditional, &[])
}

/// Like [`uniformize`], but the quantisation also refines at `extra` points, so
/// that several conditionals can share one noise variable.
pub fn uniformize_with_breakpoints(
    noise_id: impl Into<String>,
    conditional: &ConditionalTable,
    extra: &[f64],
) -> Result<Uniformized> {
    let n_values = conditional.support.len();
    let mut cdf = Vec::with_capacity(conditional.rows.len());
    for (i, row) in conditional.rows.iter().enumerate() {
        if row.len() != n_values {
            return Err(Error::Input(format!("row {i} has {} entries, support has {n_values}", row.len())));
        }
        cdf.push(row_cdf(row, i)?);
    }
    let breakpoints = merge_breakpoints(cdf.iter().flatten().copied().chain(extra.iter().copied()));
    let atoms = breakpoints.len() - 1;
    let probs: Vec<f64> = breakpoints.windows(2).map(|w| w[1] - w[0]).collect();
    let support: Vec<String> = (0..atoms).map(|a| format!("q{a}")).collect();
    let noise_id = noise_id.into();
    let noise = NoiseSpec { id: noise_id, support, probs };
    let mut table = Vec::with_capacity(cdf.len() * atoms);
    for row in &cdf {
        for w in breakpoints.windows(2) {
            table.push(inverse_cdf(row, 0.5 * (w[0] + w[1])));
        }
    }
    Ok(Uniformized { cdf, breakpoints, noise, table })
}
