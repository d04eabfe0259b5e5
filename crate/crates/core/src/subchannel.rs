//! Subchannel matching between scheduled V2V links and AVs.
//!
//! Each active link borrows the spectrum of at most one AV and each AV lends
//! to at most one link. The matching minimizes the total interference CNR
//! from AV transmitters into link receivers (Hungarian algorithm).

use alloc::vec;
use alloc::vec::Vec;

use crate::channel::{ChannelModel, Endpoint};
use crate::error::Result;
use crate::scenario::{AvSpec, Point};

/// `phi[link][av]`: mean crosstalk gain from the AV transmitter to the link
/// receiver, over the noise power.
pub fn interference_matrix(
    model: &ChannelModel,
    receivers: &[(Endpoint, Point)],
    avs: &[AvSpec],
) -> Result<Vec<Vec<f64>>> {
    receivers
        .iter()
        .map(|&(rx, rx_pos)| {
            avs.iter()
                .map(|av| {
                    let link = model.link(Endpoint::AvTransmitter(av.id), av.transmitter, rx, rx_pos)?;
                    Ok(link.mean() / model.noise())
                })
                .collect()
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    /// `(row, column)` pairs ascending by row.
    pub pairs: Vec<(usize, usize)>,
    pub total: f64,
}

impl Assignment {
    pub fn column_of(&self, row: usize) -> Option<usize> {
        self.pairs.iter().find(|p| p.0 == row).map(|p| p.1)
    }
}

/// Minimum-cost matching of size `min(rows, cols)`.
///
/// Among optimal matchings the one chosen fixes rows in ascending order to
/// their smallest admissible column.
pub fn assign(cost: &[Vec<f64>]) -> Assignment {
    let rows = cost.len();
    let cols = cost.first().map_or(0, Vec::len);
    if rows == 0 || cols == 0 {
        return Assignment {
            pairs: Vec::new(),
            total: 0.0,
        };
    }
    let all_rows: Vec<usize> = (0..rows).collect();
    let all_cols: Vec<usize> = (0..cols).collect();
    let opt = min_cost(cost, &all_rows, &all_cols);
    let tol = |v: f64| (v - opt).abs() <= 1e-12 * (1.0 + opt.abs());

    let mut free_cols = all_cols;
    let mut fixed = 0.0;
    let mut pairs = Vec::new();
    for r in 0..rows {
        let rest: Vec<usize> = ((r + 1)..rows).collect();
        let slots = free_cols.len();
        let mut chosen = None;
        for (ci, &c) in free_cols.iter().enumerate() {
            let mut remaining = free_cols.clone();
            remaining.remove(ci);
            let sub = min_cost(cost, &rest, &remaining);
            if tol(fixed + cost[r][c] + sub) {
                chosen = Some(ci);
                break;
            }
        }
        match chosen {
            Some(ci) if slots > 0 => {
                let c = free_cols.remove(ci);
                fixed += cost[r][c];
                pairs.push((r, c));
            }
            // more rows than columns and this row sits out
            _ => {}
        }
    }
    let total = pairs.iter().map(|&(r, c)| cost[r][c]).sum();
    Assignment { pairs, total }
}

/// Optimal cost of matching the given rows and columns (size `min`).
fn min_cost(cost: &[Vec<f64>], rows: &[usize], cols: &[usize]) -> f64 {
    if rows.is_empty() || cols.is_empty() {
        return 0.0;
    }
    let n = rows.len().max(cols.len());
    // zero padding: every completion of a real matching costs the same
    let mut m = vec![vec![0.0; n]; n];
    for (i, &r) in rows.iter().enumerate() {
        for (j, &c) in cols.iter().enumerate() {
            m[i][j] = cost[r][c];
        }
    }
    let assignment = hungarian(&m);
    assignment
        .iter()
        .enumerate()
        .filter(|&(i, &j)| i < rows.len() && j < cols.len())
        .map(|(i, &j)| m[i][j])
        .sum()
}

/// Square Hungarian algorithm with potentials; returns the column of each row.
pub fn hungarian(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    let inf = f64::INFINITY;
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut out = vec![0; n];
    for j in 1..=n {
        out[p[j] - 1] = j - 1;
    }
    out
}
