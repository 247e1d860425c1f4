//! Travel requests and node-balance demand matrices.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::{Error, NodeId, Result};

/// Users per hour travelling from `origin` to `destination`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Request {
    pub origin: NodeId,
    pub destination: NodeId,
    /// Requests per hour, strictly positive.
    pub rate: f64,
}

impl Request {
    pub fn new(origin: NodeId, destination: NodeId, rate: f64) -> Result<Self> {
        if origin == destination {
            return Err(Error::InvalidDemand(format!(
                "request origin equals destination ({})",
                origin + 1
            )));
        }
        if !(rate.is_finite() && rate > 0.0) {
            return Err(Error::InvalidDemand(format!(
                "request rate must be positive, got {rate}"
            )));
        }
        Ok(Self::new_unchecked(origin, destination, rate))
    }

    pub(crate) fn new_unchecked(origin: NodeId, destination: NodeId, rate: f64) -> Self {
        Request {
            origin,
            destination,
            rate,
        }
    }
}

pub fn total_demand(requests: &[Request]) -> f64 {
    requests.iter().map(|r| r.rate).sum()
}

/// `|V| x |V|` matrix with column = origin and row = destination. Off-diagonal
/// entries are the OD rates and each diagonal entry is minus its column's
/// off-diagonal sum, so every column sums to zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemandMatrix {
    n: usize,
    entries: Vec<f64>,
}

impl DemandMatrix {
    pub fn zeros(n: usize) -> Self {
        DemandMatrix {
            n,
            entries: vec![0.0; n * n],
        }
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    /// Entry at row `i` (destination), column `j` (origin).
    #[inline]
    pub fn get(&self, i: NodeId, j: NodeId) -> f64 {
        self.entries[i * self.n + j]
    }

    /// Adds `rate` of demand from `origin` to `destination`, keeping the
    /// column balanced. A no-op when `origin == destination`.
    pub fn add_flow(&mut self, origin: NodeId, destination: NodeId, rate: f64) {
        if origin == destination {
            return;
        }
        self.entries[destination * self.n + origin] += rate;
        self.entries[origin * self.n + origin] -= rate;
    }

    /// `self += factor * other`.
    pub fn add_scaled(&mut self, factor: f64, other: &DemandMatrix) {
        assert_eq!(self.n, other.n, "demand matrix size mismatch");
        for (a, b) in self.entries.iter_mut().zip(&other.entries) {
            *a += factor * b;
        }
    }

    /// Positive off-diagonal entries as `(origin, destination, rate)`, ordered
    /// by origin then destination.
    pub fn od_entries(&self) -> impl Iterator<Item = (NodeId, NodeId, f64)> + '_ {
        let n = self.n;
        (0..n).flat_map(move |j| {
            (0..n).filter_map(move |i| {
                let v = self.get(i, j);
                (i != j && v > 0.0).then_some((j, i, v))
            })
        })
    }

    pub fn column_sums(&self) -> Vec<f64> {
        let mut sums = vec![0.0; self.n];
        for i in 0..self.n {
            for (j, s) in sums.iter_mut().enumerate() {
                *s += self.get(i, j);
            }
        }
        sums
    }

    /// `D 1`: net demand arriving at each node (destination mass minus origin
    /// mass).
    pub fn row_sums(&self) -> Vec<f64> {
        self.entries
            .chunks(self.n.max(1))
            .map(|row| row.iter().sum())
            .collect()
    }

    pub fn total(&self) -> f64 {
        self.entries.iter().sum()
    }

    /// Sum of the off-diagonal entries.
    pub fn off_diagonal_mass(&self) -> f64 {
        let mut s = 0.0;
        for i in 0..self.n {
            for j in 0..self.n {
                if i != j {
                    s += self.get(i, j);
                }
            }
        }
        s
    }

    /// Largest violation of the column-sum, sign, and diagonal invariants.
    pub fn invariant_violation(&self) -> f64 {
        let mut worst = self
            .column_sums()
            .iter()
            .fold(0.0f64, |m, s| m.max(s.abs()));
        for i in 0..self.n {
            for j in 0..self.n {
                let v = self.get(i, j);
                if i == j {
                    worst = worst.max(v);
                } else {
                    worst = worst.max(-v);
                }
            }
        }
        worst
    }
}

/// Builds the demand matrix of a request set. Nodes are zero-based.
pub fn build_demand_matrix(requests: &[Request], n_nodes: usize) -> Result<DemandMatrix> {
    let mut seen = HashSet::with_capacity(requests.len());
    let mut d = DemandMatrix::zeros(n_nodes);
    for r in requests {
        if r.origin >= n_nodes || r.destination >= n_nodes {
            return Err(Error::InvalidDemand(format!(
                "request ({}, {}) outside 1..{}",
                r.origin + 1,
                r.destination + 1,
                n_nodes
            )));
        }
        if r.origin == r.destination || !(r.rate > 0.0) {
            return Err(Error::InvalidDemand(format!(
                "invalid request ({}, {}, {})",
                r.origin + 1,
                r.destination + 1,
                r.rate
            )));
        }
        if !seen.insert((r.origin, r.destination)) {
            return Err(Error::InvalidDemand(format!(
                "duplicate OD pair ({}, {}); merge requests first",
                r.origin + 1,
                r.destination + 1
            )));
        }
        d.add_flow(r.origin, r.destination, r.rate);
    }
    Ok(d)
}

pub fn scale_requests(requests: &[Request], factor: f64) -> Result<Vec<Request>> {
    if !(factor.is_finite() && factor > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "demand scale factor must be positive, got {factor}"
        )));
    }
    Ok(requests
        .iter()
        .map(|r| Request {
            rate: r.rate * factor,
            ..*r
        })
        .collect())
}
