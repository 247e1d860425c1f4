//! Plain-text edge lists and request lists.
//!
//! Edge list: one `tail head time` record per line, plus optional
//! `node: id x y` coordinate records. Request list: `origin destination rate`.
//! Node ids are one-based; lines starting with `~` or `#` are comments.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use super::{Arc, RoadNetwork};
use crate::demand::Request;
use crate::{Error, NodeId, Result};

fn records(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().filter_map(|(idx, line)| {
        let line = line.trim();
        if line.is_empty() || line.starts_with('~') || line.starts_with('#') {
            None
        } else {
            Some((idx + 1, line))
        }
    })
}

fn node_id(token: &str, line: usize) -> Result<NodeId> {
    match token.parse::<usize>() {
        Ok(id) if id >= 1 => Ok(id - 1),
        _ => Err(Error::parse(line, format!("invalid node id {token:?}"))),
    }
}

fn number(token: &str, line: usize) -> Result<f64> {
    token
        .parse::<f64>()
        .map_err(|_| Error::parse(line, format!("invalid number {token:?}")))
}

pub fn parse_edge_list(text: &str) -> Result<RoadNetwork> {
    let mut arcs = Vec::new();
    let mut coords: BTreeMap<NodeId, [f64; 2]> = BTreeMap::new();
    let mut n_nodes = 0usize;
    for (line, rec) in records(text) {
        if let Some(rest) = rec.strip_prefix("node:") {
            let f: Vec<&str> = rest.split_whitespace().collect();
            if f.len() != 3 {
                return Err(Error::parse(line, "expected `node: id x y`"));
            }
            let v = node_id(f[0], line)?;
            coords.insert(v, [number(f[1], line)?, number(f[2], line)?]);
            n_nodes = n_nodes.max(v + 1);
            continue;
        }
        let f: Vec<&str> = rec.split_whitespace().collect();
        if f.len() != 3 {
            return Err(Error::parse(line, "expected `tail head time`"));
        }
        let tail = node_id(f[0], line)?;
        let head = node_id(f[1], line)?;
        let travel_time = number(f[2], line)?;
        n_nodes = n_nodes.max(tail + 1).max(head + 1);
        arcs.push(Arc {
            tail,
            head,
            travel_time,
        });
    }
    let coords = if coords.is_empty() {
        None
    } else {
        if coords.len() != n_nodes {
            let missing = (0..n_nodes).find(|v| !coords.contains_key(v)).unwrap_or(0);
            return Err(Error::InvalidNetwork(format!(
                "coordinates given for some nodes but not for node {}",
                missing + 1
            )));
        }
        Some(coords.into_values().collect())
    };
    RoadNetwork::new(n_nodes, arcs, coords)
}

impl RoadNetwork {
    /// Serializes to the edge-list format; [`parse_edge_list`] reads it back
    /// into an identical network.
    pub fn to_edge_list(&self) -> String {
        let mut out = String::new();
        if let Some(coords) = self.coords() {
            for (v, [x, y]) in coords.iter().enumerate() {
                let _ = writeln!(out, "node: {} {:?} {:?}", v + 1, x, y);
            }
        }
        for arc in self.arcs() {
            let _ = writeln!(out, "{} {} {:?}", arc.tail + 1, arc.head + 1, arc.travel_time);
        }
        out
    }
}

/// Parses `origin destination rate` lines; duplicate OD pairs are summed and
/// intra-zonal or zero-rate entries dropped.
pub fn parse_requests(text: &str, n_nodes: usize) -> Result<Vec<Request>> {
    let mut merged: BTreeMap<(NodeId, NodeId), f64> = BTreeMap::new();
    let mut dropped = 0usize;
    for (line, rec) in records(text) {
        let f: Vec<&str> = rec.split_whitespace().collect();
        if f.len() != 3 {
            return Err(Error::parse(line, "expected `origin destination rate`"));
        }
        let o = node_id(f[0], line)?;
        let d = node_id(f[1], line)?;
        if o >= n_nodes || d >= n_nodes {
            return Err(Error::parse(line, format!("node outside 1..{n_nodes}")));
        }
        let rate = number(f[2], line)?;
        if !rate.is_finite() || rate < 0.0 {
            return Err(Error::parse(line, format!("invalid rate {rate}")));
        }
        if o == d {
            dropped += 1;
            continue;
        }
        if rate > 0.0 {
            *merged.entry((o, d)).or_insert(0.0) += rate;
        }
    }
    if dropped > 0 {
        log::info!("dropped {dropped} request(s) with origin equal to destination");
    }
    Ok(merged
        .into_iter()
        .map(|((o, d), rate)| Request::new_unchecked(o, d, rate))
        .collect())
}

pub fn write_requests(requests: &[Request]) -> String {
    let mut out = String::new();
    for r in requests {
        let _ = writeln!(out, "{} {} {:?}", r.origin + 1, r.destination + 1, r.rate);
    }
    out
}
