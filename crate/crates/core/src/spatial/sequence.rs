use serde::{Deserialize, Serialize};

use super::Bag;
use crate::demand::Request;
use crate::network::ShortestPathTable;
use crate::{NodeId, RequestId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum StopKind {
    Pickup,
    Dropoff,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Stop {
    pub node: NodeId,
    pub request: RequestId,
    pub kind: StopKind,
}

/// Ordered pickups and dropoffs serving every element of a bag.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Sequence {
    stops: Vec<Stop>,
}

impl Sequence {
    pub fn from_stops(stops: Vec<Stop>) -> Self {
        Sequence { stops }
    }

    pub fn stops(&self) -> &[Stop] {
        &self.stops
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.stops.iter().map(|s| s.node)
    }

    /// `(from, to)` node pairs of consecutive stops at distinct nodes.
    pub fn legs(&self) -> Vec<(NodeId, NodeId)> {
        self.stops
            .windows(2)
            .filter(|w| w[0].node != w[1].node)
            .map(|w| (w[0].node, w[1].node))
            .collect()
    }

    /// Pickup and dropoff positions of every request occurrence, sorted by
    /// request. Occurrences of the same request are matched first-in
    /// first-out, which minimises the longest on-board interval among them.
    pub fn occurrence_spans(&self) -> Vec<(RequestId, usize, usize)> {
        let mut pickups: Vec<(RequestId, usize)> = Vec::new();
        let mut dropoffs: Vec<(RequestId, usize)> = Vec::new();
        for (pos, s) in self.stops.iter().enumerate() {
            match s.kind {
                StopKind::Pickup => pickups.push((s.request, pos)),
                StopKind::Dropoff => dropoffs.push((s.request, pos)),
            }
        }
        // Stable sorts keep positional order within a request.
        pickups.sort_by_key(|&(r, _)| r);
        dropoffs.sort_by_key(|&(r, _)| r);
        pickups
            .into_iter()
            .zip(dropoffs)
            .map(|((r, p), (r2, d))| {
                debug_assert_eq!(r, r2);
                (r, p, d)
            })
            .collect()
    }

    /// Checks pickup-before-dropoff per occurrence and a non-empty vehicle
    /// strictly between the first and last stop.
    pub fn is_valid_for(&self, bag: &Bag) -> bool {
        if self.stops.len() != 2 * bag.size() {
            return false;
        }
        for (r, m) in bag.support() {
            let count = |kind| {
                self.stops
                    .iter()
                    .filter(|s| s.request == r && s.kind == kind)
                    .count()
            };
            if count(StopKind::Pickup) != m || count(StopKind::Dropoff) != m {
                return false;
            }
        }
        let mut onboard: Vec<(RequestId, i64)> = bag.support().iter().map(|&(r, _)| (r, 0)).collect();
        let mut occupancy = 0i64;
        let last = self.stops.len() - 1;
        for (pos, s) in self.stops.iter().enumerate() {
            let slot = onboard.iter_mut().find(|(r, _)| *r == s.request);
            let Some((_, n)) = slot else { return false };
            match s.kind {
                StopKind::Pickup => {
                    *n += 1;
                    occupancy += 1;
                }
                StopKind::Dropoff => {
                    *n -= 1;
                    occupancy -= 1;
                    if *n < 0 {
                        return false;
                    }
                }
            }
            if pos < last && occupancy < 1 {
                return false;
            }
        }
        true
    }
}

/// All valid serving sequences of `bag`, without duplicates and in a fixed
/// order: depth-first over stop labels, by request index and pickup before
/// dropoff.
pub fn enumerate_sequences(bag: &Bag, requests: &[Request]) -> Vec<Sequence> {
    let support = bag.support();
    let mut picked = vec![0usize; support.len()];
    let mut dropped = vec![0usize; support.len()];
    let mut stack = Vec::with_capacity(2 * bag.size());
    let mut out = Vec::new();
    extend(
        &support,
        requests,
        2 * bag.size(),
        &mut picked,
        &mut dropped,
        &mut stack,
        &mut out,
    );
    out
}

fn extend(
    support: &[(RequestId, usize)],
    requests: &[Request],
    total: usize,
    picked: &mut [usize],
    dropped: &mut [usize],
    stack: &mut Vec<Stop>,
    out: &mut Vec<Sequence>,
) {
    if stack.len() == total {
        out.push(Sequence::from_stops(stack.clone()));
        return;
    }
    let occupancy: usize = picked.iter().sum::<usize>() - dropped.iter().sum::<usize>();
    for (i, &(r, m)) in support.iter().enumerate() {
        let req = &requests[r];
        if picked[i] < m {
            picked[i] += 1;
            stack.push(Stop {
                node: req.origin,
                request: r,
                kind: StopKind::Pickup,
            });
            extend(support, requests, total, picked, dropped, stack, out);
            stack.pop();
            picked[i] -= 1;
        }
        // A dropoff that empties the vehicle is only allowed as the last stop.
        if dropped[i] < picked[i] && (occupancy > 1 || stack.len() + 1 == total) {
            dropped[i] += 1;
            stack.push(Stop {
                node: req.destination,
                request: r,
                kind: StopKind::Dropoff,
            });
            extend(support, requests, total, picked, dropped, stack, out);
            stack.pop();
            dropped[i] -= 1;
        }
    }
}

/// Vehicle cost and per-occurrence delays of one sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceEvaluation {
    /// Sum of shortest-path times between consecutive stops.
    pub cost: f64,
    /// One delay per bag element, in bag order.
    pub delays: Vec<f64>,
}

pub fn evaluate_sequence(
    seq: &Sequence,
    table: &ShortestPathTable,
    requests: &[Request],
) -> SequenceEvaluation {
    let stops = seq.stops();
    let legs: Vec<f64> = stops
        .windows(2)
        .map(|w| table.dist(w[0].node, w[1].node))
        .collect();
    let cost = legs.iter().sum();
    let delays = seq
        .occurrence_spans()
        .into_iter()
        .map(|(r, p, d)| {
            let ride: f64 = legs[p..d].iter().sum();
            let req = &requests[r];
            (ride - table.dist(req.origin, req.destination)).max(0.0)
        })
        .collect();
    SequenceEvaluation { cost, delays }
}
