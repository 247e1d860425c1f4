use std::fmt;

use serde::{Deserialize, Serialize};

use crate::RequestId;

/// Multiset of request indices, stored sorted so equal bags compare equal.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Bag(Vec<RequestId>);

impl Bag {
    pub fn new(mut elements: Vec<RequestId>) -> Self {
        elements.sort_unstable();
        Bag(elements)
    }

    /// `|C|`, counting multiplicity.
    pub fn size(&self) -> usize {
        self.0.len()
    }

    /// Sorted elements, repeated according to multiplicity.
    pub fn elements(&self) -> &[RequestId] {
        &self.0
    }

    pub fn multiplicity(&self, r: RequestId) -> usize {
        self.0.iter().filter(|&&e| e == r).count()
    }

    /// Distinct elements with their multiplicities, ascending.
    pub fn support(&self) -> Vec<(RequestId, usize)> {
        let mut out: Vec<(RequestId, usize)> = Vec::new();
        for &e in &self.0 {
            match out.last_mut() {
                Some((last, m)) if *last == e => *m += 1,
                _ => out.push((e, 1)),
            }
        }
        out
    }
}

impl fmt::Display for Bag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for (i, e) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{}", e + 1)?;
        }
        write!(f, "]")
    }
}

/// `C(m + k - 1, k)`: bags of exactly `k` elements drawn from `m` requests.
pub fn layer_size(m: usize, k: usize) -> u128 {
    if k == 0 {
        return 1;
    }
    if m == 0 {
        return 0;
    }
    let mut acc: u128 = 1;
    for i in 0..k as u128 {
        acc = acc.saturating_mul(m as u128 + i) / (i + 1);
    }
    acc
}

/// Total number of bags with 1..=k_max elements.
pub fn bag_count(m: usize, k_max: usize) -> u128 {
    (1..=k_max).map(|k| layer_size(m, k)).fold(0, u128::saturating_add)
}

/// Combinations with repetition of exactly `k` elements of `0..m`, in
/// lexicographic order.
#[derive(Debug, Clone)]
pub struct Layer {
    m: usize,
    current: Option<Vec<RequestId>>,
}

impl Layer {
    pub fn new(m: usize, k: usize) -> Self {
        let current = (m > 0 && k > 0).then(|| vec![0; k]);
        Layer { m, current }
    }
}

impl Iterator for Layer {
    type Item = Bag;

    fn next(&mut self) -> Option<Bag> {
        let cur = self.current.as_mut()?;
        let out = Bag(cur.clone());
        // Advance: bump the rightmost element below m-1, reset the tail to it.
        match cur.iter().rposition(|&e| e + 1 < self.m) {
            Some(pos) => {
                let v = cur[pos] + 1;
                for e in &mut cur[pos..] {
                    *e = v;
                }
            }
            None => self.current = None,
        }
        Some(out)
    }
}

/// Every bag of 1..=k_max elements of `0..m`, by increasing size and then
/// lexicographically.
pub fn enumerate_bags(m: usize, k_max: usize) -> impl Iterator<Item = Bag> {
    (1..=k_max).flat_map(move |k| Layer::new(m, k))
}
