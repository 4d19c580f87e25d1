//! Integer partitions and their shifted parts.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Weakly decreasing positive parts; trailing zeros are stripped on construction.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(try_from = "Vec<u32>", into = "Vec<u32>")]
pub struct Partition {
    parts: Vec<u32>,
}

impl Partition {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn new(mut parts: Vec<u32>) -> Result<Self> {
        if parts.windows(2).any(|w| w[0] < w[1]) {
            return Err(Error::NotAPartition(parts));
        }
        while parts.last() == Some(&0) {
            parts.pop();
        }
        Ok(Self { parts })
    }

    pub fn parts(&self) -> &[u32] {
        &self.parts
    }

    pub fn weight(&self) -> u32 {
        self.parts.iter().sum()
    }

    /// Number of nonzero parts.
    pub fn len(&self) -> usize {
        self.parts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parts.is_empty()
    }

    /// Part `i` (0-based), zero past the end.
    pub fn part(&self, i: usize) -> u32 {
        self.parts.get(i).copied().unwrap_or(0)
    }

    pub fn conjugate(&self) -> Self {
        let first = self.part(0);
        let parts = (1..=first).map(|k| self.parts.iter().take_while(|&&p| p >= k).count() as u32).collect();
        Self { parts }
    }

    pub fn is_even(&self) -> bool {
        self.parts.iter().all(|p| p % 2 == 0)
    }

    /// h_i = λ_i − i + n for i = 1..n.
    pub fn shifted_indices(&self, n: usize) -> Result<Vec<i64>> {
        if self.len() > n {
            return Err(Error::PartitionTooLong { length: self.len(), n });
        }
        Ok((0..n).map(|i| self.part(i) as i64 - (i as i64 + 1) + n as i64).collect())
    }
}

/// Canonical order: by weight, then reverse-lexicographic parts, so (2) precedes (1,1).
impl Ord for Partition {
    fn cmp(&self, other: &Self) -> Ordering {
        self.weight().cmp(&other.weight()).then_with(|| other.parts.cmp(&self.parts))
    }
}

impl PartialOrd for Partition {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Partition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, p) in self.parts.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{p}")?;
        }
        write!(f, ")")
    }
}

impl TryFrom<Vec<u32>> for Partition {
    type Error = Error;
    fn try_from(parts: Vec<u32>) -> Result<Self> {
        Self::new(parts)
    }
}

impl From<Partition> for Vec<u32> {
    fn from(p: Partition) -> Self {
        p.parts
    }
}

/// Every partition with weight ≤ `max_weight` and length ≤ `max_length`, in canonical order.
pub fn enumerate_partitions(max_weight: u32, max_length: usize) -> Vec<Partition> {
    let mut out = vec![Partition::empty()];
    for w in 1..=max_weight {
        let mut cur = Vec::new();
        fill(w, w, max_length, &mut cur, &mut out);
    }
    out
}

// Emits partitions of `rem` with parts ≤ `cap` in reverse-lex order.
fn fill(rem: u32, cap: u32, max_length: usize, cur: &mut Vec<u32>, out: &mut Vec<Partition>) {
    if rem == 0 {
        out.push(Partition { parts: cur.clone() });
        return;
    }
    if cur.len() == max_length {
        return;
    }
    for p in (1..=cap.min(rem)).rev() {
        cur.push(p);
        fill(rem - p, p, max_length, cur, out);
        cur.pop();
    }
}
