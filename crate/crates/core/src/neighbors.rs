//! Neighbouring sets `N_s` and their sample-based estimate.

use std::fmt::Write as _;

use crate::mdp::TabularMdp;
use crate::{Error, Result};

/// Per-state sorted set of successor states.
///
/// A state with no recorded successors is "unvisited"; lookups through
/// [`NeighborTable::effective`] fall back to `{s}` so that every set used in a
/// backup is non-empty.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NeighborTable {
    sets: Vec<Vec<usize>>,
    ids: Vec<usize>,
}

impl NeighborTable {
    pub fn new(n_states: usize) -> Self {
        Self {
            sets: vec![Vec::new(); n_states],
            ids: (0..n_states).collect(),
        }
    }

    /// Every state neighbours every state (`N_s = S`).
    pub fn complete(n_states: usize) -> Self {
        let all: Vec<usize> = (0..n_states).collect();
        Self {
            sets: vec![all; n_states],
            ids: (0..n_states).collect(),
        }
    }

    pub fn from_sets(sets: Vec<Vec<usize>>) -> Result<Self> {
        let n = sets.len();
        let mut table = Self::new(n);
        for (s, set) in sets.into_iter().enumerate() {
            for next in set {
                if next >= n {
                    return Err(Error::Index {
                        what: "neighbour",
                        index: next,
                        size: n,
                    });
                }
                table.insert(s, next);
            }
        }
        Ok(table)
    }

    pub fn n_states(&self) -> usize {
        self.sets.len()
    }

    /// Adds `next` to `N_s`; returns whether it was new.
    pub fn insert(&mut self, s: usize, next: usize) -> bool {
        let set = &mut self.sets[s];
        match set.binary_search(&next) {
            Ok(_) => false,
            Err(pos) => {
                set.insert(pos, next);
                true
            }
        }
    }

    /// Recorded neighbours of `s` (possibly empty).
    pub fn get(&self, s: usize) -> &[usize] {
        &self.sets[s]
    }

    /// Recorded neighbours of `s`, or `{s}` if none were recorded.
    #[inline]
    pub fn effective(&self, s: usize) -> &[usize] {
        let set = &self.sets[s];
        if set.is_empty() {
            std::slice::from_ref(&self.ids[s])
        } else {
            set
        }
    }

    pub fn contains(&self, s: usize, next: usize) -> bool {
        self.sets[s].binary_search(&next).is_ok()
    }

    pub fn is_visited(&self, s: usize) -> bool {
        !self.sets[s].is_empty()
    }

    pub fn visited_states(&self) -> Vec<usize> {
        (0..self.sets.len()).filter(|&s| self.is_visited(s)).collect()
    }

    /// `N_s ⊆ other.N_s` for every state.
    pub fn is_subset_of(&self, other: &NeighborTable) -> bool {
        self.sets.len() == other.sets.len()
            && self
                .sets
                .iter()
                .enumerate()
                .all(|(s, set)| set.iter().all(|&n| other.contains(s, n)))
    }

    /// `max_{s' in N_s} v(s')` over the effective set.
    #[inline]
    pub fn max_value(&self, s: usize, v: &[f64]) -> f64 {
        self.effective(s).iter().map(|&n| v[n]).fold(f64::NEG_INFINITY, f64::max)
    }

    /// Lowest-index argmax of `v` over the effective set of `s`.
    pub fn argmax(&self, s: usize, v: &[f64]) -> usize {
        let set = self.effective(s);
        let mut best = set[0];
        for &n in &set[1..] {
            if v[n] > v[best] {
                best = n;
            }
        }
        best
    }

    /// One line per state: `s: n1 n2 ...`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (s, set) in self.sets.iter().enumerate() {
            let _ = write!(out, "{s}:");
            for n in set {
                let _ = write!(out, " {n}");
            }
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut sets = Vec::new();
        for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let (head, rest) = line
                .split_once(':')
                .ok_or_else(|| Error::parse(i + 1, "expected `state: neighbours`"))?;
            let s: usize = head.trim().parse().map_err(|_| Error::parse(i + 1, "bad state index"))?;
            if s != sets.len() {
                return Err(Error::parse(i + 1, "states must be listed in order"));
            }
            let set = rest
                .split_whitespace()
                .map(|t| t.parse::<usize>().map_err(|_| Error::parse(i + 1, format!("bad index `{t}`"))))
                .collect::<Result<Vec<_>>>()?;
            sets.push(set);
        }
        Self::from_sets(sets)
    }
}

/// `N̂_s` = union of observed successors of `s`.
///
/// Only observed successors are stored; unvisited states resolve to `{s}`
/// through [`NeighborTable::effective`].
pub fn estimate_neighbors(n_states: usize, transitions: impl IntoIterator<Item = (usize, usize)>) -> Result<NeighborTable> {
    let mut table = NeighborTable::new(n_states);
    for (s, next) in transitions {
        if s >= n_states || next >= n_states {
            return Err(Error::Index {
                what: "state",
                index: s.max(next),
                size: n_states,
            });
        }
        table.insert(s, next);
    }
    Ok(table)
}

/// `N_s` read off a kernel: every successor with positive probability under
/// some action.
pub fn kernel_neighbors(mdp: &TabularMdp) -> NeighborTable {
    let mut table = NeighborTable::new(mdp.n_states());
    for s in 0..mdp.n_states() {
        for a in 0..mdp.n_actions() {
            for (next, &p) in mdp.row(s, a).iter().enumerate() {
                if p > 0.0 {
                    table.insert(s, next);
                }
            }
        }
    }
    table
}

/// Per state: does `N̂_s` contain the (lowest-index) maximiser of `V*` over `N_s`?
pub fn check_assumption2(estimate: &NeighborTable, truth: &NeighborTable, v_star: &[f64]) -> Vec<bool> {
    (0..truth.n_states())
        .map(|s| {
            let target = truth.argmax(s, v_star);
            estimate.effective(s).contains(&target)
        })
        .collect()
}
