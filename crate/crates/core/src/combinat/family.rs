use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::CombinatError;
use crate::subspace::IndexSet;

/// `C(n, r)`, saturating at `u128::MAX`.
pub fn binomial(n: usize, r: usize) -> u128 {
    if r > n {
        return 0;
    }
    let r = r.min(n - r);
    let mut acc: u128 = 1;
    for i in 0..r {
        // exact at every step: acc * (n - i) is divisible by (i + 1)
        acc = match acc.checked_mul((n - i) as u128) {
            Some(v) => v / (i as u128 + 1),
            None => return u128::MAX,
        };
    }
    acc
}

/// Distinct size-`s` subsets of `[d]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SetFamily {
    universe: usize,
    set_size: usize,
    members: Vec<IndexSet>,
}

impl SetFamily {
    pub fn new(universe: usize, set_size: usize, members: Vec<IndexSet>) -> Result<Self, CombinatError> {
        let mut seen = std::collections::HashSet::new();
        for (i, m) in members.iter().enumerate() {
            if m.universe() != universe {
                return Err(CombinatError::InvalidFamily(format!("member {i} has universe {}", m.universe())));
            }
            if m.len() != set_size {
                return Err(CombinatError::InvalidFamily(format!("member {i} has size {}, expected {set_size}", m.len())));
            }
            if !seen.insert(m.elements().to_vec()) {
                return Err(CombinatError::InvalidFamily(format!("member {i} is a duplicate")));
            }
        }
        Ok(Self { universe, set_size, members })
    }

    /// Members given as bitmasks over `[d]` (bit `j` is element `j + 1`).
    pub fn from_masks(universe: usize, set_size: usize, masks: &[u64]) -> Result<Self, CombinatError> {
        let members = masks
            .iter()
            .map(|&m| IndexSet::from_zero_based((0..universe).filter(|j| m >> j & 1 == 1), universe))
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| CombinatError::InvalidFamily(e.to_string()))?;
        Self::new(universe, set_size, members)
    }

    pub fn universe(&self) -> usize {
        self.universe
    }

    pub fn set_size(&self) -> usize {
        self.set_size
    }

    pub fn members(&self) -> &[IndexSet] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Header `d s count`, then one set per line as 1-based indices.
    pub fn to_text(&self) -> String {
        let mut out = format!("{} {} {}\n", self.universe, self.set_size, self.members.len());
        for m in &self.members {
            let line: Vec<String> = m.elements().iter().map(|e| e.to_string()).collect();
            let _ = writeln!(out, "{}", line.join(" "));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, CombinatError> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or(CombinatError::Parse { line: 1, msg: "missing header".into() })?;
        let nums = parse_numbers(header, 1)?;
        let [d, s, count] = nums[..] else {
            return Err(CombinatError::Parse { line: 1, msg: "header must be `d s count`".into() });
        };
        let mut members = Vec::with_capacity(count);
        for (i, line) in lines {
            let elems = parse_numbers(line, i + 1)?;
            let set = IndexSet::new(elems, d).map_err(|e| CombinatError::Parse { line: i + 1, msg: e.to_string() })?;
            members.push(set);
        }
        if members.len() != count {
            return Err(CombinatError::Parse { line: 1, msg: format!("header announces {count} sets, found {}", members.len()) });
        }
        Self::new(d, s, members)
    }
}

fn parse_numbers(line: &str, lineno: usize) -> Result<Vec<usize>, CombinatError> {
    line.split_whitespace()
        .map(|t| t.parse::<usize>().map_err(|_| CombinatError::Parse { line: lineno, msg: format!("not an integer: {t:?}") }))
        .collect()
}
