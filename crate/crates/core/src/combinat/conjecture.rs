//! Families of `s`-subsets of `[d]` in which no `k` members (repetition
//! allowed) can be perfectly `(s - t)`-matched.

use std::cell::Cell;
use std::f64::consts::E;

use super::matching::has_perfect_matching;
use super::{binomial, CombinatError, SetFamily};
use crate::subspace::IndexSet;

/// Largest `C(d, s)` enumerated by [`fi_family`] and the vacuous case.
const MAX_ENUMERATED: u128 = 1 << 20;
/// Limits of the exact search.
pub const MAX_SEARCH_SETS: u128 = 80;
pub const MAX_SEARCH_D: usize = 8;

#[derive(Debug, Clone, PartialEq)]
pub struct FamilyBounds {
    /// `|F_i|` for `i = 1..=s-t`.
    pub sizes: Vec<u128>,
    pub exact_max_fi: u128,
    /// Maximizing `i`, if the range is nonempty.
    pub best_i: Option<usize>,
    /// `(e k s / d)^(t+1) C(d, s)`.
    pub closed_form: f64,
}

fn prefix_len(d: usize, k: usize, i: usize) -> usize {
    (i * k).saturating_sub(1).min(d)
}

/// `|F_i| = sum_{j >= t+i} C(m, j) C(d-m, s-j)` with `m = min(ik-1, d)`.
fn fi_size(d: usize, s: usize, k: usize, t: usize, i: usize) -> u128 {
    let m = prefix_len(d, k, i);
    (t + i..=s.min(m)).map(|j| binomial(m, j).saturating_mul(binomial(d - m, s - j))).fold(0u128, u128::saturating_add)
}

pub fn conjectured_family_bounds(d: usize, s: usize, k: usize, t: usize) -> FamilyBounds {
    let sizes: Vec<u128> = (1..=s.saturating_sub(t)).map(|i| fi_size(d, s, k, t, i)).collect();
    let (best_i, exact_max_fi) = sizes
        .iter()
        .enumerate()
        .fold((None, 0u128), |(bi, bv), (i, &v)| if bi.is_none() || v > bv { (Some(i + 1), v) } else { (bi, bv) });
    let closed_form = if d == 0 { 0.0 } else { (E * (k * s) as f64 / d as f64).powi(t as i32 + 1) * binomial(d, s) as f64 };
    FamilyBounds { sizes, exact_max_fi, best_i, closed_form }
}

/// All `s`-subsets of `[d]` as bitmasks, in lexicographic order of their
/// sorted elements.
fn all_subsets(d: usize, s: usize) -> Vec<u64> {
    fn rec(start: usize, d: usize, left: usize, mask: u64, out: &mut Vec<u64>) {
        if left == 0 {
            out.push(mask);
            return;
        }
        for e in start..=d - left {
            rec(e + 1, d, left - 1, mask | 1 << e, out);
        }
    }
    let mut out = Vec::new();
    if s <= d {
        rec(0, d, s, 0, &mut out);
    }
    out
}

fn check_enumerable(d: usize, s: usize) -> Result<(), CombinatError> {
    if d > 64 || binomial(d, s) > MAX_ENUMERATED {
        return Err(CombinatError::TooLarge(format!("C({d}, {s}) subsets")));
    }
    Ok(())
}

/// `F_i = {S : |S ∩ [min(ik-1, d)]| >= t + i}`.
pub fn fi_family(d: usize, s: usize, k: usize, t: usize, i: usize) -> Result<SetFamily, CombinatError> {
    check_enumerable(d, s)?;
    let m = prefix_len(d, k, i);
    let prefix = if m == 64 { u64::MAX } else { (1u64 << m) - 1 };
    let masks: Vec<u64> = all_subsets(d, s).into_iter().filter(|&x| (x & prefix).count_ones() as usize >= t + i).collect();
    SetFamily::from_masks(d, s, &masks)
}

/// Incremental bipartite matching between copies of sets (left) and
/// elements of `[d]` (right), for `d <= 64`.
#[derive(Clone)]
struct Matcher {
    left: Vec<u64>,
    owner: [u16; 64],
}

const FREE: u16 = u16::MAX;

impl Matcher {
    fn new() -> Self {
        Self { left: Vec::new(), owner: [FREE; 64] }
    }

    fn augment(&mut self, l: usize, seen: &mut u64) -> bool {
        let mut cand = self.left[l] & !*seen;
        while cand != 0 {
            let e = cand.trailing_zeros() as usize;
            cand &= cand - 1;
            *seen |= 1 << e;
            let o = self.owner[e];
            if o == FREE || self.augment(o as usize, seen) {
                self.owner[e] = l as u16;
                return true;
            }
        }
        false
    }

    /// Adds `r` copies of `mask`; `false` once the copies cannot all be matched.
    fn push(&mut self, mask: u64, r: usize) -> bool {
        for _ in 0..r {
            let l = self.left.len();
            self.left.push(mask);
            if !self.augment(l, &mut 0) {
                return false;
            }
        }
        true
    }
}

fn masks_to_sets(masks: &[u64], d: usize) -> Vec<IndexSet> {
    masks
        .iter()
        .map(|&m| IndexSet::from_zero_based((0..d).filter(|j| m >> j & 1 == 1), d).expect("mask inside [d]"))
        .collect()
}

struct Query<'a> {
    pool: &'a [u64],
    /// Sets already loaded into the matcher.
    base: &'a [u64],
    k: usize,
    r: usize,
    d: usize,
    /// Nodes left; the search gives up and reports a match at zero.
    budget: &'a Cell<u64>,
}

/// Depth-first search over nondecreasing index sequences into `pool`,
/// extending `picked` to `k` sets while the copies stay matchable. Leaves are
/// confirmed with [`has_perfect_matching`].
fn find_matchable(q: &Query, start: usize, matcher: &Matcher, picked: &mut Vec<usize>) -> bool {
    let left = q.budget.get();
    if left == 0 {
        return true;
    }
    q.budget.set(left - 1);
    if picked.len() == q.k {
        let chosen: Vec<u64> = q.base.iter().copied().chain(picked.iter().map(|&i| q.pool[i])).collect();
        return has_perfect_matching(&masks_to_sets(&chosen, q.d), q.r).matched;
    }
    for i in start..q.pool.len() {
        let mut next = matcher.clone();
        if !next.push(q.pool[i], q.r) {
            continue;
        }
        picked.push(i);
        if find_matchable(q, i, &next, picked) {
            return true;
        }
        picked.pop();
    }
    false
}

/// Indices of `k` members (with repetition) of `family` that can be perfectly
/// `r`-matched, if any.
pub fn multiset_matchable(family: &SetFamily, k: usize, r: usize) -> Option<Vec<usize>> {
    let d = family.universe();
    assert!(d <= 64, "universe above 64");
    let masks: Vec<u64> = family.members().iter().map(|m| m.zero_based().fold(0u64, |a, j| a | 1 << j)).collect();
    let unlimited = Cell::new(u64::MAX);
    let q = Query { pool: &masks, base: &[], k, r, d, budget: &unlimited };
    let mut picked = Vec::new();
    find_matchable(&q, 0, &Matcher::new(), &mut picked).then_some(picked)
}

/// `x` can join `chosen` without creating a matchable `k`-multiset that uses it.
/// Conservatively `false` once `budget` runs out.
fn compatible(chosen: &[u64], x: u64, k: usize, r: usize, d: usize, budget: &Cell<u64>) -> bool {
    let mut m = Matcher::new();
    if !m.push(x, r) {
        return true;
    }
    let mut pool = chosen.to_vec();
    pool.push(x);
    let q = Query { pool: &pool, base: &[x], k: k - 1, r, d, budget };
    !find_matchable(&q, 0, &m, &mut Vec::new())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SearchOptions {
    /// Stop after this many search nodes, counting the inner matchability
    /// checks as well as the branch-and-bound.
    pub node_limit: Option<u64>,
    /// Start from the largest valid `F_i` as the incumbent.
    pub seed_with_fi: bool,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self { node_limit: None, seed_with_fi: true }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FamilySearch {
    pub size: usize,
    pub witness: SetFamily,
    pub nodes: u64,
    /// `false` when the node limit stopped the search; `size` is then a
    /// lower bound.
    pub complete: bool,
    /// `i` of the `F_i` incumbent, when seeding was used and valid.
    pub seeded_from: Option<usize>,
}

struct Search {
    k: usize,
    r: usize,
    d: usize,
    best: Vec<u64>,
    nodes: u64,
    /// Shared by the branch-and-bound and the compatibility checks.
    budget: Cell<u64>,
    aborted: bool,
}

impl Search {
    fn run(&mut self, chosen: &mut Vec<u64>, cands: &[u64]) {
        if self.aborted {
            return;
        }
        self.nodes += 1;
        let left = self.budget.get();
        if left == 0 {
            self.aborted = true;
            return;
        }
        self.budget.set(left - 1);
        if chosen.len() > self.best.len() {
            self.best = chosen.clone();
        }
        let Some((&c, rest)) = cands.split_first() else { return };
        if chosen.len() + cands.len() <= self.best.len() {
            return;
        }
        chosen.push(c);
        let kept: Vec<u64> = rest.iter().copied().filter(|&x| compatible(chosen, x, self.k, self.r, self.d, &self.budget)).collect();
        self.run(chosen, &kept);
        chosen.pop();
        self.run(chosen, rest);
    }
}

/// [`max_family_no_matchable_with`] under default options.
pub fn max_family_no_matchable(d: usize, s: usize, k: usize, t: usize) -> Result<FamilySearch, CombinatError> {
    max_family_no_matchable_with(d, s, k, t, &SearchOptions::default())
}

/// Exact maximum family size by branch-and-bound over sets in lexicographic
/// order. Candidates incompatible with the current partial family are
/// dropped as soon as they become incompatible.
pub fn max_family_no_matchable_with(
    d: usize,
    s: usize,
    k: usize,
    t: usize,
    opts: &SearchOptions,
) -> Result<FamilySearch, CombinatError> {
    if k == 0 || s == 0 || s > d {
        return Err(CombinatError::InvalidArgument(format!("need k >= 1 and 1 <= s <= d, got d={d} s={s} k={k}")));
    }
    let r = s.saturating_sub(t);
    let empty = |nodes| FamilySearch {
        size: 0,
        witness: SetFamily::new(d, s, Vec::new()).expect("empty family"),
        nodes,
        complete: true,
        seeded_from: None,
    };
    // every set alone is matchable: k disjoint r-subsets of one s-set
    if k * r <= s {
        return Ok(empty(0));
    }
    // no k sets fit into [d]
    if k * r > d {
        check_enumerable(d, s)?;
        let all = all_subsets(d, s);
        let witness = SetFamily::from_masks(d, s, &all)?;
        return Ok(FamilySearch { size: all.len(), witness, nodes: 0, complete: true, seeded_from: None });
    }
    if d > MAX_SEARCH_D || binomial(d, s) > MAX_SEARCH_SETS {
        return Err(CombinatError::TooLarge(format!("search over C({d}, {s}) = {} sets", binomial(d, s))));
    }

    let mut search = Search { k, r, d, best: Vec::new(), nodes: 0, budget: Cell::new(opts.node_limit.unwrap_or(u64::MAX)), aborted: false };
    let mut seeded_from = None;
    if opts.seed_with_fi {
        let bounds = conjectured_family_bounds(d, s, k, t);
        for (i, &size) in bounds.sizes.iter().enumerate() {
            if size as usize <= search.best.len() {
                continue;
            }
            let fam = fi_family(d, s, k, t, i + 1)?;
            let masks: Vec<u64> = fam.members().iter().map(|m| m.zero_based().fold(0u64, |a, j| a | 1 << j)).collect();
            let valid = (0..masks.len()).all(|j| compatible(&masks[..j], masks[j], k, r, d, &search.budget));
            if valid {
                search.best = masks;
                seeded_from = Some(i + 1);
            }
        }
    }
    let cands: Vec<u64> = all_subsets(d, s).into_iter().filter(|&x| compatible(&[], x, k, r, d, &search.budget)).collect();
    search.run(&mut Vec::new(), &cands);

    let mut best = search.best;
    best.sort_by_key(|m| {
        let e: Vec<u32> = (0..64).filter(|j| m >> j & 1 == 1).collect();
        e
    });
    let witness = SetFamily::from_masks(d, s, &best)?;
    Ok(FamilySearch { size: best.len(), witness, nodes: search.nodes, complete: !search.aborted && search.budget.get() > 0, seeded_from })
}
