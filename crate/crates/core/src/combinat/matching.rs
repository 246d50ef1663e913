use std::collections::{BTreeMap, VecDeque};

use crate::subspace::IndexSet;

const NIL: usize = usize::MAX;

/// Maximum matching of a bipartite graph by Hopcroft–Karp. `adj[l]` lists the
/// right vertices (`0..n_right`) adjacent to left vertex `l`. Returns the
/// matched right vertex of every left vertex.
pub fn max_bipartite_matching(adj: &[Vec<usize>], n_right: usize) -> Vec<Option<usize>> {
    let n_left = adj.len();
    let mut match_l = vec![NIL; n_left];
    let mut match_r = vec![NIL; n_right];
    let mut dist = vec![0usize; n_left];

    loop {
        // BFS layers from free left vertices
        let mut queue = VecDeque::new();
        for l in 0..n_left {
            if match_l[l] == NIL {
                dist[l] = 0;
                queue.push_back(l);
            } else {
                dist[l] = usize::MAX;
            }
        }
        let mut found = false;
        while let Some(l) = queue.pop_front() {
            for &r in &adj[l] {
                let next = match_r[r];
                if next == NIL {
                    found = true;
                } else if dist[next] == usize::MAX {
                    dist[next] = dist[l] + 1;
                    queue.push_back(next);
                }
            }
        }
        if !found {
            break;
        }
        let mut it = vec![0usize; n_left];
        for l in 0..n_left {
            if match_l[l] == NIL {
                augment(l, adj, &mut match_l, &mut match_r, &mut dist, &mut it);
            }
        }
    }
    match_l.into_iter().map(|r| (r != NIL).then_some(r)).collect()
}

fn augment(
    l: usize,
    adj: &[Vec<usize>],
    match_l: &mut [usize],
    match_r: &mut [usize],
    dist: &mut [usize],
    it: &mut [usize],
) -> bool {
    while it[l] < adj[l].len() {
        let r = adj[l][it[l]];
        it[l] += 1;
        let next = match_r[r];
        if next == NIL || (dist[next] == dist[l] + 1 && augment(next, adj, match_l, match_r, dist, it)) {
            match_l[l] = r;
            match_r[r] = l;
            return true;
        }
    }
    dist[l] = usize::MAX;
    false
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MatchingResult {
    pub matched: bool,
    /// Disjoint `T_i ⊆ S_i` with `|T_i| = s`, when matched.
    pub witness: Option<Vec<IndexSet>>,
}

/// Whether pairwise disjoint `T_i ⊆ sets[i]` of size `s` exist. Each set is
/// copied `s` times on the left of a bipartite graph against its elements; a
/// perfect matching of the copies is exactly such a selection.
pub fn has_perfect_matching(sets: &[IndexSet], s: usize) -> MatchingResult {
    if sets.iter().any(|set| set.len() < s) {
        return MatchingResult { matched: false, witness: None };
    }
    let mut ids: BTreeMap<usize, usize> = BTreeMap::new();
    for set in sets {
        for &e in set.elements() {
            let next = ids.len();
            ids.entry(e).or_insert(next);
        }
    }
    let elems: Vec<usize> = {
        let mut v = vec![0; ids.len()];
        for (&e, &i) in &ids {
            v[i] = e;
        }
        v
    };
    if ids.len() < sets.len() * s {
        return MatchingResult { matched: false, witness: None };
    }
    let adj: Vec<Vec<usize>> = sets
        .iter()
        .flat_map(|set| {
            let row: Vec<usize> = set.elements().iter().map(|e| ids[e]).collect();
            std::iter::repeat_n(row, s)
        })
        .collect();
    let m = max_bipartite_matching(&adj, ids.len());
    if m.iter().any(Option::is_none) {
        return MatchingResult { matched: false, witness: None };
    }
    let witness = sets
        .iter()
        .enumerate()
        .map(|(i, set)| {
            let chosen: Vec<usize> = (0..s).map(|c| elems[m[i * s + c].unwrap()]).collect();
            IndexSet::new(chosen, set.universe()).expect("matched elements come from the set")
        })
        .collect();
    MatchingResult { matched: true, witness: Some(witness) }
}
