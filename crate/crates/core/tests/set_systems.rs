use lowrank_bp::combinat::{binomial, fi_family, has_perfect_matching, multiset_matchable, axis_dominance};
use lowrank_bp::gen::{rng_for, sample_support};
use lowrank_bp::IndexSet;
use proptest::prelude::*;
use rand::Rng;

#[test]
fn prefix_families_have_no_matchable_multiset() {
    let mut checked = 0;
    for d in 2..=9 {
        for s in 1..=d {
            if binomial(d, s) > 200 {
                continue;
            }
            for k in 2..=4 {
                for t in 0..s {
                    let r = s - t;
                    for i in 1..=s - t {
                        if i * k - 1 > d {
                            break;
                        }
                        let fam = fi_family(d, s, k, t, i).unwrap();
                        if fam.is_empty() {
                            continue;
                        }
                        assert_eq!(multiset_matchable(&fam, k, r), None, "d={d} s={s} k={k} t={t} i={i}");
                        checked += 1;
                    }
                }
            }
        }
    }
    assert!(checked > 100);
}

#[test]
fn many_axis_dominant_sets_share_elements() {
    let mut rng = rng_for(123, 0);
    let mut tried = 0;
    for _ in 0..400 {
        let d = rng.random_range(4..=40);
        let k = rng.random_range(1..=d.min(5));
        let s = rng.random_range(1..=d.min(8));
        let t = rng.random_range(1..=(2 * s.min(k)));
        let need = (t + 1) / 2;
        // draw axis-dominant sets by forcing `need` entries from [k]
        let mut sets = Vec::new();
        while sets.len() < 12 * k + 1 {
            let head = sample_support(&mut rng, k, need);
            let mut elems: Vec<usize> = head.elements().to_vec();
            while elems.len() < s {
                let e = rng.random_range(1..=d);
                if !elems.contains(&e) {
                    elems.push(e);
                }
            }
            let set = IndexSet::new(elems, d).unwrap();
            assert!(axis_dominance(k, t as f64, &set));
            sets.push(set);
        }
        let floor = t / (48 * k);
        let best = (0..sets.len())
            .flat_map(|a| (a + 1..sets.len()).map(move |b| (a, b)))
            .map(|(a, b)| sets[a].intersection_len(&sets[b]))
            .max()
            .unwrap();
        assert!(best > floor, "d={d} k={k} s={s} t={t}");
        tried += 1;
    }
    assert_eq!(tried, 400);
}

fn sets_strategy() -> impl Strategy<Value = (usize, Vec<Vec<usize>>, usize)> {
    (3usize..=9, 1usize..=3).prop_flat_map(|(d, s)| {
        let set = proptest::collection::btree_set(1..=d, 0..=d).prop_map(|b| b.into_iter().collect::<Vec<_>>());
        (Just(d), proptest::collection::vec(set, 1..=4), Just(s))
    })
}

fn to_sets(d: usize, sets: &[Vec<usize>]) -> Vec<IndexSet> {
    sets.iter().map(|e| IndexSet::new(e.clone(), d).unwrap()).collect()
}

proptest! {
    #[test]
    fn matching_monotone_in_sets((d, sets, s) in sets_strategy(), extra in 1usize..=9) {
        let base = has_perfect_matching(&to_sets(d, &sets), s).matched;
        // enlarging a set keeps a matching
        let mut grown = sets.clone();
        let e = extra.min(d);
        if !grown[0].contains(&e) {
            grown[0].push(e);
        }
        if base {
            prop_assert!(has_perfect_matching(&to_sets(d, &grown), s).matched);
        }
        // adding a set can only break it
        let mut more = sets.clone();
        more.push(sets[0].clone());
        if !base {
            prop_assert!(!has_perfect_matching(&to_sets(d, &more), s).matched);
        }
        // smaller s is easier
        if base && s > 1 {
            prop_assert!(has_perfect_matching(&to_sets(d, &sets), s - 1).matched);
        }
    }

    #[test]
    fn witness_is_a_disjoint_selection((d, sets, s) in sets_strategy()) {
        let idx = to_sets(d, &sets);
        let res = has_perfect_matching(&idx, s);
        if let Some(w) = res.witness {
            prop_assert!(res.matched);
            prop_assert_eq!(w.len(), idx.len());
            let mut seen = vec![false; d + 1];
            for (part, whole) in w.iter().zip(&idx) {
                prop_assert_eq!(part.len(), s);
                for &e in part.elements() {
                    prop_assert!(whole.contains(e));
                    prop_assert!(!seen[e]);
                    seen[e] = true;
                }
            }
        }
    }
}
