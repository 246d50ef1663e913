use nalgebra::DMatrix;

use super::CombinatError;
use crate::lp::{self, LinearProgram};
use crate::subspace::{IndexSet, Subspace};

/// Largest `|S|` accepted by [`is_dominant_t1`].
pub const MAX_SIGN_PATTERN_SET: usize = 20;

const MASS_TOL: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq)]
pub struct DominanceCertificate {
    pub dominant: bool,
    /// Maximizer with `||u||_1 = 1`; `None` when the optimum is zero.
    pub witness: Option<Vec<f64>>,
    /// `max sum_{i in S} |u_i|` over `u` in `U` with `||u||_1 <= 1`.
    pub mass_on_s: f64,
    pub lp_solves: usize,
}

/// Fraction of `||u||_1` carried by coordinates of `s` with `|u_i| <= 1/t`,
/// after normalizing `u`.
pub fn indicator_mass(u: &[f64], s: &IndexSet, t: f64) -> f64 {
    let norm: f64 = u.iter().map(|v| v.abs()).sum();
    if norm == 0.0 {
        return 0.0;
    }
    let cap = 1.0 / t + 1e-12;
    s.zero_based().map(|i| u[i].abs() / norm).filter(|&a| a <= cap).sum()
}

/// Exact 1-dominance. For each sign pattern `sigma` on `S` (first sign fixed
/// by symmetry) solves
/// `max sum sigma_i u_i` s.t. `u = U z`, `||u||_1 <= 1`, with `u = p - q`,
/// `p, q >= 0` and a slack on the norm row.
pub fn is_dominant_t1(u: &Subspace, s: &IndexSet) -> Result<DominanceCertificate, CombinatError> {
    let d = u.ambient_dim();
    let k = u.dim();
    if s.universe() != d {
        return Err(CombinatError::InvalidArgument(format!("set lives in [{}], subspace in R^{d}", s.universe())));
    }
    if s.len() > MAX_SIGN_PATTERN_SET {
        return Err(CombinatError::TooLarge(format!("|S| = {} > {MAX_SIGN_PATTERN_SET}", s.len())));
    }
    if s.is_empty() {
        return Ok(DominanceCertificate { dominant: false, witness: None, mass_on_s: 0.0, lp_solves: 0 });
    }
    // columns: z (k, free), p (d), q (d), w (1)
    let n = k + 2 * d + 1;
    let mut e = DMatrix::zeros(d + 1, n);
    let basis = u.basis();
    for r in 0..d {
        for c in 0..k {
            e[(r, c)] = basis[(r, c)];
        }
        e[(r, k + r)] = -1.0;
        e[(r, k + d + r)] = 1.0;
    }
    for c in k..n {
        e[(d, c)] = 1.0;
    }
    let mut rhs = vec![0.0; d + 1];
    rhs[d] = 1.0;
    let mut lower = vec![0.0; n];
    let upper = vec![f64::INFINITY; n];
    lower[..k].fill(f64::NEG_INFINITY);

    let idx: Vec<usize> = s.zero_based().collect();
    let mut best = (f64::NEG_INFINITY, Vec::new());
    let patterns = 1u32 << (idx.len() - 1);
    for pat in 0..patterns {
        let mut obj = vec![0.0; n];
        for (b, &i) in idx.iter().enumerate() {
            let sigma = if b > 0 && pat >> (b - 1) & 1 == 1 { -1.0 } else { 1.0 };
            obj[k + i] = -sigma;
            obj[k + d + i] = sigma;
        }
        let prog = LinearProgram::new(obj, e.clone(), rhs.clone(), lower.clone(), upper.clone())?;
        let sol = lp::solve(&prog)?.into_optimal()?;
        let value = -sol.objective_value;
        if value > best.0 {
            let point: Vec<f64> = (0..d).map(|i| sol.point[k + i] - sol.point[k + d + i]).collect();
            best = (value, point);
        }
    }
    let (value, point) = best;
    let norm: f64 = point.iter().map(|v| v.abs()).sum();
    let witness = (norm > 1e-12).then(|| point.iter().map(|v| v / norm).collect::<Vec<f64>>());
    let mass_on_s = match &witness {
        Some(w) => idx.iter().map(|&i| w[i].abs()).sum::<f64>().max(value),
        None => value.max(0.0),
    };
    Ok(DominanceCertificate { dominant: mass_on_s >= 0.5 - MASS_TOL, witness, mass_on_s, lp_solves: patterns as usize })
}

/// Closed-form `t`-dominance for `span(e_1..e_k)`: `|S ∩ [k]| >= t / 2`.
/// Meaningful for `t <= k`.
pub fn axis_dominance(k: usize, t: f64, s: &IndexSet) -> bool {
    let hits = s.elements().iter().filter(|&&e| e <= k).count();
    2.0 * hits as f64 >= t
}

/// Witness for [`axis_dominance`]: `ceil(t)` entries equal to `1/ceil(t)` on
/// `[k]`, taken from `S ∩ [k]` first.
pub fn axis_witness(k: usize, t: f64, s: &IndexSet) -> Option<Vec<f64>> {
    let m = (t.ceil() as usize).max(1);
    if m > k || !axis_dominance(k, t, s) {
        return None;
    }
    let mut picks: Vec<usize> = s.elements().iter().copied().filter(|&e| e <= k).take(m).collect();
    let mut next = 1;
    while picks.len() < m {
        if !s.contains(next) {
            picks.push(next);
        }
        next += 1;
    }
    let mut u = vec![0.0; s.universe()];
    for p in picks {
        u[p - 1] = 1.0 / m as f64;
    }
    Some(u)
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeuristicVerdict {
    /// `true` certifies `t`-dominance; `false` is inconclusive.
    pub certified: bool,
    pub mass: f64,
    pub witness: Option<Vec<f64>>,
}

/// Lower bound for general `t`: the 1-dominance maximizer, scored by
/// [`indicator_mass`].
pub fn dominance_heuristic(u: &Subspace, s: &IndexSet, t: f64) -> Result<HeuristicVerdict, CombinatError> {
    let cert = is_dominant_t1(u, s)?;
    let mass = cert.witness.as_deref().map_or(0.0, |w| indicator_mass(w, s, t));
    Ok(HeuristicVerdict { certified: mass >= 0.5 - MASS_TOL, mass, witness: cert.witness })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gen::{random_subspace, rng_for, sample_support};
    use crate::subspace::orthonormalize;

    fn set(e: &[usize], d: usize) -> IndexSet {
        IndexSet::new(e.to_vec(), d).unwrap()
    }

    #[test]
    fn single_axis() {
        let u = Subspace::axis(3, 1);
        let c = is_dominant_t1(&u, &set(&[1], 3)).unwrap();
        assert!(c.dominant);
        assert!((c.mass_on_s - 1.0).abs() < 1e-9);
        let w = c.witness.unwrap();
        assert!((w[0].abs() - 1.0).abs() < 1e-9);
        let c = is_dominant_t1(&u, &set(&[2], 3)).unwrap();
        assert!(!c.dominant);
        assert!(c.mass_on_s.abs() < 1e-9);
    }

    #[test]
    fn all_ones_line_half_mass() {
        let u = orthonormalize(&[vec![0.25; 4]]).unwrap();
        let c = is_dominant_t1(&u, &set(&[1, 2], 4)).unwrap();
        assert!(c.dominant);
        assert!((c.mass_on_s - 0.5).abs() < 1e-9);
        let w = c.witness.unwrap();
        assert!((w.iter().map(|v| v.abs()).sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(!is_dominant_t1(&u, &set(&[1], 4)).unwrap().dominant);
    }

    #[test]
    fn size_guard() {
        let u = Subspace::axis(30, 2);
        let big = IndexSet::new((1..=21).collect(), 30).unwrap();
        assert!(matches!(is_dominant_t1(&u, &big), Err(CombinatError::TooLarge(_))));
    }

    #[test]
    fn axis_rule_examples() {
        let s = set(&[1, 9, 10], 10);
        assert!(axis_dominance(4, 2.0, &s));
        assert!(!axis_dominance(4, 4.0, &s));
        let w = axis_witness(4, 2.0, &s).unwrap();
        assert_eq!(w[0], 0.5);
        assert_eq!(w.iter().filter(|&&v| v == 0.5).count(), 2);
        assert!(w.iter().enumerate().all(|(i, &v)| v == 0.0 || i < 4));
        assert!((indicator_mass(&w, &s, 2.0) - 0.5).abs() < 1e-12);
        assert_eq!(axis_witness(4, 4.0, &s), None);
    }

    #[test]
    fn axis_witness_meets_mass() {
        let mut rng = rng_for(5, 0);
        for _ in 0..300 {
            let k = 1 + rand::Rng::random_range(&mut rng, 0..6);
            let t = rand::Rng::random_range(&mut rng, 0.1..=k as f64);
            let s = sample_support(&mut rng, 12, 4);
            match axis_witness(k, t, &s) {
                Some(w) => assert!(indicator_mass(&w, &s, t) >= 0.5 - 1e-12),
                None => assert!(!axis_dominance(k, t, &s)),
            }
        }
    }

    #[test]
    fn axis_rule_matches_lp_at_t1() {
        let mut rng = rng_for(11, 0);
        for trial in 0..200 {
            let k = 1 + trial % 4;
            let u = Subspace::axis(10, k);
            let size = 1 + trial % 5;
            let s = sample_support(&mut rng, 10, size);
            let lp = is_dominant_t1(&u, &s).unwrap();
            assert_eq!(lp.dominant, axis_dominance(k, 1.0, &s), "k={k} S={:?}", s.elements());
        }
    }

    #[test]
    fn certificate_invariant_random_subspaces() {
        let mut rng = rng_for(2, 0);
        for _ in 0..40 {
            let u = random_subspace(&mut rng, 8, 2);
            let s = sample_support(&mut rng, 8, 3);
            let c = is_dominant_t1(&u, &s).unwrap();
            let w = c.witness.as_ref().unwrap();
            // witness lies in U
            assert!(u.residual_norm(w).unwrap() < 1e-8);
            assert!((indicator_mass(w, &s, 1.0) - c.mass_on_s).abs() < 1e-7);
            let h = dominance_heuristic(&u, &s, 1.0).unwrap();
            assert_eq!(h.certified, c.dominant);
            let h2 = dominance_heuristic(&u, &s, 3.0).unwrap();
            assert!(h2.mass <= h.mass + 1e-12);
        }
    }
}
