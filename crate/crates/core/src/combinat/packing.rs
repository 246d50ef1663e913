use super::gf::GfContext;
use super::{CombinatError, SetFamily};
use crate::subspace::IndexSet;

/// Largest admissible family this module will materialize.
const MAX_PACKING: u64 = 1 << 22;

/// Largest prime or power of two `q` with `s <= q` and `s q <= d`.
pub fn choose_q(d: usize, s: usize) -> Option<u32> {
    if s == 0 {
        return None;
    }
    let hi = (d / s).min(1 << 16);
    (s.max(2)..=hi).rev().map(|q| q as u32).find(|&q| GfContext::with_order(q).is_some())
}

/// Polynomial packing over GF(q): for each polynomial `p` of degree below
/// `delta`, the set `{(i, p(x_i)) : i = 1..s}` with `x_i` the field element
/// `i - 1`, embedded into `[d]` by `(i, y) -> (i - 1) q + y + 1`. Distinct
/// polynomials agree on at most `delta - 1` points.
pub fn build_packing_with_q(d: usize, s: usize, delta: usize, q: u32) -> Result<SetFamily, CombinatError> {
    let field = GfContext::with_order(q)
        .ok_or_else(|| CombinatError::InvalidArgument(format!("{q} is not a prime or power of two")))?;
    if delta == 0 || delta > s {
        return Err(CombinatError::InvalidArgument(format!("need 1 <= delta <= s, got delta={delta}, s={s}")));
    }
    if (q as usize) < s || s * q as usize > d {
        return Err(CombinatError::InvalidArgument(format!("q={q} needs s <= q and s q <= d (s={s}, d={d})")));
    }
    let size = (q as u64).checked_pow(delta as u32).filter(|&n| n <= MAX_PACKING);
    let Some(size) = size else {
        return Err(CombinatError::TooLarge(format!("{q}^{delta} sets")));
    };
    let mut members = Vec::with_capacity(size as usize);
    let mut coeffs = vec![0u32; delta];
    for _ in 0..size {
        let elems: Vec<usize> = (0..s)
            .map(|i| {
                let y = field.eval_poly(&coeffs, i as u32);
                i * q as usize + y as usize + 1
            })
            .collect();
        members.push(IndexSet::new(elems, d).expect("embedding stays inside [d]"));
        // next coefficient vector in base q
        for c in coeffs.iter_mut() {
            *c += 1;
            if *c < q {
                break;
            }
            *c = 0;
        }
    }
    SetFamily::new(d, s, members)
}

/// [`build_packing_with_q`] with `q` from [`choose_q`].
pub fn build_packing(d: usize, s: usize, delta: usize) -> Result<SetFamily, CombinatError> {
    let q = choose_q(d, s).ok_or(CombinatError::NoValidQ { d, s })?;
    build_packing_with_q(d, s, delta, q)
}

/// `{1..s}, {s+1..2s}, ...`: `floor(d / s)` disjoint blocks.
pub fn block_packing(d: usize, s: usize) -> Result<SetFamily, CombinatError> {
    if s == 0 {
        return Err(CombinatError::InvalidArgument("s must be positive".into()));
    }
    let members = (0..d / s)
        .map(|b| IndexSet::new((b * s + 1..=(b + 1) * s).collect(), d).expect("block inside [d]"))
        .collect();
    SetFamily::new(d, s, members)
}

/// All pairwise intersections have size at most `delta - 1`.
pub fn verify_packing(family: &SetFamily, delta: usize) -> bool {
    let m = family.members();
    (0..m.len()).all(|i| (i + 1..m.len()).all(|j| m[i].intersection_len(&m[j]) < delta))
}
