//! Arithmetic in GF(p) and GF(2^m), `m <= 16`.
//!
//! Elements are `u32` values in `0..q`. For GF(2^m) the bits of a value are the
//! coefficients of a polynomial over GF(2), reduced modulo a fixed irreducible
//! polynomial.

use super::CombinatError;

/// Irreducible polynomials over GF(2), indexed by degree; bit `i` is the
/// coefficient of `x^i`.
pub const IRREDUCIBLE: [u32; 17] = [
    0, 0b11, 0x7, 0xB, 0x13, 0x25, 0x43, 0x83, 0x11D, 0x211, 0x409, 0x805, 0x1053, 0x201B, 0x4443, 0x8003, 0x1100B,
];

pub const MAX_PRIME: u32 = 1 << 16;

pub fn is_prime(n: u32) -> bool {
    if n < 2 {
        return false;
    }
    let mut f = 2u32;
    while f * f <= n {
        if n % f == 0 {
            return false;
        }
        f += 1;
    }
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GfContext {
    Prime(u32),
    Binary { m: u32, modulus: u32 },
}

impl GfContext {
    pub fn prime(p: u32) -> Result<Self, CombinatError> {
        if !is_prime(p) || p > MAX_PRIME {
            return Err(CombinatError::InvalidArgument(format!("{p} is not a supported prime")));
        }
        Ok(GfContext::Prime(p))
    }

    pub fn binary(m: u32) -> Result<Self, CombinatError> {
        if !(1..=16).contains(&m) {
            return Err(CombinatError::InvalidArgument(format!("GF(2^{m}) not supported")));
        }
        Ok(GfContext::Binary { m, modulus: IRREDUCIBLE[m as usize] })
    }

    /// The field with `q` elements when `q` is a supported prime or power of two.
    pub fn with_order(q: u32) -> Option<Self> {
        if q.is_power_of_two() && q >= 2 {
            Self::binary(q.trailing_zeros()).ok()
        } else {
            Self::prime(q).ok()
        }
    }

    pub fn order(&self) -> u32 {
        match *self {
            GfContext::Prime(p) => p,
            GfContext::Binary { m, .. } => 1 << m,
        }
    }

    pub fn add(&self, a: u32, b: u32) -> u32 {
        match *self {
            GfContext::Prime(p) => ((a as u64 + b as u64) % p as u64) as u32,
            GfContext::Binary { .. } => a ^ b,
        }
    }

    pub fn neg(&self, a: u32) -> u32 {
        match *self {
            GfContext::Prime(p) => (p - a % p) % p,
            GfContext::Binary { .. } => a,
        }
    }

    pub fn sub(&self, a: u32, b: u32) -> u32 {
        self.add(a, self.neg(b))
    }

    pub fn mul(&self, a: u32, b: u32) -> u32 {
        match *self {
            GfContext::Prime(p) => ((a as u64 * b as u64) % p as u64) as u32,
            GfContext::Binary { m, modulus } => {
                let (mut a, mut b, mut acc) = (a, b, 0u32);
                while b != 0 {
                    if b & 1 == 1 {
                        acc ^= a;
                    }
                    b >>= 1;
                    a <<= 1;
                    if a >> m & 1 == 1 {
                        a ^= modulus;
                    }
                }
                acc
            }
        }
    }

    pub fn pow(&self, mut a: u32, mut e: u64) -> u32 {
        let mut acc = 1 % self.order().max(2);
        while e > 0 {
            if e & 1 == 1 {
                acc = self.mul(acc, a);
            }
            a = self.mul(a, a);
            e >>= 1;
        }
        acc
    }

    /// Multiplicative inverse; `None` for zero.
    pub fn inv(&self, a: u32) -> Option<u32> {
        (a != 0).then(|| self.pow(a, self.order() as u64 - 2))
    }

    /// `sum_i coeffs[i] x^i` by Horner's rule.
    pub fn eval_poly(&self, coeffs: &[u32], x: u32) -> u32 {
        coeffs.iter().rev().fold(0, |acc, &c| self.add(self.mul(acc, x), c))
    }
}

/// Brute-force irreducibility test over GF(2): no factor of degree
/// `1..=deg/2`.
pub fn is_irreducible_gf2(poly: u32) -> bool {
    let deg = 31 - poly.leading_zeros();
    if deg == 0 {
        return false;
    }
    for fdeg in 1..=deg / 2 {
        for f in (1u32 << fdeg)..(1u32 << (fdeg + 1)) {
            if gf2_rem(poly, f) == 0 {
                return false;
            }
        }
    }
    true
}

fn gf2_rem(mut a: u32, b: u32) -> u32 {
    let db = 31 - b.leading_zeros();
    while a != 0 && 31 - a.leading_zeros() >= db {
        a ^= b << (31 - a.leading_zeros() - db);
    }
    a
}
