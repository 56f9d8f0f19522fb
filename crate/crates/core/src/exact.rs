//! Exact products of `f64` factors.
//!
//! Every finite `f64` is a dyadic rational, so a product of them is exactly
//! `mantissa * 2^exponent` with an integer mantissa. Ranking uses this to
//! decide near-ties without rounding noise: two vectors whose factor
//! multisets coincide compare equal no matter the multiplication order.

use std::cmp::Ordering;

use num_bigint::BigUint;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExactProduct {
    /// Odd, or zero.
    mantissa: BigUint,
    exponent: i64,
}

impl ExactProduct {
    pub fn one() -> Self {
        Self {
            mantissa: BigUint::from(1u8),
            exponent: 0,
        }
    }

    /// Exact product of non-negative finite factors.
    pub fn of<I: IntoIterator<Item = f64>>(factors: I) -> Self {
        let mut mantissa = BigUint::from(1u8);
        let mut exponent = 0;
        // two 53-bit mantissas multiply exactly in a u128
        let mut pending: Option<u64> = None;
        for f in factors {
            debug_assert!(f.is_finite() && f >= 0.0);
            if f == 0.0 {
                return Self {
                    mantissa: BigUint::default(),
                    exponent: 0,
                };
            }
            let (m, e) = decode(f);
            exponent += e;
            match pending.take() {
                Some(p) => mantissa *= p as u128 * m as u128,
                None => pending = Some(m),
            }
        }
        if let Some(p) = pending {
            mantissa *= p;
        }
        Self { mantissa, exponent }
    }

    pub fn is_zero(&self) -> bool {
        self.mantissa.bits() == 0
    }

    /// Correctly rounded (ties to even) `f64` value of the product.
    pub fn to_f64(&self) -> f64 {
        if self.is_zero() {
            return 0.0;
        }
        let bits = self.mantissa.bits() as i64;
        let top = bits - 1 + self.exponent;
        // exponent of the last kept bit
        let unit = (top - 52).max(-1074);
        let shift = unit - self.exponent;
        let q: u64 = if shift <= 0 {
            let q = &self.mantissa << (-shift) as usize;
            q.iter_u64_digits().next().unwrap_or(0)
        } else {
            let shift = shift as usize;
            let q = &self.mantissa >> shift;
            let rem = &self.mantissa - (&q << shift);
            let half = BigUint::from(1u8) << (shift - 1);
            let q = q.iter_u64_digits().next().unwrap_or(0);
            match rem.cmp(&half) {
                Ordering::Greater => q + 1,
                Ordering::Equal if q % 2 == 1 => q + 1,
                _ => q,
            }
        };
        scale(q as f64, unit)
    }

    /// Binary exponent of the lowest mantissa bit; zero for a zero product.
    pub fn exponent(&self) -> i64 {
        self.exponent
    }

    /// The value as an integer multiple of `2^base`. `base` must not exceed
    /// [`exponent`](Self::exponent) unless the product is zero.
    pub fn scaled_to(&self, base: i64) -> BigUint {
        if self.is_zero() {
            return BigUint::default();
        }
        debug_assert!(base <= self.exponent);
        &self.mantissa << (self.exponent - base) as usize
    }

    pub fn times(mut self, factor: f64) -> Self {
        debug_assert!(factor.is_finite() && factor >= 0.0);
        if factor == 0.0 || self.is_zero() {
            return Self {
                mantissa: BigUint::default(),
                exponent: 0,
            };
        }
        let (m, e) = decode(factor);
        self.mantissa *= m;
        self.exponent += e;
        self
    }
}

/// `value * 2^e`, exact whenever the result is representable.
fn scale(value: f64, e: i64) -> f64 {
    let pow2 = |e: i64| f64::from_bits(((e + 1023) as u64) << 52);
    let mut v = value;
    let mut e = e;
    while e < -1000 {
        v *= pow2(-1000);
        e += 1000;
    }
    while e > 1000 {
        v *= pow2(1000);
        e -= 1000;
    }
    v * pow2(e)
}

/// `value = m * 2^e` with `m` odd.
fn decode(value: f64) -> (u64, i64) {
    let bits = value.to_bits();
    let raw_exp = ((bits >> 52) & 0x7ff) as i64;
    let frac = bits & ((1u64 << 52) - 1);
    let (mut m, mut e) = if raw_exp == 0 {
        (frac, -1074)
    } else {
        (frac | (1u64 << 52), raw_exp - 1075)
    };
    let tz = m.trailing_zeros();
    m >>= tz;
    e += tz as i64;
    (m, e)
}

impl Ord for ExactProduct {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self.is_zero(), other.is_zero()) {
            (true, true) => return Ordering::Equal,
            (true, false) => return Ordering::Less,
            (false, true) => return Ordering::Greater,
            _ => {}
        }
        // floor(log2) decides unless equal
        let top_a = self.mantissa.bits() as i64 + self.exponent;
        let top_b = other.mantissa.bits() as i64 + other.exponent;
        if top_a != top_b {
            return top_a.cmp(&top_b);
        }
        match self.exponent.cmp(&other.exponent) {
            Ordering::Equal => self.mantissa.cmp(&other.mantissa),
            Ordering::Greater => {
                (&self.mantissa << (self.exponent - other.exponent) as usize).cmp(&other.mantissa)
            }
            Ordering::Less => self
                .mantissa
                .cmp(&(&other.mantissa << (other.exponent - self.exponent) as usize)),
        }
    }
}

impl PartialOrd for ExactProduct {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Compares two left-to-right floating products of `n_factors` factors.
///
/// Returns `None` when the rounded values are too close for their order to
/// be trusted; the caller must then compare exactly.
pub fn coarse_cmp(a: f64, b: f64, n_factors: usize) -> Option<Ordering> {
    // each multiplication contributes at most one half-ulp of relative error
    const SAFE_FLOOR: f64 = 1e-280;
    let hi = a.max(b);
    if hi < SAFE_FLOOR {
        // possibly underflowed, even when both read as zero
        return None;
    }
    let slack = hi * (2 * n_factors.max(1) + 2) as f64 * f64::EPSILON;
    if (a - b).abs() <= slack {
        None
    } else {
        a.partial_cmp(&b)
    }
}
