//! Brute-force reference implementations used to cross-check the fast path.
//!
//! Everything here is built on plain trial division and literal definitions;
//! nothing is shared with the sieve cache or the matrix module. The budgets
//! are deliberately small — these functions exist to validate, not to scale —
//! and exceeding them is an error, not a fallback.

use crate::error::{Error, Result};

/// Largest m accepted by the range-based oracles.
pub const MAX_ORACLE_M: u64 = 5_000;

/// Largest bound accepted by [`oracle_upper_defining`].
pub const MAX_ORACLE_B: u128 = 100_000_000;

/// Trial-division primality.
pub fn trial_is_prime(v: u64) -> bool {
    if v < 2 {
        return false;
    }
    if v.is_multiple_of(2) {
        return v == 2;
    }
    let mut d = 3u64;
    while d * d <= v {
        if v.is_multiple_of(d) {
            return false;
        }
        d += 2;
    }
    true
}

/// Largest prime strictly below `x`, by downward scan.
pub fn largest_prime_below(x: u64) -> Result<u64> {
    let mut v = x.saturating_sub(1);
    while v >= 2 {
        if trial_is_prime(v) {
            return Ok(v);
        }
        v -= 1;
    }
    Err(Error::Domain(format!("no prime below {x}")))
}

/// Smallest prime strictly above `x`, by upward scan.
pub fn next_prime_above(x: u64) -> u64 {
    let mut v = x + 1;
    loop {
        if trial_is_prime(v) {
            return v;
        }
        v += 1;
    }
}

fn check_m_budget(m: u64) -> Result<()> {
    if m > MAX_ORACLE_M {
        return Err(Error::Budget {
            needed: m,
            budget: MAX_ORACLE_M,
        });
    }
    Ok(())
}

/// Primes strictly between m^2 and (m+1)^2, by direct enumeration.
pub fn oracle_primes_between(m: u64) -> Result<Vec<u64>> {
    if m == 0 {
        return Err(Error::Usage("m must be at least 1".into()));
    }
    check_m_budget(m)?;
    let lo = m * m;
    let hi = (m + 1) * (m + 1);
    Ok((lo + 1..hi).filter(|&v| trial_is_prime(v)).collect())
}

/// Active set for m^4, constructed directly from its definition: scale by
/// the largest prime below m^2, multiply by each prime of the square gap,
/// and keep the members whose ordering conditions hold in exact arithmetic.
pub fn oracle_active_set(m: u64) -> Result<Vec<u128>> {
    if m < 3 {
        return Err(Error::Usage(format!("active sets start at m = 3, got {m}")));
    }
    check_m_budget(m)?;
    let scale = largest_prime_below(m * m)? as u128;
    let m4 = (m as u128).pow(4);
    let next4 = (m as u128 + 1).pow(4);
    let mut members = Vec::new();
    for p in oracle_primes_between(m)? {
        let a = scale * p as u128;
        let landing_square = (p as u128) * (p as u128);
        let below = a < m4 && m4 < landing_square && landing_square < next4;
        let above = m4 < a && a < landing_square && landing_square < next4;
        if below || above {
            members.push(a);
        }
    }
    Ok(members)
}

/// Number of prime factors counted with multiplicity, by trial division.
fn prime_factor_count(mut v: u128) -> u32 {
    let mut count = 0;
    let mut d: u128 = 2;
    while d * d <= v {
        while v.is_multiple_of(d) {
            v /= d;
            count += 1;
        }
        d += 1;
    }
    if v > 1 {
        count += 1;
    }
    count
}

/// The literal reading of "defining": not divisible by 5 and a product of
/// exactly two primes.
pub fn literal_defining(v: u128) -> bool {
    !v.is_multiple_of(5) && prime_factor_count(v) == 2
}

/// Upper defining element of `b`, by scanning the columns of the row whose
/// leading square is the largest at or below `b` and classifying each value
/// with the literal definition.
pub fn oracle_upper_defining(b: u128) -> Result<u128> {
    if b < 49 {
        return Err(Error::Domain(format!(
            "upper defining element is defined for b >= 49, got {b}"
        )));
    }
    if b > MAX_ORACLE_B {
        return Err(Error::Budget {
            needed: u64::try_from(b).unwrap_or(u64::MAX),
            budget: u64::try_from(MAX_ORACLE_B).unwrap(),
        });
    }
    let root = b.isqrt() as u64;
    let mut scale = root;
    while !trial_is_prime(scale) {
        scale -= 1;
    }
    let scale = scale as u128;
    for n in 1u128.. {
        let column = 3 * n + if n % 2 == 1 { 2 } else { 1 };
        let value = scale * column;
        if value > b && literal_defining(value) {
            return Ok(value);
        }
    }
    unreachable!("every row past the first has infinitely many defining elements")
}
