//! The lazy infinite T-matrix.
//!
//! Element (k; n) holds `p(k) * f(n)`, where `p(k)` is the shifted prime
//! sequence 5, 7, 11, ... and `f(n)` enumerates the numbers of the form
//! 6h +- 1 starting at 5. Nothing is materialized: every query is computed
//! from its coordinates.
//!
//! An element is *defining* when it is not divisible by 5 and is a product
//! of two primes; for this matrix that is equivalent to `k > 1` with `f(n)`
//! prime and distinct from 5 (the equivalence is exercised against the
//! literal two-prime-factor definition in the tests). An element is
//! *leading* when it equals `p(k)^2`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::primes::PrimeCache;

/// Position of one matrix cell; both coordinates are 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MatrixIndex {
    pub k: u64,
    pub n: u64,
}

/// An element value together with its classification flags.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ElementRecord {
    pub index: MatrixIndex,
    #[serde(with = "crate::serde_util::u128_str")]
    pub value: u128,
    pub is_defining: bool,
    pub is_leading: bool,
}

/// Defining/leading flags of one element.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Classification {
    pub defining: bool,
    pub leading: bool,
}

/// Result of an upper-defining-element query: the row whose leading square
/// sits closest below the bound, and the first defining value above it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct UpperDefining {
    pub row: u64,
    #[serde(with = "crate::serde_util::u128_str")]
    pub value: u128,
}

/// Column sequence 5, 7, 11, 13, 17, 19, 23, 25, ...: the n-th number of
/// the form 6h +- 1, starting at 5.
pub fn f(n: u64) -> u128 {
    3 * n as u128 + if n % 2 == 1 { 2 } else { 1 }
}

/// Inverse of [`f`]: `Some(n)` with `f(n) = v` for v >= 5 congruent to
/// +-1 mod 6, `None` otherwise.
pub fn f_inverse(v: u128) -> Option<u64> {
    if v < 5 {
        return None;
    }
    let n = match v % 6 {
        5 => (v + 1) / 3 - 1, // v = 6h - 1 -> n = 2h - 1
        1 => (v - 1) / 3,     // v = 6h + 1 -> n = 2h
        _ => return None,
    };
    u64::try_from(n).ok()
}

fn check_index(k: u64, n: u64) -> Result<()> {
    if k == 0 || n == 0 {
        return Err(Error::Usage("matrix coordinates are 1-based".into()));
    }
    Ok(())
}

/// Element value `p(k) * f(n)`.
pub fn element(cache: &PrimeCache, k: u64, n: u64) -> Result<u128> {
    check_index(k, n)?;
    let scale = cache.p_seq(k)? as u128;
    scale.checked_mul(f(n)).ok_or(Error::WidthExceeded)
}

/// The same element computed from the floor-based column expression
/// `5 + 2*floor(n/2) + 4*floor((n-1)/2)` instead of `f`.
pub fn element_floor_form(cache: &PrimeCache, k: u64, n: u64) -> Result<u128> {
    check_index(k, n)?;
    let n = n as u128;
    let column = 5 + 2 * (n / 2) + 4 * ((n - 1) / 2);
    let scale = cache.p_seq(k)? as u128;
    scale.checked_mul(column).ok_or(Error::WidthExceeded)
}

fn f_is_prime(cache: &PrimeCache, fv: u128) -> Result<bool> {
    match u64::try_from(fv) {
        Ok(v) => Ok(cache.is_prime(v)),
        Err(_) => Err(Error::WidthExceeded),
    }
}

/// Defining/leading flags for element (k; n).
pub fn classify(cache: &PrimeCache, k: u64, n: u64) -> Result<Classification> {
    check_index(k, n)?;
    let fv = f(n);
    let scale = cache.p_seq(k)?;
    let defining = k > 1 && fv != 5 && f_is_prime(cache, fv)?;
    Ok(Classification {
        defining,
        leading: fv == scale as u128,
    })
}

/// Element value plus classification in one lookup.
pub fn element_record(cache: &PrimeCache, k: u64, n: u64) -> Result<ElementRecord> {
    check_index(k, n)?;
    let fv = f(n);
    let scale = cache.p_seq(k)?;
    let value = (scale as u128).checked_mul(fv).ok_or(Error::WidthExceeded)?;
    let defining = k > 1 && fv != 5 && f_is_prime(cache, fv)?;
    Ok(ElementRecord {
        index: MatrixIndex { k, n },
        value,
        is_defining: defining,
        is_leading: fv == scale as u128,
    })
}

/// Column index of value `a` within row `k`.
pub fn column_of(cache: &PrimeCache, k: u64, a: u128) -> Result<u64> {
    if k == 0 {
        return Err(Error::Usage("matrix coordinates are 1-based".into()));
    }
    let scale = cache.p_seq(k)? as u128;
    let not_in_row = Error::NotInRow { row: k, value: a };
    if !a.is_multiple_of(scale) {
        return Err(not_in_row);
    }
    f_inverse(a / scale).ok_or(not_in_row)
}

/// Smallest n with `f(n) >= t`.
fn first_column_at_or_above(t: u128) -> Option<u64> {
    if t <= 5 {
        return Some(1);
    }
    let h = t / 6;
    for (value, n) in [
        (6 * h - 1, 2 * h - 1),
        (6 * h + 1, 2 * h),
        (6 * h + 5, 2 * h + 1),
        (6 * h + 7, 2 * h + 2),
    ] {
        if value >= t {
            return u64::try_from(n).ok();
        }
    }
    unreachable!("6h..6h+7 always contains a value >= t")
}

/// Lazy ascending stream of the defining elements of one row.
pub struct RowDefiningIter<'a> {
    cache: &'a PrimeCache,
    row: u64,
    /// Row scale `p(k)`; 0 marks an exhausted/empty stream.
    scale: u64,
    next_n: u64,
}

impl Iterator for RowDefiningIter<'_> {
    type Item = ElementRecord;

    fn next(&mut self) -> Option<ElementRecord> {
        if self.scale == 0 {
            return None;
        }
        loop {
            let n = self.next_n;
            self.next_n = match n.checked_add(1) {
                Some(next) => next,
                None => {
                    self.scale = 0;
                    return None;
                }
            };
            let fv = f(n);
            let Ok(fv64) = u64::try_from(fv) else {
                // Column values past 64 bits are beyond every supported
                // budget; end the stream instead of guessing primality.
                self.scale = 0;
                return None;
            };
            if fv64 != 5 && self.cache.is_prime(fv64) {
                return Some(ElementRecord {
                    index: MatrixIndex { k: self.row, n },
                    value: self.scale as u128 * fv,
                    is_defining: true,
                    is_leading: fv64 == self.scale,
                });
            }
        }
    }
}

/// Defining elements of row `k` with value strictly above `from_value`,
/// ascending. Row 1 has no defining elements, so its stream is empty.
pub fn row_defining_iter(cache: &PrimeCache, k: u64, from_value: u128) -> Result<RowDefiningIter<'_>> {
    if k == 0 {
        return Err(Error::Usage("matrix coordinates are 1-based".into()));
    }
    if k == 1 {
        return Ok(RowDefiningIter {
            cache,
            row: k,
            scale: 0,
            next_n: 1,
        });
    }
    let scale = cache.p_seq(k)?;
    let threshold = from_value / scale as u128 + 1;
    let next_n = first_column_at_or_above(threshold);
    Ok(RowDefiningIter {
        cache,
        row: k,
        scale: if next_n.is_some() { scale } else { 0 },
        next_n: next_n.unwrap_or(1),
    })
}

/// Upper defining element of `b`: pick the row whose leading square is the
/// largest one at or below `b` (rows past the first only), then return the
/// least defining element of that row strictly above `b`.
pub fn upper_defining(cache: &PrimeCache, b: u128) -> Result<UpperDefining> {
    if b < 49 {
        return Err(Error::Domain(format!(
            "upper defining element is defined for b >= 49, got {b}"
        )));
    }
    let root = match u64::try_from(b.isqrt()) {
        Ok(r) => r,
        Err(_) => return Err(Error::WidthExceeded),
    };
    let scale = cache.prev_prime(root)?;
    debug_assert!(scale >= 7);
    let row = cache.prime_index(scale)? - 2;
    let value = row_defining_iter(cache, row, b)?
        .next()
        .ok_or(Error::WidthExceeded)?
        .value;
    Ok(UpperDefining { row, value })
}

/// Row where a defining element larger than its own row's leading square
/// reappears: the unique j > k with `p(j) = f(n)`, so that row j holds the
/// same value in the column of `p(k)^2` and its leading square in column n.
pub fn transition_down(cache: &PrimeCache, k: u64, n: u64) -> Result<u64> {
    check_index(k, n)?;
    let fv = f(n);
    let scale = cache.p_seq(k)?;
    let defining = k > 1 && fv != 5 && f_is_prime(cache, fv)?;
    if !defining {
        return Err(Error::Domain(format!(
            "element ({k};{n}) is not defining"
        )));
    }
    if fv <= scale as u128 {
        return Err(Error::Domain(format!(
            "element ({k};{n}) does not exceed the row's leading square"
        )));
    }
    let fv64 = u64::try_from(fv).map_err(|_| Error::WidthExceeded)?;
    Ok(cache.prime_index(fv64)? - 2)
}

/// Number of leading elements (squares of row scales) at or below `x`.
pub fn pi_leading(cache: &PrimeCache, x: u128) -> Result<u64> {
    let root = match u64::try_from(x.isqrt()) {
        Ok(r) => r,
        Err(_) => return Err(Error::WidthExceeded),
    };
    Ok(cache.pi(root)?.saturating_sub(2))
}
