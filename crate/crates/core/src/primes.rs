//! Prime-number engine: segmented sieve cache, counting, exact primality
//! and the shifted prime sequence used for matrix row scales.
//!
//! The cache sieves odd numbers into fixed-width segments (one bit per odd
//! number) and keeps a cumulative prime count per segment boundary, so
//! `pi`, `nth_prime` and range scans are cheap once a region is covered.
//! Coverage grows append-only: extension is serialized behind a write
//! lock while point queries run under shared read locks, which matches the
//! monotone sweeps the verifier performs.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::sync::RwLock;

use crate::error::{Error, Result};

/// Integers covered per segment (odd-only bitset of half this many bits).
pub const DEFAULT_SEGMENT_SIZE: u64 = 1 << 21;

/// Default ceiling for sieve coverage. Queries needing primes beyond this
/// fail with a budget error instead of silently allocating.
pub const DEFAULT_BUDGET: u64 = 1 << 34;

/// Deterministic Miller-Rabin witnesses covering every odd 64-bit input.
const WITNESSES: [u64; 7] = [2, 325, 9375, 28178, 450775, 9780504, 1795265022];

fn mul_mod(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

fn pow_mod(mut base: u64, mut exp: u64, m: u64) -> u64 {
    let mut acc: u64 = 1;
    base %= m;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mul_mod(acc, base, m);
        }
        base = mul_mod(base, base, m);
        exp >>= 1;
    }
    acc
}

/// Deterministic primality for any `u64`. No sieve state involved.
pub fn miller_rabin(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    for p in [2u64, 3, 5, 7, 11, 13] {
        if n.is_multiple_of(p) {
            return n == p;
        }
    }
    let s = (n - 1).trailing_zeros();
    let d = (n - 1) >> s;
    'witness: for mut a in WITNESSES {
        a %= n;
        if a == 0 {
            continue;
        }
        let mut x = pow_mod(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = mul_mod(x, x, n);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

/// One sieved block: bit `j` set means `lo + 2j + 1` is prime.
struct Segment {
    words: Vec<u64>,
}

struct CacheState {
    segments: Vec<Segment>,
    /// `cumulative[i]` = number of primes <= the last integer of segment `i`.
    cumulative: Vec<u64>,
    /// Largest integer covered by the sieve, inclusive. 1 while empty.
    watermark: u64,
    /// Odd primes used to sieve new segments.
    base_primes: Vec<u64>,
    base_limit: u64,
}

/// Append-only segmented prime sieve with shared-read access.
pub struct PrimeCache {
    segment_size: u64,
    budget: u64,
    state: RwLock<CacheState>,
}

impl Default for PrimeCache {
    fn default() -> Self {
        Self::new()
    }
}

impl PrimeCache {
    pub fn new() -> Self {
        Self::with_config(DEFAULT_SEGMENT_SIZE, DEFAULT_BUDGET)
            .expect("default configuration is valid")
    }

    /// `segment_size` is the number of integers per segment; it must be a
    /// multiple of 128 (so the odd-only bitset fills whole words).
    pub fn with_config(segment_size: u64, budget: u64) -> Result<Self> {
        if segment_size < 256 || !segment_size.is_multiple_of(128) {
            return Err(Error::Usage(format!(
                "segment size must be a multiple of 128 and at least 256, got {segment_size}"
            )));
        }
        if budget < segment_size {
            return Err(Error::Usage(format!(
                "budget {budget} is smaller than one segment ({segment_size})"
            )));
        }
        Ok(PrimeCache {
            segment_size,
            budget,
            state: RwLock::new(CacheState {
                segments: Vec::new(),
                cumulative: Vec::new(),
                watermark: 1,
                base_primes: Vec::new(),
                base_limit: 2,
            }),
        })
    }

    pub fn budget(&self) -> u64 {
        self.budget
    }

    /// Largest integer currently covered by the sieve (inclusive).
    pub fn watermark(&self) -> u64 {
        self.state.read().unwrap().watermark
    }

    /// Pre-sieve everything up to `x` so later queries stay read-only.
    pub fn ensure(&self, x: u64) -> Result<()> {
        if self.state.read().unwrap().watermark >= x {
            return Ok(());
        }
        let mut state = self.state.write().unwrap();
        self.extend_to(&mut state, x)
    }

    fn extend_to(&self, state: &mut CacheState, target: u64) -> Result<()> {
        if target > self.budget {
            return Err(Error::Budget {
                needed: target,
                budget: self.budget,
            });
        }
        while state.watermark < target {
            self.push_segment(state);
        }
        Ok(())
    }

    fn push_segment(&self, state: &mut CacheState) {
        let size = self.segment_size;
        let index = state.segments.len() as u64;
        let lo = index * size;
        let end = lo + size; // exclusive

        let root = (end - 1).isqrt();
        if root + 1 > state.base_limit {
            let new_limit = (root + 1).max(state.base_limit * 2).max(1 << 10);
            state.base_primes = flat_odd_sieve(new_limit);
            state.base_limit = new_limit;
        }

        let mut words = vec![u64::MAX; (size / 128) as usize];
        if index == 0 {
            words[0] &= !1; // 1 is not prime
        }
        for &p in &state.base_primes {
            if p * p >= end {
                break;
            }
            let mut start = p * p;
            if start < lo {
                start = lo.div_ceil(p) * p;
                if start % 2 == 0 {
                    start += p;
                }
            }
            let mut v = start;
            while v < end {
                let bit = (v - lo) / 2;
                words[(bit / 64) as usize] &= !(1u64 << (bit % 64));
                v += 2 * p;
            }
        }

        let mut count: u64 = words.iter().map(|w| w.count_ones() as u64).sum();
        if index == 0 {
            count += 1; // the prime 2 is not representable in the odd bitset
        }
        let prev = state.cumulative.last().copied().unwrap_or(0);
        state.segments.push(Segment { words });
        state.cumulative.push(prev + count);
        state.watermark = end - 1;
        debug_assert!(state.cumulative.windows(2).all(|w| w[0] <= w[1]));
    }

    fn with_coverage<T>(&self, needed: u64, f: impl FnOnce(&CacheState) -> T) -> Result<T> {
        {
            let state = self.state.read().unwrap();
            if state.watermark >= needed {
                return Ok(f(&state));
            }
        }
        let mut state = self.state.write().unwrap();
        self.extend_to(&mut state, needed)?;
        Ok(f(&state))
    }

    fn bit_is_prime(state: &CacheState, size: u64, v: u64) -> bool {
        if v < 2 {
            return false;
        }
        if v == 2 {
            return true;
        }
        if v.is_multiple_of(2) {
            return false;
        }
        let seg = (v / size) as usize;
        let bit = (v % size) / 2;
        state.segments[seg].words[(bit / 64) as usize] >> (bit % 64) & 1 == 1
    }

    /// Exact primality for any `u64`: sieve-bit lookup below the watermark,
    /// deterministic Miller-Rabin above it.
    pub fn is_prime(&self, v: u64) -> bool {
        {
            let state = self.state.read().unwrap();
            if v <= state.watermark {
                return Self::bit_is_prime(&state, self.segment_size, v);
            }
        }
        miller_rabin(v)
    }

    /// Number of primes <= x.
    pub fn pi(&self, x: u64) -> Result<u64> {
        if x < 2 {
            return Ok(0);
        }
        self.with_coverage(x, |state| self.count_up_to(state, x))
    }

    fn count_up_to(&self, state: &CacheState, x: u64) -> u64 {
        let size = self.segment_size;
        let seg = (x / size) as usize;
        let lo = seg as u64 * size;
        let mut count = if seg > 0 { state.cumulative[seg - 1] } else { 0 };
        if seg == 0 && x >= 2 {
            count += 1; // the prime 2
        }
        if x < lo + 1 {
            return count;
        }
        let last_bit = (x - lo - 1) / 2;
        let words = &state.segments[seg].words;
        let full = (last_bit / 64) as usize;
        for w in &words[..full] {
            count += w.count_ones() as u64;
        }
        let mask = if last_bit % 64 == 63 {
            u64::MAX
        } else {
            (1u64 << (last_bit % 64 + 1)) - 1
        };
        count + (words[full] & mask).count_ones() as u64
    }

    /// The i-th prime, 1-based (`nth_prime(1) = 2`).
    pub fn nth_prime(&self, i: u64) -> Result<u64> {
        if i == 0 {
            return Err(Error::Usage("prime indices are 1-based".into()));
        }
        loop {
            {
                let state = self.state.read().unwrap();
                if state.cumulative.last().copied().unwrap_or(0) >= i {
                    return Ok(self.select_prime(&state, i));
                }
            }
            let mut state = self.state.write().unwrap();
            if state.cumulative.last().copied().unwrap_or(0) >= i {
                continue;
            }
            if state.watermark >= self.budget {
                return Err(Error::Budget {
                    needed: state.watermark + self.segment_size,
                    budget: self.budget,
                });
            }
            let target = (state.watermark + 1).min(self.budget);
            self.extend_to(&mut state, target)?;
        }
    }

    fn select_prime(&self, state: &CacheState, i: u64) -> u64 {
        let seg = state.cumulative.partition_point(|&c| c < i);
        let mut rank = i - if seg > 0 { state.cumulative[seg - 1] } else { 0 };
        if seg == 0 {
            if rank == 1 {
                return 2;
            }
            rank -= 1;
        }
        let lo = seg as u64 * self.segment_size;
        let words = &state.segments[seg].words;
        let mut remaining = rank;
        for (wi, &w) in words.iter().enumerate() {
            let ones = w.count_ones() as u64;
            if ones >= remaining {
                let mut word = w;
                for _ in 1..remaining {
                    word &= word - 1;
                }
                let bit = wi as u64 * 64 + word.trailing_zeros() as u64;
                return lo + 2 * bit + 1;
            }
            remaining -= ones;
        }
        unreachable!("cumulative counts promised rank {rank} in segment {seg}");
    }

    /// Shifted prime sequence used for row scales: skips 2 and 3, so the
    /// sequence starts 5, 7, 11, 13, ...
    pub fn p_seq(&self, k: u64) -> Result<u64> {
        if k == 0 {
            return Err(Error::Usage("row indices are 1-based".into()));
        }
        self.nth_prime(k + 2)
    }

    /// Inverse of `nth_prime`: the 1-based index of a prime.
    pub fn prime_index(&self, p: u64) -> Result<u64> {
        if !self.is_prime(p) {
            return Err(Error::Domain(format!("{p} is not prime")));
        }
        self.pi(p)
    }

    /// All primes in `[lo, hi]`, ascending.
    pub fn sieve_range(&self, lo: u64, hi: u64) -> Result<Vec<u64>> {
        if lo > hi {
            return Err(Error::Usage(format!("empty range: lo {lo} > hi {hi}")));
        }
        if hi < 2 {
            return Ok(Vec::new());
        }
        let size = self.segment_size;
        self.with_coverage(hi, |state| {
            let mut primes = Vec::new();
            if lo <= 2 {
                primes.push(2);
            }
            let mut v = lo.max(3);
            if v.is_multiple_of(2) {
                v += 1;
            }
            while v <= hi {
                let seg = (v / size) as usize;
                let words = &state.segments[seg].words;
                let seg_lo = seg as u64 * size;
                let seg_end = (seg_lo + size - 1).min(hi);
                let first_bit = (v - seg_lo) / 2;
                let last_bit = (seg_end - seg_lo - 1) / 2;
                for wi in (first_bit / 64)..=(last_bit / 64) {
                    let mut w = words[wi as usize];
                    if wi == first_bit / 64 {
                        w &= u64::MAX << (first_bit % 64);
                    }
                    if wi == last_bit / 64 && last_bit % 64 != 63 {
                        w &= (1u64 << (last_bit % 64 + 1)) - 1;
                    }
                    while w != 0 {
                        let bit = wi * 64 + w.trailing_zeros() as u64;
                        primes.push(seg_lo + 2 * bit + 1);
                        w &= w - 1;
                    }
                }
                v = seg_lo + size;
                if v.is_multiple_of(2) {
                    v += 1;
                }
            }
            primes
        })
    }

    /// Largest prime <= x.
    pub fn prev_prime(&self, x: u64) -> Result<u64> {
        if x < 2 {
            return Err(Error::Domain(format!("no prime at or below {x}")));
        }
        let mut v = x;
        loop {
            if self.is_prime(v) {
                return Ok(v);
            }
            v -= 1;
        }
    }

    /// Smallest prime > x.
    pub fn next_prime(&self, x: u64) -> Result<u64> {
        let mut v = x.checked_add(1).ok_or(Error::WidthExceeded)?;
        loop {
            if self.is_prime(v) {
                return Ok(v);
            }
            v = v.checked_add(1).ok_or(Error::WidthExceeded)?;
        }
    }

    /// Write the sieved segments to a versioned binary file.
    pub fn save(&self, path: &Path) -> io::Result<()> {
        let state = self.state.read().unwrap();
        let mut out = BufWriter::new(File::create(path)?);
        out.write_all(MAGIC)?;
        out.write_all(&self.segment_size.to_le_bytes())?;
        out.write_all(&(state.segments.len() as u64).to_le_bytes())?;
        for seg in &state.segments {
            for w in &seg.words {
                out.write_all(&w.to_le_bytes())?;
            }
        }
        out.flush()
    }

    /// Load a cache file produced by [`PrimeCache::save`]. The file must
    /// have been written with the same segment size.
    pub fn load(path: &Path, segment_size: u64, budget: u64) -> io::Result<PrimeCache> {
        let cache = PrimeCache::with_config(segment_size, budget)
            .map_err(|e| io::Error::new(io::ErrorKind::InvalidInput, e.to_string()))?;
        let mut input = BufReader::new(File::open(path)?);
        let mut header = [0u8; 24];
        input.read_exact(&mut header)?;
        if &header[..8] != MAGIC {
            return Err(bad_data("not a prime cache file (bad magic/version)"));
        }
        let file_segment_size = u64::from_le_bytes(header[8..16].try_into().unwrap());
        if file_segment_size != segment_size {
            return Err(bad_data(format!(
                "cache file uses segment size {file_segment_size}, expected {segment_size}"
            )));
        }
        let n_segments = u64::from_le_bytes(header[16..24].try_into().unwrap());
        let words_per_segment = (segment_size / 128) as usize;
        {
            let mut state = cache.state.write().unwrap();
            for index in 0..n_segments {
                let mut words = vec![0u64; words_per_segment];
                let mut buf = [0u8; 8];
                for w in words.iter_mut() {
                    input.read_exact(&mut buf)?;
                    *w = u64::from_le_bytes(buf);
                }
                let mut count: u64 = words.iter().map(|w| w.count_ones() as u64).sum();
                if index == 0 {
                    count += 1;
                }
                let prev = state.cumulative.last().copied().unwrap_or(0);
                state.segments.push(Segment { words });
                state.cumulative.push(prev + count);
            }
            state.watermark = (n_segments * segment_size).max(2) - 1;
            if n_segments == 0 {
                state.watermark = 1;
            }
        }
        // Spot-check a few small values so a corrupted file fails loudly.
        if n_segments > 0
            && !(cache.is_prime(3) && cache.is_prime(7) && !cache.is_prime(9) && !cache.is_prime(15))
        {
            return Err(bad_data("cache file failed the primality spot check"));
        }
        Ok(cache)
    }
}

const MAGIC: &[u8; 8] = b"TMXPRIM1";

fn bad_data(msg: impl Into<String>) -> io::Error {
    io::Error::new(io::ErrorKind::InvalidData, msg.into())
}

/// Plain sieve of the odd primes up to `limit` (inclusive).
fn flat_odd_sieve(limit: u64) -> Vec<u64> {
    if limit < 3 {
        return Vec::new();
    }
    let half = ((limit - 1) / 2) as usize; // index i <-> odd number 2i+1
    let mut composite = vec![false; half + 1];
    let mut p = 3u64;
    while p * p <= limit {
        if !composite[(p / 2) as usize] {
            let mut v = p * p;
            while v <= limit {
                composite[(v / 2) as usize] = true;
                v += 2 * p;
            }
        }
        p += 2;
    }
    (1..=half).filter(|&i| !composite[i]).map(|i| 2 * i as u64 + 1).collect()
}
