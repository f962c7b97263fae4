//! Cross-module invariants: the fast path against the trial-division
//! oracle, and structural identities that need more than one module.

use tmatrix::legendre::{self, MinPrimeOutcome};
use tmatrix::matrix;
use tmatrix::oracle;
use tmatrix::PrimeCache;

/// Small deterministic generator for sampled bounds.
struct Lcg(u64);

impl Lcg {
    fn next(&mut self) -> u64 {
        self.0 = self.0.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        self.0 >> 16
    }
}

#[test]
fn active_sets_match_the_oracle_construction() {
    let cache = PrimeCache::new();
    for m in 3..=300 {
        assert_eq!(
            legendre::active_set(&cache, m).unwrap(),
            oracle::oracle_active_set(m).unwrap(),
            "m = {m}"
        );
    }
}

#[test]
fn active_set_size_is_the_gap_prime_count() {
    let cache = PrimeCache::new();
    for m in 3..=300 {
        let h = legendre::active_set(&cache, m).unwrap();
        assert_eq!(h.len() as u64, legendre::q_count(&cache, m).unwrap(), "m = {m}");
    }
}

#[test]
fn oracle_gap_primes_agree_with_the_sieve() {
    let cache = PrimeCache::new();
    for m in 1..=500 {
        let oracle_primes = oracle::oracle_primes_between(m).unwrap();
        assert_eq!(
            oracle_primes.len() as u64,
            legendre::q_count(&cache, m).unwrap(),
            "m = {m}"
        );
        let sieved = cache.sieve_range(m * m + 1, (m + 1) * (m + 1) - 1).unwrap();
        assert_eq!(oracle_primes, sieved, "m = {m}");
    }
}

#[test]
fn upper_defining_matches_the_oracle_on_sampled_bounds() {
    let cache = PrimeCache::new();
    let mut rng = Lcg(0x5eed_cafe);
    for _ in 0..200 {
        let b = 49 + rng.next() % (1_000_000 - 49);
        let fast = matrix::upper_defining(&cache, b as u128).unwrap();
        let slow = oracle::oracle_upper_defining(b as u128).unwrap();
        assert_eq!(fast.value, slow, "b = {b}");
    }
}

#[test]
fn upper_defining_of_the_leading_square_is_min_h() {
    let cache = PrimeCache::new();
    for m in 3..=300 {
        let (record, _) = legendre::scheme_walk(&cache, m).unwrap();
        let scale = cache.p_seq(record.k1).unwrap() as u128;
        let ud = matrix::upper_defining(&cache, scale * scale).unwrap();
        assert_eq!(ud.row, record.k1, "m = {m}");
        assert_eq!(Some(&ud.value), record.h.first(), "m = {m}");
    }
}

#[test]
fn critical_element_is_scale_times_first_prime_past_the_square() {
    let cache = PrimeCache::new();
    for m in 3..=300 {
        let (record, _) = legendre::scheme_walk(&cache, m).unwrap();
        let scale = cache.p_seq(record.k1).unwrap() as u128;
        let next = cache.next_prime((m + 1) * (m + 1)).unwrap() as u128;
        assert_eq!(record.c, scale * next, "m = {m}");
    }
}

#[test]
fn gcd_quotient_recovers_the_least_gap_prime() {
    let cache = PrimeCache::new();
    for m in 3..=300 {
        let q = legendre::q_count(&cache, m).unwrap();
        match legendre::min_prime_via_active_set(&cache, m).unwrap() {
            MinPrimeOutcome::Prime(p) => {
                assert!(q >= 2);
                assert_eq!(p, cache.next_prime(m * m).unwrap(), "m = {m}");
            }
            MinPrimeOutcome::Degenerate { .. } => assert_eq!(q, 1, "m = {m}"),
        }
    }
}

#[test]
fn transition_target_is_unique_nearby() {
    let cache = PrimeCache::new();
    let mut rng = Lcg(0x0dd_ba11);
    let mut checked = 0;
    while checked < 50 {
        let k = 2 + rng.next() % 30;
        let n = 1 + rng.next() % 2_000;
        let record = matrix::element_record(&cache, k, n).unwrap();
        let scale = cache.p_seq(k).unwrap() as u128;
        if !record.is_defining || record.value <= scale * scale {
            continue;
        }
        let j = matrix::transition_down(&cache, k, n).unwrap();
        let leading_column = matrix::column_of(&cache, k, scale * scale).unwrap();
        for candidate in (k + 1)..=(j + 50) {
            let candidate_scale = cache.p_seq(candidate).unwrap() as u128;
            let holds = record.value < candidate_scale * candidate_scale
                && matrix::element(&cache, candidate, leading_column).unwrap() == record.value
                && matrix::element(&cache, candidate, n).unwrap()
                    == candidate_scale * candidate_scale;
            assert_eq!(
                holds,
                candidate == j,
                "k={k} n={n}: row {candidate} vs transition target {j}"
            );
        }
        checked += 1;
    }
}

#[test]
fn transitions_of_walk_members_land_where_the_trace_says() {
    let cache = PrimeCache::new();
    for m in [3u64, 4, 5, 10, 47, 113] {
        let (record, trace) = legendre::scheme_walk(&cache, m).unwrap();
        for step in trace.steps.iter().filter(|s| {
            matches!(
                s.label,
                legendre::StepLabel::DownSuccess | legendre::StepLabel::DownFailure
            )
        }) {
            let n = matrix::column_of(&cache, record.k1, step.value).unwrap();
            let j = matrix::transition_down(&cache, record.k1, n).unwrap();
            assert_eq!(j, step.to_row, "m = {m}, value = {}", step.value);
        }
    }
}
