//! Python bindings: a `TMatrix` class wrapping the prime cache and the
//! matrix/active-set operations. Element values come back as Python ints
//! (arbitrary precision), structured results as JSON strings.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use serde_json::json;

use tmatrix::legendre::{self, MinPrimeOutcome};
use tmatrix::matrix;
use tmatrix::primes::{DEFAULT_BUDGET, DEFAULT_SEGMENT_SIZE};
use tmatrix::{Error, PrimeCache};

fn to_py_err(err: Error) -> PyErr {
    match err {
        Error::Budget { .. } => PyRuntimeError::new_err(err.to_string()),
        _ => PyValueError::new_err(err.to_string()),
    }
}

trait IntoPyResult<T> {
    fn into_py(self) -> PyResult<T>;
}

impl<T> IntoPyResult<T> for Result<T, Error> {
    fn into_py(self) -> PyResult<T> {
        self.map_err(to_py_err)
    }
}

/// The lazy infinite matrix plus its prime engine.
///
/// Usage from Python:
///
///     from tmatrix_py import TMatrix
///     t = TMatrix()
///     t.element(2, 3)        # 77
///     t.active_set(3)        # [77, 91]
///     json.loads(t.verify_json(3, 100, 4))
#[pyclass]
struct TMatrix {
    cache: PrimeCache,
}

#[pymethods]
impl TMatrix {
    /// Create a matrix backed by a fresh sieve cache.
    #[new]
    #[pyo3(signature = (segment_size=DEFAULT_SEGMENT_SIZE, budget=DEFAULT_BUDGET))]
    fn new(segment_size: u64, budget: u64) -> PyResult<Self> {
        Ok(TMatrix {
            cache: PrimeCache::with_config(segment_size, budget).into_py()?,
        })
    }

    // -- prime engine -----------------------------------------------------

    /// Exact primality for any 64-bit integer.
    fn is_prime(&self, v: u64) -> bool {
        self.cache.is_prime(v)
    }

    /// Number of primes at or below x.
    fn pi(&self, x: u64) -> PyResult<u64> {
        self.cache.pi(x).into_py()
    }

    /// The i-th prime (1-based).
    fn nth_prime(&self, i: u64) -> PyResult<u64> {
        self.cache.nth_prime(i).into_py()
    }

    /// Shifted prime sequence 5, 7, 11, ... used for row scales.
    fn p_seq(&self, k: u64) -> PyResult<u64> {
        self.cache.p_seq(k).into_py()
    }

    /// 1-based index of a prime.
    fn prime_index(&self, p: u64) -> PyResult<u64> {
        self.cache.prime_index(p).into_py()
    }

    /// All primes in [lo, hi].
    fn sieve_range(&self, lo: u64, hi: u64) -> PyResult<Vec<u64>> {
        self.cache.sieve_range(lo, hi).into_py()
    }

    // -- matrix -----------------------------------------------------------

    /// The n-th column value (6h +- 1 sequence starting at 5).
    #[staticmethod]
    fn f(n: u64) -> u128 {
        matrix::f(n)
    }

    /// Column index of a value in the f sequence, or None.
    #[staticmethod]
    fn f_inverse(v: u128) -> Option<u64> {
        matrix::f_inverse(v)
    }

    /// Element value p(k) * f(n).
    fn element(&self, k: u64, n: u64) -> PyResult<u128> {
        matrix::element(&self.cache, k, n).into_py()
    }

    /// (defining, leading) flags of element (k; n).
    fn classify(&self, k: u64, n: u64) -> PyResult<(bool, bool)> {
        let cls = matrix::classify(&self.cache, k, n).into_py()?;
        Ok((cls.defining, cls.leading))
    }

    /// Column index of value a within row k.
    fn column_of(&self, k: u64, a: u128) -> PyResult<u64> {
        matrix::column_of(&self.cache, k, a).into_py()
    }

    /// First `count` defining elements of row k with value > from_value.
    #[pyo3(signature = (k, from_value=0, count=10))]
    fn row(&self, k: u64, from_value: u128, count: usize) -> PyResult<Vec<u128>> {
        Ok(matrix::row_defining_iter(&self.cache, k, from_value)
            .into_py()?
            .take(count)
            .map(|r| r.value)
            .collect())
    }

    /// (row, value) of the least defining element above b in the row of the
    /// largest leading square at or below b.
    fn upper_defining(&self, b: u128) -> PyResult<(u64, u128)> {
        let ud = matrix::upper_defining(&self.cache, b).into_py()?;
        Ok((ud.row, ud.value))
    }

    /// Row where the defining element (k; n) reappears as a leading square.
    fn transition_down(&self, k: u64, n: u64) -> PyResult<u64> {
        matrix::transition_down(&self.cache, k, n).into_py()
    }

    /// Number of leading elements at or below x.
    fn pi_leading(&self, x: u128) -> PyResult<u64> {
        matrix::pi_leading(&self.cache, x).into_py()
    }

    // -- active sets ------------------------------------------------------

    /// Row index of the largest leading square below m^4.
    fn k1(&self, m: u64) -> PyResult<u64> {
        legendre::k1(&self.cache, m).into_py()
    }

    /// Number of primes strictly between m^2 and (m+1)^2.
    fn q_count(&self, m: u64) -> PyResult<u64> {
        legendre::q_count(&self.cache, m).into_py()
    }

    /// The ordered active set H for m^4.
    fn active_set(&self, m: u64) -> PyResult<Vec<u128>> {
        legendre::active_set(&self.cache, m).into_py()
    }

    /// The critical element C for m^4.
    fn critical(&self, m: u64) -> PyResult<u128> {
        legendre::critical_element(&self.cache, m).into_py()
    }

    /// min(H)/GCD(H) as ("prime", p), or ("degenerate", member) when H is
    /// a singleton.
    fn min_prime(&self, m: u64) -> PyResult<(String, u128)> {
        match legendre::min_prime_via_active_set(&self.cache, m).into_py()? {
            MinPrimeOutcome::Prime(p) => Ok(("prime".into(), p as u128)),
            MinPrimeOutcome::Degenerate { singleton } => Ok(("degenerate".into(), singleton)),
        }
    }

    /// Full walk for one m as a JSON string: {"record": ..., "trace": ...}.
    fn scheme_json(&self, m: u64) -> PyResult<String> {
        let (record, trace) = legendre::scheme_walk(&self.cache, m).into_py()?;
        serde_json::to_string(&json!({ "record": record, "trace": trace }))
            .map_err(|e| PyRuntimeError::new_err(e.to_string()))
    }

    /// Sweep every identity over m in [m_lo, m_hi] and return the report as
    /// a JSON string.
    #[pyo3(signature = (m_lo, m_hi, jobs=1))]
    fn verify_json(&self, m_lo: u64, m_hi: u64, jobs: u64) -> PyResult<String> {
        let report = legendre::verify_range(&self.cache, m_lo, m_hi, jobs).into_py()?;
        serde_json::to_string(&report).map_err(|e| PyRuntimeError::new_err(e.to_string()))
    }

    /// Pre-sieve primes up to x.
    fn ensure(&self, x: u64) -> PyResult<()> {
        self.cache.ensure(x).into_py()
    }

    fn __repr__(&self) -> String {
        format!("TMatrix(watermark={})", self.cache.watermark())
    }
}

#[pymodule]
fn tmatrix_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<TMatrix>()?;
    Ok(())
}
