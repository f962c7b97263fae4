//! T-matrix toolkit: a prime engine, the lazy infinite matrix of scaled
//! 6h +- 1 columns, and an empirical verifier for the active-set and
//! prime-gap identities the structure encodes.
//!
//! The crate is organized in four layers:
//!
//! - [`primes`] — segmented sieve cache, exact 64-bit primality, prime
//!   counting and the shifted prime sequence.
//! - [`matrix`] — element values, defining/leading classification, lazy row
//!   iteration, upper defining elements and the transition-down map.
//! - [`legendre`] — active sets, critical elements, the scheme walk and the
//!   claim-by-claim range verifier.
//! - [`oracle`] — deliberately slow trial-division reference constructions
//!   that share no code with the fast path.

pub mod error;
pub mod legendre;
pub mod matrix;
pub mod oracle;
pub mod primes;
mod serde_util;

pub use error::{Error, Result};
pub use primes::PrimeCache;
