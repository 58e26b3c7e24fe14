//! Cumulative-deficit frailty index and its latent subdimensions.
//!
//! The pipeline runs bottom-up through the modules below:
//! binary deficits are parsed and dichotomized ([`ingest`]), scored as a
//! frailty index ([`findex`]), correlated pairwise with the phi coefficient
//! ([`corr`]), factor-analyzed with parallel analysis and minres extraction
//! ([`efa`]), obliquely rotated by gradient projection ([`rotate`]), scored
//! per participant ([`scores`]) and finally related to a quality-of-life
//! outcome with standardized regressions ([`regress`]). [`synth`] generates
//! cohorts with a planted latent structure for end-to-end verification.

pub mod corr;
pub mod efa;
pub mod error;
pub mod findex;
pub mod ingest;
pub mod linalg;
pub mod regress;
pub mod rotate;
pub mod scores;
pub mod synth;

pub use error::Error;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
