//! Smoothed separable nonnegative matrix factorization.
//!
//! Given data `X ≈ W H` whose columns are (noisy) convex combinations of
//! the `r` columns of `W`, the extraction algorithms in [`extract`] estimate
//! `W` from the data alone: VCA and SPA pick one data column per vertex,
//! while ALLS, SVCA and SSPA aggregate `p` columns per vertex, which makes
//! them robust to noise when several data points lie near each vertex.
//!
//! Around the algorithms sit a coordinate-descent NNLS solver for the
//! abundances ([`solver`]), evaluation metrics ([`metrics`]), a synthetic
//! data generator ([`datagen`]), file formats and cube preprocessing
//! ([`io`]) and a seeded multi-trial experiment runner ([`sweep`]).
//!
//! ```
//! use ssnmf_core::{datagen, extract, metrics};
//!
//! let spec = datagen::SyntheticSpec { m: 30, n: 200, r: 5, seed: 1, ..Default::default() };
//! let inst = datagen::generate(&spec).unwrap();
//! let cfg = extract::AlgoConfig::new(5);
//! let res = extract::spa(&inst.x, &cfg).unwrap();
//! let m = metrics::mrsa(&inst.w_true, &res.endmembers).unwrap();
//! assert!(m.total < 1e-10);
//! ```

pub mod datagen;
pub mod error;
pub mod extract;
pub mod io;
pub mod linalg;
pub mod metrics;
pub mod rng;
pub mod solver;
pub mod sweep;

pub use error::{Error, Result};
pub use extract::{
    AlgoConfig, Aggregation, Algorithm, EndmemberMatrix, ExtractionResult, Selection, Sign,
};
pub use linalg::{DataMatrix, OrthoBasis};
pub use metrics::MatchResult;
pub use solver::{AbundanceMatrix, NnlsSettings};
