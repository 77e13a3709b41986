//! Executable machinery for the Lindeberg swapping proof of the central
//! limit theorem.
//!
//! * [`sampling`]: seeded substream RNG and the catalog of mean-zero laws.
//! * [`specfun`]: Φ, φ, smooth transition functions and their derivative bounds.
//! * [`exchange`]: hybrid sums, per-swap bounds and the swap-chain scan.
//! * [`lindeberg`]: triangular arrays and the Lindeberg–Feller quantities.
//! * [`stats`]: Kolmogorov distance to Φ, exact Rademacher oracles, CLT scans.
//! * [`cli`]: the `clt-lab` command-line front end.
//!
//! Monte Carlo work runs on rayon when the `parallel` feature is on (the
//! default) and sequentially otherwise; seeded results are identical either way.

pub mod cli;
pub mod error;
pub mod exchange;
pub mod lindeberg;
pub mod mc;
pub mod par;
pub mod quad;
pub mod report;
pub mod sampling;
pub mod specfun;
pub mod stats;

pub use error::{LabError, Result};
pub use exchange::{ChainSpec, MCEstimate, SwapChainReport, TestFn};
pub use lindeberg::{ArrayFamily, LindebergReport, TriangularRow};
pub use sampling::{make_rng, DistributionSpec, Kind, RngState};
pub use specfun::{DerivBoundCert, Direction, TransitionFn};
pub use stats::{ConvergenceReport, EmpiricalSample};
