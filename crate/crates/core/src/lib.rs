//! Multi-source causal Bayesian optimization.
//!
//! Several data sources share one output variable but may differ in their
//! causal mechanisms. Each source gets a structural causal model ([`scm`]),
//! an exploration set pruned to its possibly-optimal minimal intervention set
//! ([`graph`]), and a Gaussian-process surrogate with a causal prior mean
//! ([`gp`]). The loop in [`optimizer`] chooses between observing and
//! intervening with an epsilon-greedy rule and picks the next source and
//! intervention by a cost-weighted knowledge gradient ([`acquisition`]).
//!
//! Bundled problems live in [`benchmarks`]; [`harness`] runs seeded
//! experiments and writes traces, summaries and plots.
//!
//! ```no_run
//! use mscbo::benchmarks::load_benchmark;
//!
//! let spec = load_benchmark("crop")?;
//! println!("{:?}", spec.pomis()?.variables);
//! # Ok::<(), mscbo::Error>(())
//! ```

pub mod acquisition;
pub mod benchmarks;
pub mod error;
pub mod gp;
pub mod graph;
pub mod harness;
pub mod optimizer;
pub mod rng;
pub mod scm;

pub use error::{Error, Result};
pub use rng::RngState;
pub use scm::file::Objective;
