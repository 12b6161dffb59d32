//! Role-model estimation on finite alphabets.
//!
//! An estimator `Q(x | z)` is built by minimizing the expected
//! Kullback-Leibler divergence to a better-informed posterior `P(x | y)`.
//! When `X - Y - Z` is a Markov chain the minimizer is the Bayesian posterior
//! `P(x | z)`, and when the joint law of `(Y, Z)` is unknown the same
//! minimizer can be learned blindly from a stream of `(y, z)` observations.
//!
//! * [`prob`]: distributions, joints, conditionals, entropies, divergence.
//! * [`channels`]: channel models, cascades, joint assembly and sampling.
//! * [`strategy`]: direct and role-model solutions, identity checks.
//! * [`trainer`]: moving-window stochastic gradient training.
//! * [`experiments`]: reference scenarios, oracles and trace files.
//! * [`sweep`]: randomized checks of the divergence identities.
//! * [`formats`]: text formats for problems, estimators and samples.
//! * [`cli`]: the `rolemodel` command line.

pub mod channels;
pub mod cli;
pub mod error;
pub mod experiments;
pub mod formats;
pub mod prob;
pub mod strategy;
pub mod sweep;
pub mod trainer;

pub use error::{Error, Result};
pub use prob::{Axis, EstimatorTable, Joint3, Simplex, StochasticMatrix};
