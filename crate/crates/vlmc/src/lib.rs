//! Variable length memory chains.
//!
//! Context trees and their combinatorics (`cont`, longest internal suffixes),
//! cascade series, the alpha-LIS matrix and its fixed vectors, stationary
//! measures on cylinders, simulation of the chain with its induced semi-Markov
//! chain, and the embedding of semi-Markov chains into combs.

pub mod appendix;
pub mod cascade;
pub mod error;
pub mod io;
pub mod prob;
pub mod qmatrix;
pub mod sim;
pub mod smc;
pub mod stationary;
pub mod suffix;
pub mod tree;
pub mod word;

pub use error::{Result, VlmcError};
pub use prob::{ProbabilisedTree, QRule};
pub use tree::{ContextTree, NodeClass};
pub use word::{Alphabet, Word};
