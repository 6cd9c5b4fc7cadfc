//! Simulation toolkit for a perfect-tree forcing notion built on a fast-growing
//! master tree.
//!
//! The pieces, bottom-up:
//!
//! - [`hyperint`]: exact integers as sparse power-of-two towers.
//! - [`growth`]: the sequences `P_k`, `N_k` and the richness threshold.
//! - [`mastertree`]: node paths, the breadth-first index `ind` and its inverse.
//! - [`conditions`]: finitely presented subtrees with full tails.
//! - [`names`]: names decided at a fixed branch depth.
//! - [`fusion`]: checked fusion chains.
//! - [`minimality`]: the pairwise-splitting fusion and branch decoding.
//! - [`rigidity`]: the bounding fusion, pigeonhole selection and escapes.
//! - [`cli`]: the command-line front end and its JSON reports.

pub mod cli;
pub mod conditions;
pub mod error;
pub mod fusion;
pub mod growth;
pub mod hyperint;
pub mod mastertree;
pub mod minimality;
pub mod names;
pub mod rigidity;

pub use conditions::Condition;
pub use error::{Error, Result};
pub use growth::{GrowthProfile, ProfileConfig};
pub use hyperint::HyperInt;
pub use mastertree::{NodeIndex, NodePath};
