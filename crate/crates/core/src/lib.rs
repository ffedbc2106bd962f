//! Monadic disjunctive sirups over labelled graphs.
//!
//! A query `q` is a set of atoms with unary predicates `F`, `T` (and `A` in
//! data) and binary edge predicates. This crate evaluates the sirup on data,
//! expands `q` into cactuses, decides boundedness for tree-shaped queries,
//! classifies data complexity, and builds hardness reductions and gadget
//! queries.

pub mod cactus;
pub mod classify;
pub mod cli;
pub mod cq;
pub mod datalog;
pub mod error;
pub mod gadget;
pub mod graph;
pub mod hom;
pub mod lambda;
pub mod reduce;
pub mod report;
pub mod tree;

pub use error::{Error, Result};
pub use graph::{LabelledGraph, NodeId};
