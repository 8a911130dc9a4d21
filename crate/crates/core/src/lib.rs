//! k-dissimilarity vectors of weighted trees: the forward map from a tree to
//! its table of k-weights, the conditions under which a table is realizable,
//! and reconstruction of the tree from a table.

#![allow(clippy::result_large_err)]

pub mod certificate;
pub mod conditions;
mod linalg;
pub mod newick;
pub mod pseudocherry;
pub mod reconstruct;
pub mod scalar;
pub mod table;
pub mod testkit;
pub mod tree;
pub mod weights;

pub use newick::{parse_newick, serialize_newick, NewickError};
pub use scalar::{Equality, Scalar};
pub use table::{
    enumerate_indices, parse_table, reduce_table, serialize_table, DissimilarityTable, FamilyShape,
    Index, IndexFamily, TableError,
};
pub use tree::{Label, TreeBuilder, TreeError, VertexId, WeightedTree};
pub use weights::{generate_table, multiset_weight, subtree_weight};
pub use certificate::{CertificateContext, CollapseStep, ConditionTag, LinearForm, ViolationCertificate};
pub use conditions::{check_buneman, check_realizability, check_realizability_with, CheckOptions, RealizabilityReport};
pub use pseudocherry::{enumerate_complete_pseudocherries, PseudocherryReport};
pub use reconstruct::{
    reconstruct, reconstruct_constructive, reconstruct_linear, twig_lengths, verify, EngineKind, Reconstruction,
    ReconstructionResult,
};
