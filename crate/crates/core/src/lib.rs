//! AND-OR interaction extraction and interaction learning dynamics.
//!
//! A model's outputs on all `2^n` maskings of a sample are decomposed into
//! AND interactions (triggered when every variable of `S` is present) and OR
//! interactions (triggered when any variable of `S` is present). The
//! [`dynamics`] module models how such interactions are learned when the
//! triggers carry noise whose variance grows as `2^|S|`, giving a closed-form
//! optimum whose per-order strength shifts toward higher orders as the noise
//! shrinks.
//!
//! Modules:
//! - [`subsets`]: bitmask subsets and the zeta/Möbius lattice transforms
//! - [`interactions`]: AND/OR extraction, reconstruction, salient sets
//! - [`sparsify`]: sparsest AND-OR split of an output table
//! - [`dynamics`]: triggering matrix, closed-form solution, ratios, simulation
//! - [`synth`]: synthetic ground truths and noisy outputs
//! - [`metrics`]: per-order strength distributions and σ² fitting
//! - [`io`]: `itable.v1` tables and CSV result files

// `!(x >= 0.0)` is how NaN gets rejected alongside negatives.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dynamics;
pub mod error;
pub mod interactions;
pub mod io;
pub mod metrics;
pub mod sparsify;
pub mod subsets;
pub mod synth;

pub use error::{Error, Result};
pub use interactions::{
    and_interactions, or_interactions, reconstruct_output, salient_set, AndOrInteractions,
    InteractionKind, InteractionVector, MaskedOutputTable, SalientSet,
};
pub use subsets::{
    enumerate_subsets, flip_complement, mobius_transform, zeta_transform, SubsetTable,
    VariableSet, MAX_VARIABLES,
};
