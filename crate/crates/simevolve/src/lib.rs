//! Evolves per-dataset similarity functions with genetic programming and
//! clusters instances through the graph those functions induce. Includes the
//! fitness measure, baseline clusterers, external validation metrics, and
//! synthetic dataset generators.

pub mod baselines;
pub mod cluster;
pub mod data;
pub mod datagen;
pub mod error;
pub mod expr;
pub mod fitness;
pub mod gp;
pub mod metrics;

pub use cluster::{cluster, Partition};
pub use data::{Dataset, NeighborIndex};
pub use error::{Error, Result};
pub use expr::{ExprTree, Individual};
pub use fitness::{evaluate_fitness, FitnessBreakdown};
pub use gp::{evolve, CrossoverKind, GpConfig};
pub use metrics::{ari, mann_whitney_u, partition_report, PartitionReport};
