//! Multitask evolutionary optimisation of QoS-aware semantic web service
//! compositions.
//!
//! A set of composition tasks that share inputs and outputs but differ in
//! their acceptable QoSM segment is optimised concurrently by a single
//! population of service permutations ([`engine`]). Each permutation decodes
//! into an executable DAG ([`decode`]) whose functional and non-functional
//! quality is scored per task ([`quality`]). [`bench`] runs seeded
//! experiment grids against a single-task GA baseline.
//!
//! ```
//! use mtwsc_core::{generate_synthetic, run, AlgorithmConfig, Strategy, SyntheticParams};
//!
//! # fn main() -> Result<(), Box<dyn std::error::Error>> {
//! let (repo, tasks) = generate_synthetic(&SyntheticParams {
//!     n_services: 50,
//!     taxonomy_depth: 4,
//!     branching: 3,
//!     k: 4,
//!     seed: 7,
//! })?;
//! let config = AlgorithmConfig { generations: 20, strategy: Strategy::NeighborTasks, ..Default::default() };
//! let outcome = run(&repo, &tasks, &config)?;
//! assert_eq!(outcome.best.len(), 4);
//! assert_eq!(outcome.trace.len(), 21);
//! # Ok(())
//! # }
//! ```

pub mod bench;
pub mod decode;
pub mod engine;
pub mod exec;
pub mod model;
pub mod quality;
pub mod semantics;
pub mod synthetic;

pub use decode::{decode, CompositionDag, Permutation};
pub use engine::{run, run_baseline, AlgorithmConfig, Strategy};
pub use model::{load_repository, load_task_set, ServiceRepository, TaskSet};
pub use synthetic::{generate_synthetic, SyntheticParams};
