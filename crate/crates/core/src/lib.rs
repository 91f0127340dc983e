//! Table discovery, column alignment, full-disjunction integration and
//! analytics over a directory of CSV files.
//!
//! The pipeline runs in four stages, each usable on its own:
//!
//! 1. [`discovery`]: top-k joinable / unionable search over a [`Lake`].
//! 2. [`align`]: cluster the columns of an integration set into IDs.
//! 3. [`integrate`]: full disjunction (or an outer-join baseline).
//! 4. [`analyze`]: aggregation, correlation and entity resolution.

pub mod align;
pub mod analyze;
pub mod artifact;
pub mod discovery;
pub mod error;
pub mod exec;
pub mod fixtures;
pub mod integrate;
pub mod lake;
pub mod synth;
pub mod table;

pub use align::{assign_integration_ids, AlignConfig, Alignment, IntegrationMapping};
pub use error::{Error, Result};
pub use exec::Exec;
pub use integrate::{full_disjunction, IntegratedTable, OperatorRegistry};
pub use lake::Lake;
pub use table::{Cell, HeaderMode, NullKind, Table};
