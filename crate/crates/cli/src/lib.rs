//! Scenario runner for `fracspike`: JSON scenarios, the `FSPK1` ground-state
//! cache and CSV/JSON report emission.

pub mod cache;
pub mod failure;
pub mod run;
pub mod scenario;
pub mod table;

pub use cache::Cache;
pub use failure::{exit_code, Failure};
pub use run::{run_scenario, RunOptions, RunSummary};
pub use scenario::{Mode, Resolved, Scenario, SCHEMA_VERSION};
