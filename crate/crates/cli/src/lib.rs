//! Scenario harness for the optical-spring cold-damping model: TOML
//! profiles, the gain-ladder runner, parameter sweeps and the artifact
//! bundle they write.

pub mod bundle;
pub mod error;
pub mod profile;
pub mod scenario;
pub mod sweep;

pub use error::{CliError, ErrorKind, ErrorRecord};
pub use profile::Profile;
pub use scenario::{aggregate_report, run_scenario, RunOutcome, Scenario};
pub use sweep::{sweep_parameter, SweepParameter, SweepRow};
