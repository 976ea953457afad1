//! Scenario files, the runner behind `frontlab scenario`, and the output
//! writers shared by the subcommands.

pub mod output;
pub mod runner;
pub mod scenario;
