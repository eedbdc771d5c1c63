//! Library side of the `fedhdc` command: config resolution, the run
//! directory format, and the comparison and cost reports.

pub mod compare;
pub mod config;
pub mod costs;
pub mod run;
