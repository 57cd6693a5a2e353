//! Front end for normalized Ricci flow experiments: configuration, the
//! `run`, `verify`, `sweep` and `plot` commands, and their output files.

pub mod config;
pub mod io;
pub mod plot;
pub mod run;
pub mod setup;
pub mod sweep;
pub mod verify;
