//! Library surface of the experiment harness: configuration parsing and
//! experiment execution, reused by the `relay-mpr` binary and its tests.

pub mod config;
pub mod experiment;
