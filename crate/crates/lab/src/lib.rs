//! Dataset IO, the CI history replay harness, reporting and the `tcp-lab`
//! command line on top of [`tcp_lab_core`].

pub mod cli;
pub mod config;
pub mod dataset;
pub mod evaluate;
pub mod report;
pub mod spec_json;
