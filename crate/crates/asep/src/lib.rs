//! Std companion to `asep-core`: the exact (uniformized chain) and Monte
//! Carlo oracles, a rayon executor, table output and the `asep` command line.

pub mod cli;
pub mod config;
pub mod ctmc;
pub mod exec;
pub mod lattice;
pub mod mc;
pub mod suites;
pub mod table;

pub use exec::Rayon;
