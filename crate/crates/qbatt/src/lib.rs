//! Command-line front end and file formats for the spin-chain battery model.

pub mod cli;
pub mod commands;
pub mod config;
pub mod output;
pub mod parallel;
