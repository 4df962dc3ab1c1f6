//! Tooling for CoRE programs: structured natural-language agent programs
//! whose steps are interpreted one at a time by a language-model backend.
//!
//! - [`syntax`] parses and renders `.core` source.
//! - [`flowgraph`] builds the step graph and runs static control-flow checks.
//! - [`memory`] keeps observations and ranks them against an instruction.
//! - [`backend`] is the interpreter contract with HTTP and scripted implementations.
//! - [`tools`] holds the tool registry and the `ACTION:`/`RESPONSE:` reply protocol.
//! - [`engine`] executes programs and records a replayable [`trace`].

pub mod backend;
pub mod cli;
pub mod config;
pub mod engine;
pub mod flowgraph;
pub mod memory;
pub mod syntax;
pub mod tools;
pub mod trace;
