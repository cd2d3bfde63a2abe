//! Core library for waypoint: a multi-agent travel-planning benchmark
//! harness.
//!
//! The pieces, roughly bottom-up:
//! - [`sandbox`]: the immutable travel database and its search tools
//! - [`tools`]: tool names, permissions, and execution
//! - [`world`]: conversation, notebook, and per-role observations
//! - [`gateway`]: chat-model backends (scripted replay, remote HTTP)
//! - [`plan`]: the day-by-day itinerary format and its parser
//! - [`agents`]: role behaviors built on prompts and tool calls
//! - [`orchestration`]: episode drivers for the three run modes
//! - [`eval`]: constraint checks and benchmark metrics
//! - [`experiment`]: task files, trace files, reports
//! - [`api`]: wire types shared by the HTTP server and client

pub mod agents;
pub mod api;
pub mod eval;
pub mod experiment;
pub mod gateway;
pub mod orchestration;
pub mod plan;
pub mod roles;
pub mod sandbox;
pub mod tools;
pub mod types;
pub mod world;
