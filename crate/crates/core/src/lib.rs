//! Deterministic discrete-event simulation of container terminal quayside
//! operations: vessel arrivals, first-come-first-serve berthing on a
//! continuous quay, non-crossing quay crane assignment, container handling
//! chains through trucks and yard cranes, KPI reporting, baseline/candidate
//! comparison and parameter calibration.

pub mod berth;
pub mod calibrate;
pub mod cli;
pub mod config;
pub mod cranes;
mod detailed;
pub mod kernel;
pub mod logsheet;
pub mod model;
pub mod plot;
pub mod report;
pub mod sim;
pub mod time;
