//! Configuration-space distance fields for planar serial arms.
//!
//! The field value at a joint configuration `q` for a workspace point `p` is
//! the joint-space distance from `q` to the nearest configuration whose
//! surface touches `p`. Its gradient has unit norm, so a single step along it
//! lands on a contact configuration: whole-body inverse kinematics in one
//! step. The same field drives a reactive controller and an iLQR planner.

pub mod bench;
pub mod cdf;
pub mod cli;
pub mod config;
pub mod dataset;
mod error;
pub mod io;
pub mod kinematics;
pub mod lbfgs;
pub mod neural;
pub mod planner;
pub mod plot;
pub mod robot_sdf;
pub mod zero_level_set;

pub use error::{Error, Result};
