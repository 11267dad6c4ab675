//! Contact-mode guided manipulation planning.
//!
//! A rigid-body dexterous-manipulation planner that grows an RRT over
//! object poses and guides every tree extension with automatically
//! enumerated contact modes. Continuous motion within a mode comes from a
//! per-step velocity QP under quasistatic or quasidynamic mechanics;
//! discrete contact switches come from the mode enumeration itself.

pub mod collision;
pub mod geometry;
pub mod lp;
pub mod manipulator;
pub mod mechanics;
pub mod modes;
pub mod planner;
pub mod task;
pub mod trajectory;
pub mod validate;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("penetration {depth:.6} m exceeds {limit:.6} m at vertex {vertex} of primitive {primitive}")]
    DeepPenetration {
        depth: f64,
        limit: f64,
        primitive: usize,
        vertex: usize,
    },
    #[error("degenerate convex hull: {0}")]
    DegenerateHull(String),
    #[error("{n} contacts exceed the enumeration cap of {max}; reduce the contact set")]
    TooManyContacts { n: usize, max: usize },
    #[error("infeasible sliding sign vector: {0}")]
    EmptySlidingCone(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("solver iteration limit exhausted ({0})")]
    SolverIterationLimit(String),
    #[error("task file error: {0}")]
    Task(String),
    #[error("trajectory file error: {0}")]
    Trajectory(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
