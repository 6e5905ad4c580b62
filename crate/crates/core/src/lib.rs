//! Pursuit-evasion planning as nested inference.
//!
//! A chaser plans online by simulating a runner, who in turn simulates a
//! naive chaser. Trajectories come from a randomized planner over a
//! polygonal city map, detection from a limited field-of-view visibility
//! test, and the chaser's moves from a particle filter whose weights are
//! estimated by nested importance sampling.

pub mod error;
pub mod experiments;
pub mod geometry;
pub mod isovist;
pub mod models;
pub mod render;
pub mod resample;
pub mod rng;
pub mod rrt;
pub mod smc;
pub mod world;

pub use error::{Error, Result};
pub use geometry::{Point2, Polygon, Segment};
pub use models::{AgentVariant, ChaserKind, PlanningConfig, RunnerKind};
pub use rrt::Trajectory;
pub use world::WorldMap;
