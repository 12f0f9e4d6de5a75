//! Proposal-guided MCTS motion planner with grid-based cost evaluation and a
//! closed-loop scenario simulator.
//!
//! The stack: a lane-graph map with route extraction ([`map`]), a kinematic
//! bicycle model ([`dynamics`]), ego-centric grid rasterization and distance
//! transforms ([`raster`]), analytic occupancy predictors with ego
//! conditioning ([`occupancy`]), multimodal route-following trajectory
//! proposals ([`proposals`]), the MCTS core with progressive widening and a
//! grid-convolutional cost ([`planner`]), and closed-loop simulation with
//! IDM background traffic plus evaluation metrics ([`sim`]).

// The pipeline allocates and frees many full-resolution grids per tick; a
// caching allocator keeps that out of mmap/munmap.
#[global_allocator]
static GLOBAL: mimalloc::MiMalloc = mimalloc::MiMalloc;

pub mod cli;
pub mod dynamics;
pub mod fixtures;
pub mod geom;
pub mod grid_io;
pub mod map;
pub mod occupancy;
pub mod planner;
pub mod proposals;
pub mod raster;
pub mod sim;

/// Simulation and planning tick, seconds (10 Hz).
pub const TICK_DT: f64 = 0.1;
/// History window length in ticks (1 s at 10 Hz).
pub const T_POSE: usize = 10;
/// Planning horizon in ticks (3 s at 10 Hz).
pub const T_FUTURE: usize = 30;
