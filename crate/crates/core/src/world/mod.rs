//! Physical state and fixed-timestep dynamics of the deployment scene:
//! heightfield terrain, the hovering carrier UAV, its winch and tether head,
//! and the tracked ground vehicle the head carries.

mod state;
mod step;
mod terrain;

pub use state::{
    Commands, Pose, TetherHeadState, UavState, UgvState, WinchState, WorldEvent, WorldParams,
    WorldState,
};
pub use terrain::Terrain;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum WorldError {
    #[error("terrain query ({x:.3}, {y:.3}) outside the heightfield")]
    OutOfBounds { x: f64, y: f64 },
    #[error("invalid terrain: {0}")]
    InvalidTerrain(String),
    #[error("non-finite command field: {0}")]
    NonFiniteCommand(&'static str),
    #[error("self-righting requires the vehicle to be on the ground")]
    SelfRightAirborne,
    #[error("self-righting is blocked while carrying a payload")]
    SelfRightWithPayload,
}
