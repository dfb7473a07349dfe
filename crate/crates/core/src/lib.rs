//! Deterministic simulator and autonomy library for a marsupial aerial
//! deployment system: a UAV lowers a miniature tracked ground vehicle into a
//! confined space on a tether, verifies the landing, releases the vehicle,
//! supervises its ground work, and winches it back up afterwards.
//!
//! The crate is organised around the pipeline stages:
//!
//! * [`world`]: fixed-timestep physics of terrain, UAV, winch, tether head
//!   and ground vehicle. Bit-identical for a fixed config and seed.
//! * [`sensors`]: downward depth camera rendering, back-projection to point
//!   clouds, winch encoder model.
//! * [`perception`]: surface normals, navigability, plane fitting, density
//!   clustering, deployment-zone search, tether-head tracking, voxel mapping.
//! * [`control`]: B-spline trajectories, PID loops, winch rate control,
//!   flipper-arm posture, visual servoing.
//! * [`mission`]: the deployment/retrieval state machine and its
//!   touchdown/detachment verification rules.
//! * [`scenario`]: config parsing/validation, the end-to-end runner, event
//!   logs, trajectory files and batch execution.

pub mod control;
pub mod geom;
pub mod mission;
pub mod perception;
pub mod scenario;
pub mod sensors;
pub mod world;
