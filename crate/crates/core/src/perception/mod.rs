//! Geometry understanding on point clouds: surface normals, navigability,
//! plane fitting, density clustering, deployment-zone search, tether-head
//! tracking and the incremental voxel map.

mod cluster;
mod mapping;
mod neighbors;
mod normals;
mod plane;
mod tracker;
mod zone;

pub use cluster::{dbscan, select_target_cluster, Aoi, Cluster, ClusterWeights, DbscanResult};
pub use mapping::AccumulatedMap;
pub use neighbors::NeighborIndex;
pub use normals::{estimate_normals, segment_navigable, NavigabilityMask, NormalCloud};
pub use plane::{fit_plane, FitMethod, Plane, RansacParams};
pub use tracker::{
    filter_above_plane, fuse_head_estimate, HorizontalSource, TrackEstimate, VerticalSource,
};
pub use zone::{find_deployment_zone, DeploymentZone, ZoneParams, ZoneSearchError};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum PerceptionError {
    #[error("need at least {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}
