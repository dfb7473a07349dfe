//! Tether-head tracking: fuse the vision centroid with the winch encoder so
//! the vertical estimate survives camera occlusion.

use crate::geom::Vec3;
use crate::sensors::PointCloud;

use super::plane::Plane;

/// Where the vertical coordinate of an estimate came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VerticalSource {
    /// Blend of vision centroid and encoder-implied depth.
    Fused,
    /// Encoder only; the camera had no usable detection.
    Encoder,
}

/// Where the horizontal coordinates came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HorizontalSource {
    Vision,
    /// Last seen position carried forward through an occlusion.
    HoldLast,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackEstimate {
    pub position: Vec3,
    pub vertical_source: VerticalSource,
    pub horizontal_source: HorizontalSource,
    pub timestamp: f64,
}

/// Combines the detected head cluster (if any) with the encoder length.
///
/// With a detection, the vertical coordinate is
/// `alpha * centroid.z + (1 - alpha) * (anchor.z - deployed_len)` and the
/// horizontal comes straight from the centroid. Without one, the vertical
/// falls back to the encoder and the horizontal holds the previous estimate
/// (or the anchor when there is no history).
pub fn fuse_head_estimate(
    cluster_centroid: Option<&Vec3>,
    deployed_len: f64,
    anchor: &Vec3,
    previous: Option<&TrackEstimate>,
    now: f64,
    alpha: f64,
) -> TrackEstimate {
    let encoder_z = anchor.z - deployed_len;
    match cluster_centroid {
        Some(c) => TrackEstimate {
            position: Vec3::new(c.x, c.y, alpha * c.z + (1.0 - alpha) * encoder_z),
            vertical_source: VerticalSource::Fused,
            horizontal_source: HorizontalSource::Vision,
            timestamp: now,
        },
        None => {
            let (x, y) = match previous {
                Some(p) => (p.position.x, p.position.y),
                None => (anchor.x, anchor.y),
            };
            TrackEstimate {
                position: Vec3::new(x, y, encoder_z),
                vertical_source: VerticalSource::Encoder,
                horizontal_source: HorizontalSource::HoldLast,
                timestamp: now,
            }
        }
    }
}

/// Keeps the points at least `min_dist` above `plane`; used to strip the
/// ground before clustering airborne objects.
pub fn filter_above_plane(cloud: &PointCloud, plane: &Plane, min_dist: f64) -> PointCloud {
    let points: Vec<Vec3> = cloud
        .points
        .iter()
        .filter(|p| plane.signed_distance(p) >= min_dist)
        .copied()
        .collect();
    PointCloud::new(points, cloud.frame)
}
