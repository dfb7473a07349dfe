//! Deployment-zone search: find the navigable patch that best trades off
//! closeness to the requested entry point against local flatness.

use crate::geom::Vec3;
use crate::sensors::PointCloud;
use thiserror::Error;

use super::neighbors::NeighborIndex;
use super::normals::NavigabilityMask;
use super::plane::{fit_plane, FitMethod, Plane};

#[derive(Debug, Clone, PartialEq)]
pub struct ZoneParams {
    /// Radius of the neighbourhood a candidate must dominate.
    pub min_patch_radius: f64,
    pub w_dist: f64,
    pub w_flatness: f64,
    /// Fraction of the neighbourhood that must be navigable.
    pub min_navigable_fraction: f64,
}

impl Default for ZoneParams {
    fn default() -> Self {
        Self {
            min_patch_radius: 0.2,
            w_dist: 1.0,
            w_flatness: 50.0,
            min_navigable_fraction: 0.9,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeploymentZone {
    /// Candidate point projected onto the local plane.
    pub center: Vec3,
    pub plane: Plane,
    pub distance_to_entry: f64,
    pub score: f64,
    /// Index of the winning point in the input cloud.
    pub anchor_index: usize,
}

/// Why no zone could be produced.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ZoneSearchError {
    #[error("empty cloud")]
    EmptyCloud,
    #[error("no navigable points under the slope threshold")]
    NoNavigablePoints,
    #[error("no navigable point dominates a qualifying patch")]
    NoQualifyingPatch,
}

/// Scores every navigable point whose surrounding patch is at least
/// `min_navigable_fraction` navigable:
/// `score = w_dist * |p - entry| + w_flatness * rms(local plane fit)`.
/// The minimum wins; ties go to the lower point index.
pub fn find_deployment_zone(
    cloud: &PointCloud,
    mask: &NavigabilityMask,
    entry_point: &Vec3,
    params: &ZoneParams,
) -> Result<DeploymentZone, ZoneSearchError> {
    let points = &cloud.points;
    if points.is_empty() {
        return Err(ZoneSearchError::EmptyCloud);
    }
    assert_eq!(points.len(), mask.navigable.len(), "mask must match cloud");
    if mask.navigable_count() == 0 {
        return Err(ZoneSearchError::NoNavigablePoints);
    }

    let index = NeighborIndex::build(points, params.min_patch_radius);
    let mut best: Option<(f64, usize, Plane)> = None;
    for i in 0..points.len() {
        if !mask.navigable[i] {
            continue;
        }
        let patch = index.within(points, &points[i], params.min_patch_radius);
        if patch.len() < 3 {
            continue;
        }
        let navigable = patch.iter().filter(|&&j| mask.navigable[j]).count();
        if (navigable as f64) < params.min_navigable_fraction * patch.len() as f64 {
            continue;
        }
        let patch_points: Vec<Vec3> = patch.iter().map(|&j| points[j]).collect();
        let Ok(plane) = fit_plane(&patch_points, FitMethod::LeastSquares) else {
            continue;
        };
        let score = params.w_dist * (points[i] - entry_point).norm()
            + params.w_flatness * plane.rms_residual;
        if best.as_ref().map_or(true, |(s, _, _)| score < *s) {
            best = Some((score, i, plane));
        }
    }

    let (score, i, plane) = best.ok_or(ZoneSearchError::NoQualifyingPatch)?;
    let center = points[i] - plane.normal * plane.signed_distance(&points[i]);
    Ok(DeploymentZone {
        center,
        distance_to_entry: (points[i] - entry_point).norm(),
        score,
        plane,
        anchor_index: i,
    })
}
