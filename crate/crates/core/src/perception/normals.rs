//! Per-point surface normals from local covariance, and the slope-based
//! navigability mask built on top of them.

use crate::geom::Vec3;
use crate::sensors::PointCloud;
use nalgebra::Matrix3;

use super::neighbors::NeighborIndex;

/// Normals aligned with the cloud, `None` where estimation failed for lack
/// of support. Valid normals are unit length with non-negative z.
#[derive(Debug, Clone)]
pub struct NormalCloud {
    pub normals: Vec<Option<Vec3>>,
}

impl NormalCloud {
    pub fn valid_count(&self) -> usize {
        self.normals.iter().filter(|n| n.is_some()).count()
    }
}

/// Covariance normal of the `k` nearest neighbours within `search_radius`.
/// The smallest-eigenvalue eigenvector is taken and flipped upward; points
/// with fewer than `k` neighbours in range are flagged invalid.
pub fn estimate_normals(cloud: &PointCloud, k: usize, search_radius: f64) -> NormalCloud {
    let k = k.max(3);
    let points = &cloud.points;
    if points.is_empty() {
        return NormalCloud { normals: Vec::new() };
    }
    let index = NeighborIndex::build(points, search_radius);
    let normals = points
        .iter()
        .map(|p| {
            let nbrs = index.knn_within(points, p, k, search_radius);
            if nbrs.len() < k {
                return None;
            }
            let centroid: Vec3 = nbrs.iter().map(|&i| points[i]).sum::<Vec3>() / k as f64;
            let mut cov = Matrix3::zeros();
            for &i in &nbrs {
                let d = points[i] - centroid;
                cov += d * d.transpose();
            }
            let eig = nalgebra::SymmetricEigen::new(cov);
            let mut min_idx = 0;
            for i in 1..3 {
                if eig.eigenvalues[i] < eig.eigenvalues[min_idx] {
                    min_idx = i;
                }
            }
            let mut n = eig.eigenvectors.column(min_idx).into_owned();
            let len = n.norm();
            if len < 1e-12 {
                return None;
            }
            n /= len;
            if n.z < 0.0 {
                n = -n;
            }
            Some(n)
        })
        .collect();
    NormalCloud { normals }
}

/// Which points count as drivable ground.
#[derive(Debug, Clone)]
pub struct NavigabilityMask {
    pub navigable: Vec<bool>,
    pub slope_threshold: f64,
}

impl NavigabilityMask {
    pub fn navigable_count(&self) -> usize {
        self.navigable.iter().filter(|&&b| b).count()
    }
}

/// A point is navigable when its normal deviates from vertical by at most
/// `slope_threshold` radians. Invalid normals are never navigable.
pub fn segment_navigable(normals: &NormalCloud, slope_threshold: f64) -> NavigabilityMask {
    let cos_lim = slope_threshold.cos();
    let navigable = normals
        .normals
        .iter()
        .map(|n| n.map_or(false, |n| n.z >= cos_lim - 1e-12))
        .collect();
    NavigabilityMask {
        navigable,
        slope_threshold,
    }
}
