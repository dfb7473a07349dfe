//! Euclidean density clustering and the rule for picking the cluster a
//! tracking pipeline should lock onto.

use crate::geom::Vec3;

use super::neighbors::NeighborIndex;
use super::PerceptionError;

#[derive(Debug, Clone, PartialEq)]
pub struct Cluster {
    /// Member point indices, ascending.
    pub members: Vec<usize>,
    /// Aligned with `members`; true for density-core points.
    pub is_core: Vec<bool>,
    pub centroid: Vec3,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DbscanResult {
    /// Clusters in discovery order (by their lowest-index core point).
    pub clusters: Vec<Cluster>,
    /// Indices that belong to no cluster, ascending.
    pub noise: Vec<usize>,
    /// Per input point: does it have `min_pts` neighbours within `eps`?
    pub core: Vec<bool>,
}

impl DbscanResult {
    /// Cluster id per point, `None` for noise.
    pub fn labels(&self, n: usize) -> Vec<Option<usize>> {
        let mut labels = vec![None; n];
        for (ci, cluster) in self.clusters.iter().enumerate() {
            for &m in &cluster.members {
                labels[m] = Some(ci);
            }
        }
        labels
    }
}

/// Density clustering. A point is a core point when at least `min_pts`
/// points (itself included) lie within `eps`. Clusters are the connected
/// components of core points plus the border points they reach; border
/// points joining two clusters go to the one discovered first, and the scan
/// runs in ascending input order, so the full output is deterministic.
pub fn dbscan(points: &[Vec3], eps: f64, min_pts: usize) -> Result<DbscanResult, PerceptionError> {
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(PerceptionError::InvalidParameter(format!(
            "eps must be positive and finite, got {eps}"
        )));
    }
    if min_pts == 0 {
        return Err(PerceptionError::InvalidParameter(
            "min_pts must be at least 1".into(),
        ));
    }
    let n = points.len();
    if n == 0 {
        return Ok(DbscanResult {
            clusters: Vec::new(),
            noise: Vec::new(),
            core: Vec::new(),
        });
    }

    let index = NeighborIndex::build(points, eps);
    let neighborhoods: Vec<Vec<usize>> = (0..n)
        .map(|i| index.within(points, &points[i], eps))
        .collect();
    let core: Vec<bool> = neighborhoods.iter().map(|nb| nb.len() >= min_pts).collect();

    let mut assignment: Vec<Option<usize>> = vec![None; n];
    let mut clusters: Vec<Vec<usize>> = Vec::new();
    for seed in 0..n {
        if !core[seed] || assignment[seed].is_some() {
            continue;
        }
        let id = clusters.len();
        clusters.push(Vec::new());
        let mut queue = std::collections::VecDeque::from([seed]);
        assignment[seed] = Some(id);
        while let Some(j) = queue.pop_front() {
            clusters[id].push(j);
            for &q in &neighborhoods[j] {
                if assignment[q].is_none() {
                    assignment[q] = Some(id);
                    if core[q] {
                        queue.push_back(q);
                    } else {
                        clusters[id].push(q);
                    }
                }
            }
        }
    }

    let clusters = clusters
        .into_iter()
        .map(|mut members| {
            members.sort_unstable();
            let centroid =
                members.iter().map(|&m| points[m]).sum::<Vec3>() / members.len() as f64;
            let is_core = members.iter().map(|&m| core[m]).collect();
            Cluster {
                members,
                is_core,
                centroid,
            }
        })
        .collect();
    let noise = (0..n).filter(|&i| assignment[i].is_none()).collect();
    Ok(DbscanResult {
        clusters,
        noise,
        core,
    })
}

/// Cylindrical area of interest around a viewing ray.
#[derive(Debug, Clone, PartialEq)]
pub struct Aoi {
    pub origin: Vec3,
    pub direction: Vec3,
    pub radius: f64,
}

impl Aoi {
    pub fn new(origin: Vec3, direction: Vec3, radius: f64) -> Self {
        Self {
            origin,
            direction: direction.normalize(),
            radius,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClusterWeights {
    pub center: f64,
    pub range: f64,
}

impl Default for ClusterWeights {
    fn default() -> Self {
        Self {
            center: 1.0,
            range: 0.1,
        }
    }
}

/// Picks the most centred, closest cluster: among clusters whose centroid
/// lies within the area-of-interest radius of the ray, minimise
/// `w.center * perpendicular_distance + w.range * distance_along_ray`.
/// Ties go to the lower cluster index. `None` when nothing qualifies.
pub fn select_target_cluster(
    clusters: &[Cluster],
    aoi: &Aoi,
    weights: &ClusterWeights,
) -> Option<usize> {
    let mut best: Option<(f64, usize)> = None;
    for (i, cluster) in clusters.iter().enumerate() {
        let rel = cluster.centroid - aoi.origin;
        let along = rel.dot(&aoi.direction);
        let perp = (rel - aoi.direction * along).norm();
        if perp > aoi.radius {
            continue;
        }
        let score = weights.center * perp + weights.range * along;
        if best.map_or(true, |(s, _)| score < s) {
            best = Some((score, i));
        }
    }
    best.map(|(_, i)| i)
}
