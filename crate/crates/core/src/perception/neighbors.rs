//! Uniform-grid spatial index for fixed-radius neighbour queries. Results
//! are always sorted by point index, so downstream algorithms behave
//! identically to a brute-force scan.

use crate::geom::Vec3;
use std::collections::HashMap;

pub struct NeighborIndex {
    cell: f64,
    bins: HashMap<(i64, i64, i64), Vec<usize>>,
}

impl NeighborIndex {
    /// Builds an index whose cell size equals the query radius, so a radius
    /// query only has to visit the 27 surrounding bins.
    pub fn build(points: &[Vec3], radius: f64) -> Self {
        assert!(radius > 0.0, "radius must be positive");
        let mut bins: HashMap<(i64, i64, i64), Vec<usize>> = HashMap::new();
        for (i, p) in points.iter().enumerate() {
            bins.entry(Self::key(p, radius)).or_default().push(i);
        }
        Self { cell: radius, bins }
    }

    fn key(p: &Vec3, cell: f64) -> (i64, i64, i64) {
        (
            (p.x / cell).floor() as i64,
            (p.y / cell).floor() as i64,
            (p.z / cell).floor() as i64,
        )
    }

    /// Indices of all points within `radius` of `q` (inclusive), ascending.
    /// `radius` must not exceed the build radius.
    pub fn within(&self, points: &[Vec3], q: &Vec3, radius: f64) -> Vec<usize> {
        debug_assert!(radius <= self.cell + 1e-12);
        let (kx, ky, kz) = Self::key(q, self.cell);
        let r2 = radius * radius;
        let mut out = Vec::new();
        for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    if let Some(bin) = self.bins.get(&(kx + dx, ky + dy, kz + dz)) {
                        for &i in bin {
                            if (points[i] - q).norm_squared() <= r2 {
                                out.push(i);
                            }
                        }
                    }
                }
            }
        }
        out.sort_unstable();
        out
    }

    /// The `k` nearest points to `q` among those within `radius`, ordered by
    /// distance with index as the deterministic tie-break.
    pub fn knn_within(&self, points: &[Vec3], q: &Vec3, k: usize, radius: f64) -> Vec<usize> {
        let mut cands: Vec<(f64, usize)> = self
            .within(points, q, radius)
            .into_iter()
            .map(|i| ((points[i] - q).norm_squared(), i))
            .collect();
        cands.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        cands.truncate(k);
        cands.into_iter().map(|(_, i)| i).collect()
    }
}
