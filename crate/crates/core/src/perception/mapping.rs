//! Incremental voxel map of the explored surface. The map can be paused so
//! dynamic scenes (a descending tether head, a driving vehicle) do not smear
//! into it.

use std::collections::HashSet;

use crate::geom::Vec3;
use crate::sensors::{Frame, PointCloud};

/// Sparse voxel map keeping the first point that lands in each voxel.
/// Representatives keep insertion order, so iteration is deterministic.
#[derive(Debug, Clone)]
pub struct AccumulatedMap {
    voxel_size: f64,
    paused: bool,
    occupied: HashSet<(i64, i64, i64)>,
    reps: Vec<Vec3>,
}

impl AccumulatedMap {
    pub fn new(voxel_size: f64) -> Self {
        assert!(voxel_size > 0.0, "voxel size must be positive");
        Self {
            voxel_size,
            paused: false,
            occupied: HashSet::new(),
            reps: Vec::new(),
        }
    }

    fn key(&self, p: &Vec3) -> (i64, i64, i64) {
        (
            (p.x / self.voxel_size).floor() as i64,
            (p.y / self.voxel_size).floor() as i64,
            (p.z / self.voxel_size).floor() as i64,
        )
    }

    /// Inserts the cloud's points; no-op while paused. Returns how many new
    /// voxels were claimed.
    pub fn insert_cloud(&mut self, cloud: &PointCloud) -> usize {
        if self.paused {
            return 0;
        }
        let before = self.reps.len();
        for p in &cloud.points {
            if self.occupied.insert(self.key(p)) {
                self.reps.push(*p);
            }
        }
        self.reps.len() - before
    }

    pub fn pause(&mut self) {
        self.paused = true;
    }

    pub fn resume(&mut self) {
        self.paused = false;
    }

    pub fn is_paused(&self) -> bool {
        self.paused
    }

    /// Number of occupied voxels.
    pub fn len(&self) -> usize {
        self.reps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.reps.is_empty()
    }

    pub fn voxel_size(&self) -> f64 {
        self.voxel_size
    }

    pub fn representatives(&self) -> &[Vec3] {
        &self.reps
    }

    /// Snapshot of the representatives as a world-frame cloud.
    pub fn representatives_cloud(&self) -> PointCloud {
        PointCloud::new(self.reps.clone(), Frame::World)
    }
}
