//! Heightfield terrain with bilinear interpolation between grid nodes.

use super::WorldError;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Regular grid of elevations. Node `(r, c)` sits at world coordinates
/// `(origin.0 + c * cell_size, origin.1 + r * cell_size)`; heights are stored
/// row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Terrain {
    origin: (f64, f64),
    cell_size: f64,
    rows: usize,
    cols: usize,
    heights: Vec<f64>,
    min_height: f64,
    max_height: f64,
}

impl Terrain {
    pub fn new(
        origin: (f64, f64),
        cell_size: f64,
        rows: usize,
        cols: usize,
        heights: Vec<f64>,
    ) -> Result<Self, WorldError> {
        if !(cell_size > 0.0) || !cell_size.is_finite() {
            return Err(WorldError::InvalidTerrain(format!(
                "cell_size must be positive and finite, got {cell_size}"
            )));
        }
        if rows < 2 || cols < 2 {
            return Err(WorldError::InvalidTerrain(format!(
                "grid must be at least 2x2, got {rows}x{cols}"
            )));
        }
        if heights.len() != rows * cols {
            return Err(WorldError::InvalidTerrain(format!(
                "expected {} heights, got {}",
                rows * cols,
                heights.len()
            )));
        }
        if !origin.0.is_finite() || !origin.1.is_finite() {
            return Err(WorldError::InvalidTerrain("origin must be finite".into()));
        }
        if heights.iter().any(|h| !h.is_finite()) {
            return Err(WorldError::InvalidTerrain(
                "heights must all be finite".into(),
            ));
        }
        let min_height = heights.iter().cloned().fold(f64::INFINITY, f64::min);
        let max_height = heights.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        Ok(Self {
            origin,
            cell_size,
            rows,
            cols,
            heights,
            min_height,
            max_height,
        })
    }

    /// Flat terrain of constant elevation covering `extent` metres square,
    /// centred on the origin of the world frame.
    pub fn flat(extent: f64, cell_size: f64, elevation: f64) -> Result<Self, WorldError> {
        let nodes = (extent / cell_size).round() as usize + 1;
        let origin = (-extent / 2.0, -extent / 2.0);
        Self::new(origin, cell_size, nodes, nodes, vec![elevation; nodes * nodes])
    }

    /// Plane rising along +x at `slope` (rise over run), elevation 0 at x=0.
    pub fn ramp(extent: f64, cell_size: f64, slope: f64) -> Result<Self, WorldError> {
        let nodes = (extent / cell_size).round() as usize + 1;
        let origin = (-extent / 2.0, -extent / 2.0);
        let mut heights = Vec::with_capacity(nodes * nodes);
        for _r in 0..nodes {
            for c in 0..nodes {
                let x = origin.0 + c as f64 * cell_size;
                heights.push(x * slope);
            }
        }
        Self::new(origin, cell_size, nodes, nodes, heights)
    }

    /// Smooth random terrain: a coarse lattice of seeded random elevations in
    /// `[0, amplitude]`, bilinearly upsampled onto the full grid. The same
    /// seed always produces the same field.
    pub fn procedural(
        extent: f64,
        cell_size: f64,
        amplitude: f64,
        feature_size: f64,
        seed: u64,
    ) -> Result<Self, WorldError> {
        if !(amplitude >= 0.0) || !(feature_size > 0.0) {
            return Err(WorldError::InvalidTerrain(
                "procedural terrain needs amplitude >= 0 and feature_size > 0".into(),
            ));
        }
        let nodes = (extent / cell_size).round() as usize + 1;
        let origin = (-extent / 2.0, -extent / 2.0);
        let coarse_n = ((extent / feature_size).ceil() as usize).max(1) + 1;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let coarse: Vec<f64> = (0..coarse_n * coarse_n)
            .map(|_| rng.gen_range(0.0..=1.0) * amplitude)
            .collect();
        let coarse_cell = extent / (coarse_n - 1) as f64;
        let mut heights = Vec::with_capacity(nodes * nodes);
        for r in 0..nodes {
            for c in 0..nodes {
                let x = c as f64 * cell_size;
                let y = r as f64 * cell_size;
                let gx = (x / coarse_cell).min((coarse_n - 1) as f64 - 1e-9);
                let gy = (y / coarse_cell).min((coarse_n - 1) as f64 - 1e-9);
                let i = gx.floor() as usize;
                let j = gy.floor() as usize;
                let fx = gx - i as f64;
                let fy = gy - j as f64;
                let h00 = coarse[j * coarse_n + i];
                let h01 = coarse[j * coarse_n + i + 1];
                let h10 = coarse[(j + 1) * coarse_n + i];
                let h11 = coarse[(j + 1) * coarse_n + i + 1];
                heights.push(
                    h00 * (1.0 - fx) * (1.0 - fy)
                        + h01 * fx * (1.0 - fy)
                        + h10 * (1.0 - fx) * fy
                        + h11 * fx * fy,
                );
            }
        }
        Self::new(origin, cell_size, nodes, nodes, heights)
    }

    /// Raises every node inside the axis-aligned rectangle to at least
    /// `height` above its current elevation. Used to build walls and raised
    /// structures such as the mouth of a confined space.
    pub fn raise_box(&mut self, x0: f64, y0: f64, x1: f64, y1: f64, height: f64) {
        for r in 0..self.rows {
            for c in 0..self.cols {
                let x = self.origin.0 + c as f64 * self.cell_size;
                let y = self.origin.1 + r as f64 * self.cell_size;
                if x >= x0 && x <= x1 && y >= y0 && y <= y1 {
                    let h = &mut self.heights[r * self.cols + c];
                    *h += height;
                }
            }
        }
        self.max_height = self.heights.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        self.min_height = self.heights.iter().cloned().fold(f64::INFINITY, f64::min);
    }

    /// Bilinearly interpolated elevation at `(x, y)`.
    pub fn height_at(&self, x: f64, y: f64) -> Result<f64, WorldError> {
        let gx = (x - self.origin.0) / self.cell_size;
        let gy = (y - self.origin.1) / self.cell_size;
        if !gx.is_finite()
            || !gy.is_finite()
            || gx < 0.0
            || gy < 0.0
            || gx > (self.cols - 1) as f64
            || gy > (self.rows - 1) as f64
        {
            return Err(WorldError::OutOfBounds { x, y });
        }
        let i = (gx.floor() as usize).min(self.cols - 2);
        let j = (gy.floor() as usize).min(self.rows - 2);
        let fx = gx - i as f64;
        let fy = gy - j as f64;
        let h00 = self.heights[j * self.cols + i];
        let h01 = self.heights[j * self.cols + i + 1];
        let h10 = self.heights[(j + 1) * self.cols + i];
        let h11 = self.heights[(j + 1) * self.cols + i + 1];
        Ok(h00 * (1.0 - fx) * (1.0 - fy)
            + h01 * fx * (1.0 - fy)
            + h10 * (1.0 - fx) * fy
            + h11 * fx * fy)
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.origin.0
            && y >= self.origin.1
            && x <= self.origin.0 + (self.cols - 1) as f64 * self.cell_size
            && y <= self.origin.1 + (self.rows - 1) as f64 * self.cell_size
    }

    pub fn origin(&self) -> (f64, f64) {
        self.origin
    }

    pub fn cell_size(&self) -> f64 {
        self.cell_size
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn min_height(&self) -> f64 {
        self.min_height
    }

    pub fn max_height(&self) -> f64 {
        self.max_height
    }

    /// World-frame node position and height, row-major iteration.
    pub fn nodes(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        (0..self.rows).flat_map(move |r| {
            (0..self.cols).map(move |c| {
                (
                    self.origin.0 + c as f64 * self.cell_size,
                    self.origin.1 + r as f64 * self.cell_size,
                    self.heights[r * self.cols + c],
                )
            })
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn bilinear_midpoint_between_corners() {
        // Corners along x at heights 0,1 and 1,1: the x-midpoint of the lower
        // edge interpolates to 0.5.
        let t = Terrain::new((0.0, 0.0), 1.0, 2, 2, vec![0.0, 1.0, 1.0, 1.0]).unwrap();
        assert_relative_eq!(t.height_at(0.5, 0.0).unwrap(), 0.5, epsilon = 1e-12);
        assert_relative_eq!(t.height_at(0.5, 0.5).unwrap(), 0.75, epsilon = 1e-12);
    }

    #[test]
    fn out_of_bounds_is_reported_with_coordinates() {
        let t = Terrain::flat(4.0, 0.5, 0.0).unwrap();
        let err = t.height_at(7.0, 0.0).unwrap_err();
        match err {
            WorldError::OutOfBounds { x, .. } => assert_relative_eq!(x, 7.0),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn flat_terrain_is_flat_everywhere() {
        let t = Terrain::flat(10.0, 0.25, 0.3).unwrap();
        for &(x, y) in &[(0.0, 0.0), (-4.9, 4.9), (3.3, -2.1)] {
            assert_relative_eq!(t.height_at(x, y).unwrap(), 0.3, epsilon = 1e-12);
        }
    }

    #[test]
    fn ramp_matches_analytic_plane() {
        let t = Terrain::ramp(8.0, 0.5, 0.2).unwrap();
        for &(x, y) in &[(0.0, 0.0), (1.0, 1.0), (-2.5, 3.0)] {
            assert_relative_eq!(t.height_at(x, y).unwrap(), 0.2 * x, epsilon = 1e-12);
        }
    }

    #[test]
    fn procedural_is_deterministic_and_bounded() {
        let a = Terrain::procedural(6.0, 0.25, 0.4, 1.5, 99).unwrap();
        let b = Terrain::procedural(6.0, 0.25, 0.4, 1.5, 99).unwrap();
        assert_eq!(a, b);
        assert!(a.min_height() >= 0.0 && a.max_height() <= 0.4 + 1e-12);
        let c = Terrain::procedural(6.0, 0.25, 0.4, 1.5, 100).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn raise_box_lifts_only_inside() {
        let mut t = Terrain::flat(4.0, 0.5, 0.0).unwrap();
        t.raise_box(0.0, 0.0, 1.0, 1.0, 0.8);
        assert_relative_eq!(t.height_at(0.5, 0.5).unwrap(), 0.8);
        assert_relative_eq!(t.height_at(-1.0, -1.0).unwrap(), 0.0);
        assert_relative_eq!(t.max_height(), 0.8);
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(Terrain::new((0.0, 0.0), 0.0, 2, 2, vec![0.0; 4]).is_err());
        assert!(Terrain::new((0.0, 0.0), 1.0, 1, 2, vec![0.0; 2]).is_err());
        assert!(Terrain::new((0.0, 0.0), 1.0, 2, 2, vec![0.0; 3]).is_err());
        assert!(Terrain::new((0.0, 0.0), 1.0, 2, 2, vec![0.0, f64::NAN, 0.0, 0.0]).is_err());
    }
}
