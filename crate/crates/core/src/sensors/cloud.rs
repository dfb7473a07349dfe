//! Point clouds back-projected from depth images, plus a plain-text
//! `x y z` interchange format.

use crate::geom::Vec3;
use std::io::{BufRead, Write};

use super::camera::{camera_rotation, DepthImage};
use super::SensorError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Frame {
    Camera,
    World,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    pub points: Vec<Vec3>,
    pub frame: Frame,
    /// For organised clouds, the source pixel index of each point.
    pub pixel_index: Option<Vec<usize>>,
}

impl PointCloud {
    pub fn new(points: Vec<Vec3>, frame: Frame) -> Self {
        Self {
            points,
            frame,
            pixel_index: None,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Writes one `x y z` line per point.
    pub fn write_xyz<W: Write>(&self, mut out: W) -> Result<(), SensorError> {
        for p in &self.points {
            writeln!(out, "{} {} {}", p.x, p.y, p.z)?;
        }
        Ok(())
    }

    /// Reads whitespace-delimited `x y z` lines. Blank lines are skipped;
    /// anything else malformed is an error naming the offending line.
    pub fn read_xyz<R: BufRead>(input: R, frame: Frame) -> Result<Self, SensorError> {
        let mut points = Vec::new();
        for (i, line) in input.lines().enumerate() {
            let line = line?;
            let text = line.trim();
            if text.is_empty() {
                continue;
            }
            let mut parts = text.split_whitespace();
            let mut coord = [0.0f64; 3];
            for c in coord.iter_mut() {
                *c = parts
                    .next()
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| SensorError::MalformedPoint {
                        line: i + 1,
                        text: text.to_string(),
                    })?;
            }
            if parts.next().is_some() || coord.iter().any(|c| !c.is_finite()) {
                return Err(SensorError::MalformedPoint {
                    line: i + 1,
                    text: text.to_string(),
                });
            }
            points.push(Vec3::new(coord[0], coord[1], coord[2]));
        }
        Ok(Self::new(points, frame))
    }
}

/// Back-projects every finite pixel through the pinhole model. Camera-frame
/// output is `((u - cx) d / fx, (v - cy) d / fy, d)`; world-frame output
/// additionally applies the camera pose.
pub fn depth_to_cloud(image: &DepthImage, target: Frame) -> PointCloud {
    let intr = &image.intrinsics;
    let rot = camera_rotation(image.camera_yaw);
    let mut points = Vec::with_capacity(image.depths.len());
    let mut pixels = Vec::with_capacity(image.depths.len());
    for v in 0..intr.height {
        for u in 0..intr.width {
            let idx = (v * intr.width + u) as usize;
            let d = image.depths[idx];
            if !d.is_finite() {
                continue;
            }
            let p_cam = Vec3::new(
                (u as f64 - intr.cx) * d / intr.fx,
                (v as f64 - intr.cy) * d / intr.fy,
                d,
            );
            let p = match target {
                Frame::Camera => p_cam,
                Frame::World => image.camera_position + rot * p_cam,
            };
            points.push(p);
            pixels.push(idx);
        }
    }
    PointCloud {
        points,
        frame: target,
        pixel_index: Some(pixels),
    }
}
