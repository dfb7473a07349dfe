//! Sensor models: a downward-facing depth camera rendered by ray casting
//! against the scene, back-projection into point clouds, and the winch drum
//! encoder.

mod camera;
mod cloud;
mod encoder;

pub use camera::{project_point, render_depth, CameraIntrinsics, DepthImage, DepthNoise};
pub use cloud::{depth_to_cloud, Frame, PointCloud};
pub use encoder::{length_from_encoder, read_encoder, EncoderReading};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SensorError {
    #[error("invalid camera intrinsics: {0}")]
    InvalidIntrinsics(String),
    #[error("point cloud i/o: {0}")]
    CloudIo(#[from] std::io::Error),
    #[error("malformed point record at line {line}: {text:?}")]
    MalformedPoint { line: usize, text: String },
}
