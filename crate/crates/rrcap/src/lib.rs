//! Reduced-reference point cloud quality assessment via projected saliency.
//!
//! The reference side condenses a cloud into a kilobyte-scale payload of
//! downsampled per-view saliency maps plus per-view spatial-variation
//! scalars. The receiver side scores a distorted cloud against that payload
//! without ever seeing the original points.

pub mod error;
pub mod pointcloud;
pub mod projection;
pub mod payload;
pub mod quality;
pub mod saliency;

pub use error::{Error, Result};

/// Working 2D real grid for all image math.
pub type Grid = ndarray::Array2<f64>;
