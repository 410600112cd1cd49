//! GT-painting, BEV gridding and the three semantic-passing distillation
//! losses (class-wise, pixel-wise, instance-wise) as pure numerical kernels,
//! together with KITTI parsing and a synthetic-scene generator.

pub mod bevgrid;
pub mod geometry;
pub mod kitti;
pub mod oracle;
pub mod painting;
pub mod passing;
pub mod scene;
pub mod tensor;

pub use bevgrid::{GridSpec, MaskStack};
pub use geometry::{Calib, OrientedBox3D, PointCloud};
pub use painting::{PaintEncoding, PaintedCloud};
pub use passing::{LossReport, PassingWeights};
pub use tensor::{Dtype, Tensor};
