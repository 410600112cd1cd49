//! Deterministic synthetic scene generator: boxes with class-typical sizes,
//! points scattered both inside boxes and across the whole range, and the
//! camera-frame label records needed to exercise the full parse path with
//! an identity calibration.

use std::f64::consts::{FRAC_PI_2, PI};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bevgrid::GridSpec;
use crate::geometry::{normalize_angle, OrientedBox3D, PointCloud};
use crate::kitti::LabelRecord;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SceneSpec {
    pub seed: u64,
    /// Boxes generated per class (classes 1..=3).
    pub boxes_per_class: usize,
    pub num_points: usize,
    pub grid: GridSpec,
    /// Stddev of the jitter applied to in-box points, meters.
    pub noise: f64,
}

impl Default for SceneSpec {
    fn default() -> Self {
        SceneSpec {
            seed: 0,
            boxes_per_class: 2,
            num_points: 2000,
            grid: GridSpec::kitti(),
            noise: 0.05,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Scene {
    pub cloud: PointCloud,
    pub boxes: Vec<OrientedBox3D>,
    pub labels: Vec<LabelRecord>,
}

const CLASS_NAMES: [&str; 3] = ["Car", "Pedestrian", "Cyclist"];
// (length, width, height) ranges per class
const CLASS_DIMS: [[(f64, f64); 3]; 3] = [
    [(3.2, 4.6), (1.5, 1.9), (1.4, 1.8)],
    [(0.5, 0.9), (0.5, 0.9), (1.6, 1.9)],
    [(1.5, 2.0), (0.5, 0.8), (1.6, 1.9)],
];

fn sample_normal(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller
    let u1: f64 = rng.random_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.random_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (2.0 * PI * u2).cos()
}

/// Convert a lidar-frame box into the camera-frame label record it would
/// carry under an identity calibration.
pub fn box_to_identity_label(b: &OrientedBox3D, class_name: &str) -> LabelRecord {
    LabelRecord {
        class_name: class_name.to_string(),
        class_code: b.class_code,
        truncation: 0.0,
        occlusion: 0,
        alpha: 0.0,
        bbox2d: [0.0; 4],
        dims_hwl: [b.dims[2] as f32, b.dims[1] as f32, b.dims[0] as f32],
        location_cam: [
            b.center[0] as f32,
            b.center[1] as f32,
            (b.center[2] - b.dims[2] / 2.0) as f32,
        ],
        rotation_y: normalize_angle(-b.yaw - FRAC_PI_2) as f32,
    }
}

/// Generate a scene. The seed fully determines the output.
pub fn generate(spec: &SceneSpec) -> Scene {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let grid = &spec.grid;
    let (x0, x1) = grid.x_range;
    let (y0, y1) = grid.y_range;
    let (z0, z1) = grid.z_range;

    let mut boxes = Vec::new();
    let mut labels = Vec::new();
    for class in 0..3 {
        for _ in 0..spec.boxes_per_class {
            let d = CLASS_DIMS[class];
            let dims = [
                rng.random_range(d[0].0..d[0].1),
                rng.random_range(d[1].0..d[1].1),
                rng.random_range(d[2].0..d[2].1),
            ];
            let margin = dims[0].max(dims[1]);
            let b = OrientedBox3D {
                center: [
                    rng.random_range(x0 + margin..x1 - margin),
                    rng.random_range(y0 + margin..y1 - margin),
                    rng.random_range((z0 + dims[2] / 2.0)..(z1 - dims[2] / 2.0)),
                ],
                dims,
                yaw: normalize_angle(rng.random_range(-PI..PI)),
                class_code: class as u32 + 1,
            };
            labels.push(box_to_identity_label(&b, CLASS_NAMES[class]));
            boxes.push(b);
        }
    }

    // roughly a third of the points cluster inside boxes when any exist
    let mut values = Vec::with_capacity(spec.num_points * 4);
    for i in 0..spec.num_points {
        let p = if !boxes.is_empty() && i % 3 == 0 {
            let b = &boxes[rng.random_range(0..boxes.len())];
            let lx = rng.random_range(-0.5..0.5) * b.dims[0] * 0.9;
            let ly = rng.random_range(-0.5..0.5) * b.dims[1] * 0.9;
            let lz = rng.random_range(-0.5..0.5) * b.dims[2] * 0.9;
            let (s, c) = b.yaw.sin_cos();
            [
                b.center[0] + c * lx - s * ly + spec.noise * sample_normal(&mut rng),
                b.center[1] + s * lx + c * ly + spec.noise * sample_normal(&mut rng),
                b.center[2] + lz + spec.noise * sample_normal(&mut rng),
            ]
        } else {
            [
                rng.random_range(x0..x1),
                rng.random_range(y0..y1),
                rng.random_range(z0..z1),
            ]
        };
        values.push(p[0] as f32);
        values.push(p[1] as f32);
        values.push(p[2] as f32);
        values.push(rng.random_range(0.0..1.0f32));
    }

    Scene {
        cloud: PointCloud::from_xyzr(values),
        boxes,
        labels,
    }
}
