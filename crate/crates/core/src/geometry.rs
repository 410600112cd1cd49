//! Oriented boxes, point containment and camera->lidar frame transforms.

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::{Matrix3, Vector3};
use thiserror::Error;

use crate::kitti::LabelRecord;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("calibration matrix is singular")]
    SingularCalib,
}

/// 7-DoF box in the lidar frame. `center.z` sits at the gravity center,
/// not the KITTI bottom face. `class_code` 0 is reserved for background.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrientedBox3D {
    pub center: [f64; 3],
    /// (length, width, height), all strictly positive.
    pub dims: [f64; 3],
    /// Rotation about +z in (-pi, pi].
    pub yaw: f64,
    pub class_code: u32,
}

/// KITTI rectification and velodyne->camera rigid transform.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Calib {
    /// R0_rect, row-major 3x3.
    pub rect: [[f64; 3]; 3],
    /// Tr_velo_to_cam, row-major 3x4 (rotation | translation).
    pub velo_to_cam: [[f64; 4]; 3],
}

impl Calib {
    pub fn identity() -> Self {
        Calib {
            rect: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
            velo_to_cam: [
                [1.0, 0.0, 0.0, 0.0],
                [0.0, 1.0, 0.0, 0.0],
                [0.0, 0.0, 1.0, 0.0],
            ],
        }
    }
}

/// N lidar points, row-major N x C, first four channels (x, y, z, reflectance).
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    pub columns: Vec<String>,
    pub values: Vec<f32>,
}

impl PointCloud {
    pub fn new(columns: Vec<String>, values: Vec<f32>) -> Self {
        assert!(columns.len() >= 4, "first four channels are fixed");
        assert_eq!(values.len() % columns.len(), 0);
        PointCloud { columns, values }
    }

    pub fn from_xyzr(values: Vec<f32>) -> Self {
        PointCloud::new(
            ["x", "y", "z", "reflectance"].map(String::from).to_vec(),
            values,
        )
    }

    pub fn width(&self) -> usize {
        self.columns.len()
    }

    pub fn count(&self) -> usize {
        self.values.len() / self.columns.len()
    }

    pub fn row(&self, i: usize) -> &[f32] {
        let c = self.width();
        &self.values[i * c..(i + 1) * c]
    }

    pub fn xyz(&self, i: usize) -> [f64; 3] {
        let r = self.row(i);
        [r[0] as f64, r[1] as f64, r[2] as f64]
    }
}

/// Wrap an angle into (-pi, pi].
pub fn normalize_angle(a: f64) -> f64 {
    let mut a = a % (2.0 * PI);
    if a <= -PI {
        a += 2.0 * PI;
    } else if a > PI {
        a -= 2.0 * PI;
    }
    a
}

/// True iff `p` lies inside `b`, boundaries inclusive: translate by
/// -center, rotate by -yaw about z, then check the axis-aligned extents.
pub fn point_in_box(p: [f64; 3], b: &OrientedBox3D) -> bool {
    let dx = p[0] - b.center[0];
    let dy = p[1] - b.center[1];
    let dz = p[2] - b.center[2];
    let (s, c) = b.yaw.sin_cos();
    let lx = c * dx + s * dy;
    let ly = -s * dx + c * dy;
    lx.abs() <= b.dims[0] / 2.0 && ly.abs() <= b.dims[1] / 2.0 && dz.abs() <= b.dims[2] / 2.0
}

/// BEV corners of the yaw-rotated length x width rectangle, counter-clockwise
/// starting from the (+l/2, +w/2) corner pre-rotation.
pub fn box_bev_footprint(b: &OrientedBox3D) -> [[f64; 2]; 4] {
    let hl = b.dims[0] / 2.0;
    let hw = b.dims[1] / 2.0;
    let (s, c) = b.yaw.sin_cos();
    let local = [[hl, hw], [-hl, hw], [-hl, -hw], [hl, -hw]];
    local.map(|[x, y]| [b.center[0] + c * x - s * y, b.center[1] + s * x + c * y])
}

/// BEV footprint area, used by painting's overlap tie-break.
pub fn box_footprint_area(b: &OrientedBox3D) -> f64 {
    b.dims[0] * b.dims[1]
}

/// Map a camera-frame KITTI label into a lidar-frame box.
///
/// Position goes through the inverse of rect * velo_to_cam; z is lifted from
/// the bottom-face center to the gravity center; the yaw convention is
/// yaw_lidar = -rotation_y - pi/2.
pub fn box_cam_to_lidar(label: &LabelRecord, calib: &Calib) -> Result<OrientedBox3D, GeometryError> {
    let rect = Matrix3::from_fn(|r, c| calib.rect[r][c]);
    let rot = Matrix3::from_fn(|r, c| calib.velo_to_cam[r][c]);
    let trans = Vector3::new(
        calib.velo_to_cam[0][3],
        calib.velo_to_cam[1][3],
        calib.velo_to_cam[2][3],
    );
    let rect_inv = rect.try_inverse().ok_or(GeometryError::SingularCalib)?;
    let rot_inv = rot.try_inverse().ok_or(GeometryError::SingularCalib)?;

    let cam = Vector3::new(
        label.location_cam[0] as f64,
        label.location_cam[1] as f64,
        label.location_cam[2] as f64,
    );
    let velo = rot_inv * (rect_inv * cam - trans);

    let (h, w, l) = (
        label.dims_hwl[0] as f64,
        label.dims_hwl[1] as f64,
        label.dims_hwl[2] as f64,
    );
    Ok(OrientedBox3D {
        center: [velo.x, velo.y, velo.z + h / 2.0],
        dims: [l, w, h],
        yaw: normalize_angle(-(label.rotation_y as f64) - FRAC_PI_2),
        class_code: label.class_code,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cube(class_code: u32) -> OrientedBox3D {
        OrientedBox3D {
            center: [0.0, 0.0, 0.0],
            dims: [2.0, 2.0, 2.0],
            yaw: 0.0,
            class_code,
        }
    }

    #[test]
    fn center_is_inside() {
        let b = OrientedBox3D {
            center: [3.0, -2.0, 1.0],
            dims: [1.0, 2.0, 3.0],
            yaw: 0.7,
            class_code: 1,
        };
        assert!(point_in_box(b.center, &b));
    }

    #[test]
    fn face_is_inclusive() {
        assert!(point_in_box([1.0, 0.0, 0.0], &cube(1)));
        assert!(point_in_box([1.0, 1.0, 1.0], &cube(1)));
        assert!(!point_in_box([1.0 + 1e-9, 0.0, 0.0], &cube(1)));
    }

    #[test]
    fn rotated_box_containment() {
        // length 4 along y after a pi/2 yaw
        let b = OrientedBox3D {
            center: [0.0, 0.0, 0.0],
            dims: [4.0, 2.0, 2.0],
            yaw: FRAC_PI_2,
            class_code: 1,
        };
        assert!(!point_in_box([1.5, 0.0, 0.0], &b));
        assert!(point_in_box([0.0, 1.5, 0.0], &b));
    }

    #[test]
    fn footprint_axis_aligned() {
        let b = cube(1);
        let got = box_bev_footprint(&b);
        let want = [[1.0, 1.0], [-1.0, 1.0], [-1.0, -1.0], [1.0, -1.0]];
        for (g, w) in got.iter().zip(&want) {
            assert!((g[0] - w[0]).abs() < 1e-12 && (g[1] - w[1]).abs() < 1e-12);
        }
    }

    #[test]
    fn footprint_pi_rotation_is_same_corner_set() {
        let mut b = cube(1);
        b.yaw = PI;
        let got = box_bev_footprint(&b);
        // same square, corners shifted by two positions
        let want = [[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]];
        for (g, w) in got.iter().zip(&want) {
            assert!((g[0] - w[0]).abs() < 1e-12 && (g[1] - w[1]).abs() < 1e-12);
        }
    }

    #[test]
    fn footprint_quarter_turn() {
        let b = OrientedBox3D {
            center: [0.0, 0.0, 0.0],
            dims: [4.0, 2.0, 2.0],
            yaw: FRAC_PI_2,
            class_code: 1,
        };
        let got = box_bev_footprint(&b);
        let want = [[-1.0, 2.0], [-1.0, -2.0], [1.0, -2.0], [1.0, 2.0]];
        for (g, w) in got.iter().zip(&want) {
            assert!((g[0] - w[0]).abs() < 1e-12 && (g[1] - w[1]).abs() < 1e-12);
        }
    }

    #[test]
    fn footprint_diagonal_matches_dims() {
        let b = OrientedBox3D {
            center: [2.0, -1.0, 0.5],
            dims: [3.0, 1.5, 1.0],
            yaw: 0.3,
            class_code: 2,
        };
        let half_diag = (b.dims[0].powi(2) + b.dims[1].powi(2)).sqrt() / 2.0;
        for corner in box_bev_footprint(&b) {
            let d = ((corner[0] - b.center[0]).powi(2) + (corner[1] - b.center[1]).powi(2)).sqrt();
            assert!((d - half_diag).abs() < 1e-12);
        }
    }

    #[test]
    fn normalize_angle_range() {
        assert!((normalize_angle(3.0 * PI) - PI).abs() < 1e-12);
        assert!((normalize_angle(-PI) - PI).abs() < 1e-12);
        assert_eq!(normalize_angle(0.25), 0.25);
    }
}
