//! Brute-force reference implementations used for cross-checking and for
//! the oracle files emitted by `spnet synth`.
//!
//! Nothing here may call into the production containment, painting or
//! rasterization paths; the value of these routines is that they reach the
//! same answers by a different construction.

use crate::geometry::{box_bev_footprint, OrientedBox3D, PointCloud};

/// Containment check built from the polygon footprint instead of the
/// rotate-and-compare route: a point is inside when it sits on the inner
/// side of all four footprint edges (inclusive) and within the z extent.
pub fn point_in_box_bruteforce(p: [f64; 3], b: &OrientedBox3D) -> bool {
    if (p[2] - b.center[2]).abs() > b.dims[2] / 2.0 + 1e-12 {
        return false;
    }
    point_in_footprint([p[0], p[1]], &box_bev_footprint(b))
}

/// Inclusive point-in-convex-quad test via edge cross products. Corners are
/// counter-clockwise, so "inside" means no strictly negative cross product.
/// A small tolerance absorbs the rotation round-off of exact-boundary points.
pub fn point_in_footprint(p: [f64; 2], corners: &[[f64; 2]; 4]) -> bool {
    for i in 0..4 {
        let a = corners[i];
        let b = corners[(i + 1) % 4];
        let cross = (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0]);
        if cross < -1e-9 {
            return false;
        }
    }
    true
}

/// O(N*B) categorical painter: every (point, box) pair is tested with the
/// brute-force containment; smallest footprint area wins, ties to the lowest
/// box index. Returns one class code per point.
pub fn paint_categorical_bruteforce(cloud: &PointCloud, boxes: &[OrientedBox3D]) -> Vec<u32> {
    let mut out = Vec::with_capacity(cloud.count());
    for i in 0..cloud.count() {
        let p = cloud.xyz(i);
        let mut best_code = 0;
        let mut best_area = f64::INFINITY;
        for b in boxes {
            if point_in_box_bruteforce(p, b) {
                let area = b.dims[0] * b.dims[1];
                if area < best_area {
                    best_area = area;
                    best_code = b.class_code;
                }
            }
        }
        out.push(best_code);
    }
    out
}
