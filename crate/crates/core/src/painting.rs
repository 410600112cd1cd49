//! GT-painting: decorate each point with a semantic class indicator derived
//! from the ground-truth boxes, in categorical or one-hot form.
//!
//! When several boxes contain a point the one with the smallest BEV
//! footprint area wins, ties broken by lowest list index.

use thiserror::Error;

use crate::geometry::{box_footprint_area, point_in_box, OrientedBox3D, PointCloud};
use crate::tensor::{Tensor, TensorError};

#[derive(Debug, Error)]
pub enum PaintError {
    #[error("box class code {code} exceeds num_classes {num_classes}")]
    ClassOutOfRange { code: u32, num_classes: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PaintEncoding {
    Categorical,
    OneHot,
}

/// A point cloud with paint channels appended after (x, y, z, r).
#[derive(Debug, Clone, PartialEq)]
pub struct PaintedCloud {
    pub base: PointCloud,
    pub encoding: PaintEncoding,
    /// 1 for categorical, num_classes + 1 for one-hot.
    pub paint_width: usize,
}

impl PaintedCloud {
    pub fn count(&self) -> usize {
        self.base.count()
    }

    /// Paint channels of point `i`.
    pub fn paint(&self, i: usize) -> &[f32] {
        let row = self.base.row(i);
        &row[row.len() - self.paint_width..]
    }

    /// Class code of point `i` regardless of encoding (argmax for one-hot).
    pub fn class_of(&self, i: usize) -> u32 {
        match self.encoding {
            PaintEncoding::Categorical => self.paint(i)[0] as u32,
            PaintEncoding::OneHot => self
                .paint(i)
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                .map(|(k, _)| k as u32)
                .unwrap_or(0),
        }
    }

    /// Serialize as an SPTN rank-2 f32 tensor of shape N x (4 + paint_width).
    pub fn to_tensor(&self) -> Result<Tensor, TensorError> {
        Tensor::from_f32(
            vec![self.count(), self.base.width()],
            self.base.values.clone(),
        )
    }
}

/// Pick the winning box index for a point, if any box contains it.
fn winning_box(p: [f64; 3], boxes: &[OrientedBox3D]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, b) in boxes.iter().enumerate() {
        if !point_in_box(p, b) {
            continue;
        }
        let area = box_footprint_area(b);
        match best {
            Some((_, best_area)) if area >= best_area => {}
            _ => best = Some((i, area)),
        }
    }
    best.map(|(i, _)| i)
}

/// Append one scalar channel holding the class code of the containing box,
/// or 0 for background.
pub fn paint_categorical(cloud: &PointCloud, boxes: &[OrientedBox3D]) -> PaintedCloud {
    let width = cloud.width();
    let mut values = Vec::with_capacity(cloud.count() * (width + 1));
    for i in 0..cloud.count() {
        values.extend_from_slice(cloud.row(i));
        let code = winning_box(cloud.xyz(i), boxes)
            .map(|b| boxes[b].class_code)
            .unwrap_or(0);
        values.push(code as f32);
    }
    let mut columns = cloud.columns.clone();
    columns.push("paint".to_string());
    PaintedCloud {
        base: PointCloud::new(columns, values),
        encoding: PaintEncoding::Categorical,
        paint_width: 1,
    }
}

/// Append num_classes + 1 channels; background sets slot 0, class c sets
/// slot c. Same containment and tie rule as categorical.
pub fn paint_onehot(
    cloud: &PointCloud,
    boxes: &[OrientedBox3D],
    num_classes: u32,
) -> Result<PaintedCloud, PaintError> {
    for b in boxes {
        if b.class_code > num_classes {
            return Err(PaintError::ClassOutOfRange {
                code: b.class_code,
                num_classes,
            });
        }
    }
    let paint_width = num_classes as usize + 1;
    let width = cloud.width();
    let mut values = Vec::with_capacity(cloud.count() * (width + paint_width));
    for i in 0..cloud.count() {
        values.extend_from_slice(cloud.row(i));
        let code = winning_box(cloud.xyz(i), boxes)
            .map(|b| boxes[b].class_code)
            .unwrap_or(0);
        for slot in 0..paint_width {
            values.push(if slot as u32 == code { 1.0 } else { 0.0 });
        }
    }
    let mut columns = cloud.columns.clone();
    for slot in 0..paint_width {
        columns.push(format!("paint{slot}"));
    }
    Ok(PaintedCloud {
        base: PointCloud::new(columns, values),
        encoding: PaintEncoding::OneHot,
        paint_width,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn car_box() -> OrientedBox3D {
        OrientedBox3D {
            center: [5.0, 0.0, 0.0],
            dims: [4.0, 2.0, 1.6],
            yaw: 0.0,
            class_code: 1,
        }
    }

    fn two_point_cloud() -> PointCloud {
        PointCloud::from_xyzr(vec![5.0, 0.0, 0.0, 0.5, 50.0, 20.0, 0.0, 0.1])
    }

    #[test]
    fn no_boxes_all_background() {
        let painted = paint_categorical(&two_point_cloud(), &[]);
        assert_eq!(painted.paint(0), &[0.0]);
        assert_eq!(painted.paint(1), &[0.0]);
    }

    #[test]
    fn car_point_gets_code_one() {
        let painted = paint_categorical(&two_point_cloud(), &[car_box()]);
        assert_eq!(painted.paint(0), &[1.0]);
        assert_eq!(painted.paint(1), &[0.0]);
    }

    #[test]
    fn smallest_footprint_wins() {
        let big = OrientedBox3D {
            center: [5.0, 0.0, 0.0],
            dims: [10.0, 10.0, 4.0],
            yaw: 0.0,
            class_code: 1,
        };
        let small = OrientedBox3D {
            center: [5.0, 0.0, 0.0],
            dims: [1.0, 1.0, 2.0],
            yaw: 0.3,
            class_code: 2,
        };
        let painted = paint_categorical(&two_point_cloud(), &[big, small]);
        assert_eq!(painted.paint(0), &[2.0]);
    }

    #[test]
    fn equal_footprint_ties_to_lowest_index() {
        let mut a = car_box();
        a.class_code = 3;
        let b = car_box();
        let painted = paint_categorical(&two_point_cloud(), &[a, b]);
        assert_eq!(painted.paint(0), &[3.0]);
    }

    #[test]
    fn onehot_car_row() {
        let painted = paint_onehot(&two_point_cloud(), &[car_box()], 3).unwrap();
        assert_eq!(painted.paint(0), &[0.0, 1.0, 0.0, 0.0]);
        assert_eq!(painted.paint(1), &[1.0, 0.0, 0.0, 0.0]);
        assert_eq!(painted.paint_width, 4);
    }

    #[test]
    fn onehot_rejects_out_of_range_code() {
        let mut b = car_box();
        b.class_code = 5;
        assert!(matches!(
            paint_onehot(&two_point_cloud(), &[b], 3).unwrap_err(),
            PaintError::ClassOutOfRange { code: 5, num_classes: 3 }
        ));
    }

    #[test]
    fn painted_tensor_shape() {
        let painted = paint_categorical(&two_point_cloud(), &[car_box()]);
        let t = painted.to_tensor().unwrap();
        assert_eq!(t.shape(), &[2, 5]);
        assert_eq!(t.get(&[0, 4]), 1.0);
    }
}
