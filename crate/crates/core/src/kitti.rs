//! Bit-exact parsers for KITTI velodyne binaries, label text files and
//! calibration files.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::geometry::{Calib, PointCloud};

#[derive(Debug, Error)]
pub enum KittiError {
    #[error("velodyne buffer length {0} is not a multiple of 16")]
    MisalignedBuffer(usize),
    #[error("malformed label line {line_no}: {reason}")]
    MalformedLine { line_no: usize, reason: String },
    #[error("calib file is missing key {0}")]
    MissingKey(String),
    #[error("calib key {name} has {got} floats, expected {want}")]
    BadFloatCount { name: String, want: usize, got: usize },
}

/// One KITTI label line, still in the camera frame.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelRecord {
    pub class_name: String,
    pub class_code: u32,
    pub truncation: f32,
    pub occlusion: i32,
    pub alpha: f32,
    pub bbox2d: [f32; 4],
    /// (height, width, length) meters.
    pub dims_hwl: [f32; 3],
    pub location_cam: [f32; 3],
    pub rotation_y: f32,
}

/// The paper's class table: background=0, Car=1, Pedestrian=2, Cyclist=3.
pub fn default_class_map() -> BTreeMap<String, u32> {
    BTreeMap::from([
        ("Car".to_string(), 1),
        ("Pedestrian".to_string(), 2),
        ("Cyclist".to_string(), 3),
    ])
}

/// Decode a velodyne .bin buffer: N consecutive (x, y, z, r) little-endian f32.
pub fn parse_velodyne(bytes: &[u8]) -> Result<PointCloud, KittiError> {
    if bytes.len() % 16 != 0 {
        return Err(KittiError::MisalignedBuffer(bytes.len()));
    }
    let values = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    Ok(PointCloud::from_xyzr(values))
}

pub fn write_velodyne(cloud: &PointCloud) -> Vec<u8> {
    let mut out = Vec::with_capacity(cloud.count() * 16);
    for i in 0..cloud.count() {
        for &v in &cloud.row(i)[..4] {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

/// Parse a label file. Lines whose class is absent from `class_map`
/// (DontCare, Van, ...) are skipped; the skip count is returned alongside.
pub fn parse_labels(
    text: &str,
    class_map: &BTreeMap<String, u32>,
) -> Result<(Vec<LabelRecord>, usize), KittiError> {
    let mut records = Vec::new();
    let mut skipped = 0;
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        let class_name = fields[0];
        let Some(&class_code) = class_map.get(class_name) else {
            skipped += 1;
            continue;
        };
        // 15 fields, or 16 with a trailing score which is ignored
        if fields.len() != 15 && fields.len() != 16 {
            return Err(KittiError::MalformedLine {
                line_no,
                reason: format!("{} fields, expected 15 or 16", fields.len()),
            });
        }
        let num = |i: usize| -> Result<f32, KittiError> {
            fields[i].parse().map_err(|_| KittiError::MalformedLine {
                line_no,
                reason: format!("field {} ({:?}) is not a number", i + 1, fields[i]),
            })
        };
        records.push(LabelRecord {
            class_name: class_name.to_string(),
            class_code,
            truncation: num(1)?,
            occlusion: num(2)? as i32,
            alpha: num(3)?,
            bbox2d: [num(4)?, num(5)?, num(6)?, num(7)?],
            dims_hwl: [num(8)?, num(9)?, num(10)?],
            location_cam: [num(11)?, num(12)?, num(13)?],
            rotation_y: num(14)?,
        });
    }
    Ok((records, skipped))
}

/// Format a record back into KITTI's 15-field layout with 2-decimal floats.
/// Used for test fixtures and the synthetic scene writer.
pub fn format_label(record: &LabelRecord) -> String {
    format!(
        "{} {:.2} {} {:.2} {:.2} {:.2} {:.2} {:.2} {:.2} {:.2} {:.2} {:.2} {:.2} {:.2} {:.2}",
        record.class_name,
        record.truncation,
        record.occlusion,
        record.alpha,
        record.bbox2d[0],
        record.bbox2d[1],
        record.bbox2d[2],
        record.bbox2d[3],
        record.dims_hwl[0],
        record.dims_hwl[1],
        record.dims_hwl[2],
        record.location_cam[0],
        record.location_cam[1],
        record.location_cam[2],
        record.rotation_y,
    )
}

fn parse_calib_key(text: &str, name: &str, want: usize) -> Result<Vec<f64>, KittiError> {
    for line in text.lines() {
        let Some(rest) = line.strip_prefix(name).and_then(|r| r.strip_prefix(':')) else {
            continue;
        };
        let floats: Result<Vec<f64>, _> = rest.split_whitespace().map(str::parse).collect();
        let floats = floats.map_err(|_| KittiError::BadFloatCount {
            name: name.to_string(),
            want,
            got: 0,
        })?;
        if floats.len() != want {
            return Err(KittiError::BadFloatCount {
                name: name.to_string(),
                want,
                got: floats.len(),
            });
        }
        return Ok(floats);
    }
    Err(KittiError::MissingKey(name.to_string()))
}

/// Parse R0_rect (9 floats) and Tr_velo_to_cam (12 floats), row-major.
/// Projection matrices P0-P3 are ignored.
pub fn parse_calib(text: &str) -> Result<Calib, KittiError> {
    let r = parse_calib_key(text, "R0_rect", 9)?;
    let t = parse_calib_key(text, "Tr_velo_to_cam", 12)?;
    Ok(Calib {
        rect: [
            [r[0], r[1], r[2]],
            [r[3], r[4], r[5]],
            [r[6], r[7], r[8]],
        ],
        velo_to_cam: [
            [t[0], t[1], t[2], t[3]],
            [t[4], t[5], t[6], t[7]],
            [t[8], t[9], t[10], t[11]],
        ],
    })
}

pub fn format_calib(calib: &Calib) -> String {
    let mut out = String::new();
    out.push_str("R0_rect:");
    for row in &calib.rect {
        for v in row {
            out.push_str(&format!(" {v}"));
        }
    }
    out.push('\n');
    out.push_str("Tr_velo_to_cam:");
    for row in &calib.velo_to_cam {
        for v in row {
            out.push_str(&format!(" {v}"));
        }
    }
    out.push('\n');
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn velodyne_decode() {
        let mut bytes = Vec::new();
        for v in [1.0f32, 2.0, 3.0, 0.5, 4.0, 5.0, 6.0, 0.25] {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        let cloud = parse_velodyne(&bytes).unwrap();
        assert_eq!(cloud.count(), 2);
        assert_eq!(cloud.row(0), &[1.0, 2.0, 3.0, 0.5]);
        assert_eq!(cloud.row(1), &[4.0, 5.0, 6.0, 0.25]);
    }

    #[test]
    fn velodyne_empty_and_misaligned() {
        assert_eq!(parse_velodyne(&[]).unwrap().count(), 0);
        assert!(matches!(
            parse_velodyne(&[0u8; 17]).unwrap_err(),
            KittiError::MisalignedBuffer(17)
        ));
    }

    #[test]
    fn label_line_fields() {
        let line = "Car 0.00 0 -1.58 587.01 173.33 614.12 200.12 1.65 1.67 3.64 -0.65 1.71 46.70 -1.59";
        let (records, skipped) = parse_labels(line, &default_class_map()).unwrap();
        assert_eq!(skipped, 0);
        assert_eq!(records.len(), 1);
        let r = &records[0];
        assert_eq!(r.class_name, "Car");
        assert_eq!(r.class_code, 1);
        assert_eq!(r.dims_hwl, [1.65, 1.67, 3.64]);
        assert_eq!(r.location_cam, [-0.65, 1.71, 46.70]);
        assert_eq!(r.rotation_y, -1.59);
    }

    #[test]
    fn unknown_class_skipped() {
        let text = "DontCare -1 -1 -10 503.89 169.71 590.61 190.13 -1 -1 -1 -1000 -1000 -1000 -10";
        let (records, skipped) = parse_labels(text, &default_class_map()).unwrap();
        assert!(records.is_empty());
        assert_eq!(skipped, 1);
    }

    #[test]
    fn short_line_rejected() {
        let text = "Car 0.00 0 -1.58 587.01 173.33 614.12 200.12 1.65 1.67 3.64 -0.65 1.71";
        assert!(matches!(
            parse_labels(text, &default_class_map()).unwrap_err(),
            KittiError::MalformedLine { line_no: 1, .. }
        ));
    }

    #[test]
    fn trailing_score_accepted() {
        let line = "Car 0.00 0 -1.58 587.01 173.33 614.12 200.12 1.65 1.67 3.64 -0.65 1.71 46.70 -1.59 0.98";
        let (records, _) = parse_labels(line, &default_class_map()).unwrap();
        assert_eq!(records.len(), 1);
    }

    #[test]
    fn calib_identity() {
        let text = "R0_rect: 1 0 0 0 1 0 0 0 1\nTr_velo_to_cam: 1 0 0 0 0 1 0 0 0 0 1 0\n";
        assert_eq!(parse_calib(text).unwrap(), Calib::identity());
    }

    #[test]
    fn calib_missing_key() {
        let text = "R0_rect: 1 0 0 0 1 0 0 0 1\n";
        assert!(matches!(
            parse_calib(text).unwrap_err(),
            KittiError::MissingKey(k) if k == "Tr_velo_to_cam"
        ));
    }

    #[test]
    fn calib_bad_float_count() {
        let text = "R0_rect: 1 0 0 0 1 0 0 0\nTr_velo_to_cam: 1 0 0 0 0 1 0 0 0 0 1 0\n";
        assert!(matches!(
            parse_calib(text).unwrap_err(),
            KittiError::BadFloatCount { got: 8, .. }
        ));
    }

    #[test]
    fn label_round_trip_within_half_cent() {
        let rec = LabelRecord {
            class_name: "Pedestrian".to_string(),
            class_code: 2,
            truncation: 0.13,
            occlusion: 1,
            alpha: -0.734,
            bbox2d: [10.1, 20.2, 30.3, 40.4],
            dims_hwl: [1.789, 0.611, 0.922],
            location_cam: [3.456, 1.234, 12.987],
            rotation_y: 1.271,
        };
        let line = format_label(&rec);
        let (back, _) = parse_labels(&line, &default_class_map()).unwrap();
        let b = &back[0];
        assert!((b.truncation - rec.truncation).abs() <= 0.005);
        for i in 0..3 {
            assert!((b.dims_hwl[i] - rec.dims_hwl[i]).abs() <= 0.005);
            assert!((b.location_cam[i] - rec.location_cam[i]).abs() <= 0.005);
        }
        assert!((b.rotation_y - rec.rotation_y).abs() <= 0.005);
    }

    #[test]
    fn velodyne_concat_property() {
        let a: Vec<u8> = (0..32).collect();
        let b: Vec<u8> = (32..64).collect();
        let ab: Vec<u8> = (0..64).collect();
        let ca = parse_velodyne(&a).unwrap();
        let cb = parse_velodyne(&b).unwrap();
        let cab = parse_velodyne(&ab).unwrap();
        let mut joined = ca.values.clone();
        joined.extend_from_slice(&cb.values);
        assert_eq!(cab.values.to_vec(), joined);
    }
}
