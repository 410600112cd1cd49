//! Pillarization of point clouds into H x W x D x M stand-in feature
//! volumes, the reshape to BEV, and per-class foreground/background mask
//! rasterization from oriented boxes.
//!
//! Pillar features per cell (M = 4): point count / 100 clamped to 1,
//! mean z normalized into the z range, mean reflectance, and the fraction
//! of foreground points taken from the paint channel (0 when unpainted).

use thiserror::Error;

use crate::geometry::{OrientedBox3D, PointCloud};
use crate::painting::PaintedCloud;
use crate::tensor::Tensor;

pub const PILLAR_CHANNELS: usize = 4;

#[derive(Debug, Error)]
pub enum GridError {
    #[error("grid is degenerate: H, W and D must all be positive")]
    GridDegenerate,
    #[error("range ({min}, {max}) is not a positive multiple of cell size {cell}")]
    RangeNotMultiple { min: f64, max: f64, cell: f64 },
    #[error("expected a rank-4 tensor, got rank {0}")]
    RankMismatch(usize),
}

/// Voxel geometry. H runs along y, W along x, D along z.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub x_range: (f64, f64),
    pub y_range: (f64, f64),
    pub z_range: (f64, f64),
    pub cell: (f64, f64, f64),
}

fn cells(range: (f64, f64), cell: f64) -> Result<usize, GridError> {
    let width = range.1 - range.0;
    if !(cell > 0.0) || width <= 0.0 {
        return Err(GridError::RangeNotMultiple { min: range.0, max: range.1, cell });
    }
    let n = width / cell;
    if (n - n.round()).abs() > 1e-9 * n.max(1.0) || n.round() < 1.0 {
        return Err(GridError::RangeNotMultiple { min: range.0, max: range.1, cell });
    }
    Ok(n.round() as usize)
}

impl GridSpec {
    pub fn new(
        x_range: (f64, f64),
        y_range: (f64, f64),
        z_range: (f64, f64),
        cell: (f64, f64, f64),
    ) -> Result<Self, GridError> {
        let spec = GridSpec { x_range, y_range, z_range, cell };
        spec.dims()?;
        Ok(spec)
    }

    /// The KITTI grid: x (0, 69.12), y (-39.68, 39.68), z (-3, 1),
    /// cells 0.16 x 0.16 x 4 m.
    pub fn kitti() -> Self {
        GridSpec::new((0.0, 69.12), (-39.68, 39.68), (-3.0, 1.0), (0.16, 0.16, 4.0)).unwrap()
    }

    /// (H, W, D).
    pub fn dims(&self) -> Result<(usize, usize, usize), GridError> {
        let h = cells(self.y_range, self.cell.1)?;
        let w = cells(self.x_range, self.cell.0)?;
        let d = cells(self.z_range, self.cell.2)?;
        if h == 0 || w == 0 || d == 0 {
            return Err(GridError::GridDegenerate);
        }
        Ok((h, w, d))
    }

    /// Cell index along one axis. Boundary points go to the larger-index
    /// cell; the grid's max edge is upper-inclusive (clamped to the last
    /// cell). None when outside the range.
    fn axis_index(value: f64, range: (f64, f64), cell: f64, count: usize) -> Option<usize> {
        if value < range.0 || value > range.1 {
            return None;
        }
        let idx = ((value - range.0) / cell).floor() as usize;
        Some(idx.min(count - 1))
    }

    /// (h, w, d) cell of a point, or None when out of range.
    pub fn cell_of(&self, p: [f64; 3]) -> Option<(usize, usize, usize)> {
        let (hn, wn, dn) = self.dims().ok()?;
        let h = Self::axis_index(p[1], self.y_range, self.cell.1, hn)?;
        let w = Self::axis_index(p[0], self.x_range, self.cell.0, wn)?;
        let d = Self::axis_index(p[2], self.z_range, self.cell.2, dn)?;
        Some((h, w, d))
    }

    /// BEV center (x, y) of cell (h, w).
    pub fn cell_center(&self, h: usize, w: usize) -> [f64; 2] {
        [
            self.x_range.0 + (w as f64 + 0.5) * self.cell.0,
            self.y_range.0 + (h as f64 + 0.5) * self.cell.1,
        ]
    }
}

/// Which complement defines a class's background mask.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BackgroundMode {
    /// M_bg[c] = 1 - M_fg[c]: other classes' foreground counts as background.
    #[default]
    PerClass,
    /// M_bg[c] = 1 - OR over all classes' foreground.
    AllClass,
}

/// Per-class binary BEV masks plus the aggregates.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskStack {
    pub height: usize,
    pub width: usize,
    pub per_class_fg: Vec<Tensor>,
    pub per_class_bg: Vec<Tensor>,
    pub agg_fg: Tensor,
    pub agg_bg: Tensor,
}

impl MaskStack {
    pub fn num_classes(&self) -> usize {
        self.per_class_fg.len()
    }

    /// Stack every plane into one SPTN u8 tensor of shape
    /// (2C + 2) x H x W, in order fg_1..fg_C, bg_1..bg_C, agg_fg, agg_bg.
    pub fn to_tensor(&self) -> Tensor {
        let plane = self.height * self.width;
        let c = self.num_classes();
        let mut data = Vec::with_capacity((2 * c + 2) * plane);
        for t in self.per_class_fg.iter().chain(&self.per_class_bg) {
            data.extend_from_slice(t.as_u8_slice().unwrap());
        }
        data.extend_from_slice(self.agg_fg.as_u8_slice().unwrap());
        data.extend_from_slice(self.agg_bg.as_u8_slice().unwrap());
        Tensor::from_u8(vec![2 * c + 2, self.height, self.width], data).unwrap()
    }

    pub fn from_tensor(t: &Tensor) -> Result<MaskStack, GridError> {
        let shape = t.shape();
        if shape.len() != 3 || shape[0] < 4 || shape[0] % 2 != 0 {
            return Err(GridError::RankMismatch(shape.len()));
        }
        let c = (shape[0] - 2) / 2;
        let (height, width) = (shape[1], shape[2]);
        let plane = height * width;
        let data = t.as_u8_slice().ok_or(GridError::RankMismatch(shape.len()))?;
        let slice = |i: usize| {
            Tensor::from_u8(vec![height, width], data[i * plane..(i + 1) * plane].to_vec()).unwrap()
        };
        Ok(MaskStack {
            height,
            width,
            per_class_fg: (0..c).map(slice).collect(),
            per_class_bg: (c..2 * c).map(slice).collect(),
            agg_fg: slice(2 * c),
            agg_bg: slice(2 * c + 1),
        })
    }
}

/// Pillarize a raw point cloud (no paint channel, foreground fraction 0).
pub fn pillarize(cloud: &PointCloud, grid: &GridSpec) -> Result<Tensor, GridError> {
    pillarize_impl(cloud, None, grid)
}

/// Pillarize a painted cloud; the paint channel feeds the foreground
/// fraction feature.
pub fn pillarize_painted(cloud: &PaintedCloud, grid: &GridSpec) -> Result<Tensor, GridError> {
    pillarize_impl(&cloud.base, Some(cloud), grid)
}

fn pillarize_impl(
    cloud: &PointCloud,
    painted: Option<&PaintedCloud>,
    grid: &GridSpec,
) -> Result<Tensor, GridError> {
    let (h, w, d) = grid.dims()?;
    let cells = h * w * d;
    let mut count = vec![0u64; cells];
    let mut sum_z = vec![0.0f64; cells];
    let mut sum_r = vec![0.0f64; cells];
    let mut fg = vec![0u64; cells];
    for i in 0..cloud.count() {
        let p = cloud.xyz(i);
        let Some((ch, cw, cd)) = grid.cell_of(p) else {
            continue;
        };
        let idx = (ch * w + cw) * d + cd;
        count[idx] += 1;
        sum_z[idx] += p[2];
        sum_r[idx] += cloud.row(i)[3] as f64;
        if let Some(pc) = painted {
            if pc.class_of(i) != 0 {
                fg[idx] += 1;
            }
        }
    }
    let z_span = grid.z_range.1 - grid.z_range.0;
    let mut data = vec![0.0f64; cells * PILLAR_CHANNELS];
    for idx in 0..cells {
        if count[idx] == 0 {
            continue;
        }
        let n = count[idx] as f64;
        let base = idx * PILLAR_CHANNELS;
        data[base] = (n / 100.0).min(1.0);
        data[base + 1] = (sum_z[idx] / n - grid.z_range.0) / z_span;
        data[base + 2] = sum_r[idx] / n;
        data[base + 3] = fg[idx] as f64 / n;
    }
    Ok(Tensor::from_f64(vec![h, w, d, PILLAR_CHANNELS], data).unwrap())
}

/// Reshape H x W x D x M into H x W x K with K = D * M. Pure reindexing:
/// element (h, w, d, m) lands at channel d * M + m, which for row-major
/// storage is the identity on the flat buffer.
pub fn compress_bev(v3d: &Tensor) -> Result<Tensor, GridError> {
    let shape = v3d.shape();
    if shape.len() != 4 {
        return Err(GridError::RankMismatch(shape.len()));
    }
    let (h, w, d, m) = (shape[0], shape[1], shape[2], shape[3]);
    Ok(v3d.reshaped(vec![h, w, d * m]).unwrap())
}

/// Rasterize per-class foreground masks: cell (h, w) is foreground for
/// class c iff its center lies inside (inclusive) the BEV footprint of any
/// class-c box.
pub fn rasterize_class_masks(
    boxes: &[OrientedBox3D],
    grid: &GridSpec,
    num_classes: usize,
    bg_mode: BackgroundMode,
) -> Result<MaskStack, GridError> {
    let (h, w, _) = grid.dims()?;
    let plane = h * w;
    let mut fg_planes = vec![vec![0u8; plane]; num_classes];
    for b in boxes {
        let c = b.class_code as usize;
        if c == 0 || c > num_classes {
            continue;
        }
        let plane_data = &mut fg_planes[c - 1];
        for ch in 0..h {
            for cw in 0..w {
                let center = grid.cell_center(ch, cw);
                if bev_contains(b, center) {
                    plane_data[ch * w + cw] = 1;
                }
            }
        }
    }
    let mut agg = vec![0u8; plane];
    for p in &fg_planes {
        for (a, &v) in agg.iter_mut().zip(p) {
            *a |= v;
        }
    }
    let bg_planes: Vec<Vec<u8>> = fg_planes
        .iter()
        .map(|p| match bg_mode {
            BackgroundMode::PerClass => p.iter().map(|&v| 1 - v).collect(),
            BackgroundMode::AllClass => agg.iter().map(|&v| 1 - v).collect(),
        })
        .collect();
    let agg_bg: Vec<u8> = agg.iter().map(|&v| 1 - v).collect();
    let mk = |data: Vec<u8>| Tensor::from_u8(vec![h, w], data).unwrap();
    Ok(MaskStack {
        height: h,
        width: w,
        per_class_fg: fg_planes.into_iter().map(mk).collect(),
        per_class_bg: bg_planes.into_iter().map(mk).collect(),
        agg_fg: mk(agg),
        agg_bg: mk(agg_bg),
    })
}

/// Inclusive BEV containment via the inverse-rotation route.
fn bev_contains(b: &OrientedBox3D, p: [f64; 2]) -> bool {
    let dx = p[0] - b.center[0];
    let dy = p[1] - b.center[1];
    let (s, c) = b.yaw.sin_cos();
    let lx = c * dx + s * dy;
    let ly = -s * dx + c * dy;
    lx.abs() <= b.dims[0] / 2.0 && ly.abs() <= b.dims[1] / 2.0
}
