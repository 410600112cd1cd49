//! Python bindings for the spnet core: SPTN tensors, KITTI parsing,
//! GT-painting, BEV rasterization and the distillation losses.

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use std::path::PathBuf;

use spnet_core::bevgrid::{self, BackgroundMode};
use spnet_core::geometry::{self, box_cam_to_lidar};
use spnet_core::kitti;
use spnet_core::painting;
use spnet_core::passing::{
    self, ClassLossKind, DistillOptions, InstanceLossKind, LossId, PassingWeights, PixelLossKind,
};
use spnet_core::tensor;

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn io_err(e: impl std::fmt::Display) -> PyErr {
    PyIOError::new_err(e.to_string())
}

/// Dense row-major tensor backed by the SPTN file format.
#[pyclass(name = "Tensor", skip_from_py_object)]
#[derive(Clone)]
struct PyTensor {
    inner: tensor::Tensor,
}

#[pymethods]
impl PyTensor {
    #[staticmethod]
    fn from_f32(shape: Vec<usize>, data: Vec<f32>) -> PyResult<Self> {
        Ok(PyTensor { inner: tensor::Tensor::from_f32(shape, data).map_err(value_err)? })
    }

    #[staticmethod]
    fn from_f64(shape: Vec<usize>, data: Vec<f64>) -> PyResult<Self> {
        Ok(PyTensor { inner: tensor::Tensor::from_f64(shape, data).map_err(value_err)? })
    }

    #[staticmethod]
    fn from_u8(shape: Vec<usize>, data: Vec<u8>) -> PyResult<Self> {
        Ok(PyTensor { inner: tensor::Tensor::from_u8(shape, data).map_err(value_err)? })
    }

    #[staticmethod]
    fn zeros(shape: Vec<usize>) -> PyResult<Self> {
        Ok(PyTensor { inner: tensor::Tensor::zeros_f64(shape).map_err(value_err)? })
    }

    #[staticmethod]
    fn read(path: PathBuf) -> PyResult<Self> {
        Ok(PyTensor { inner: tensor::Tensor::read_from_file(&path).map_err(io_err)? })
    }

    fn write(&self, path: PathBuf) -> PyResult<usize> {
        self.inner.write_to_file(&path).map_err(io_err)
    }

    #[getter]
    fn shape(&self) -> Vec<usize> {
        self.inner.shape().to_vec()
    }

    #[getter]
    fn dtype(&self) -> &'static str {
        match self.inner.dtype() {
            tensor::Dtype::F32 => "f32",
            tensor::Dtype::F64 => "f64",
            tensor::Dtype::U8 => "u8",
        }
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    /// Element at a multi-dimensional index, as float.
    fn get(&self, index: Vec<usize>) -> f64 {
        self.inner.get(&index)
    }

    /// Flat row-major contents as a list of floats.
    fn tolist(&self) -> Vec<f64> {
        self.inner.to_f64_vec()
    }

    fn sum(&self) -> f64 {
        self.inner.sum()
    }

    fn reshaped(&self, shape: Vec<usize>) -> PyResult<Self> {
        Ok(PyTensor { inner: self.inner.reshaped(shape).map_err(value_err)? })
    }

    fn __repr__(&self) -> String {
        format!("Tensor(shape={:?}, dtype={})", self.inner.shape(), self.dtype())
    }

    fn __eq__(&self, other: &PyTensor) -> bool {
        self.inner == other.inner
    }
}

/// Lidar point cloud with x, y, z, reflectance columns.
#[pyclass(name = "PointCloud", skip_from_py_object)]
#[derive(Clone)]
struct PyPointCloud {
    inner: geometry::PointCloud,
}

#[pymethods]
impl PyPointCloud {
    /// Build from a flat [x0, y0, z0, r0, x1, ...] float list.
    #[new]
    fn new(values: Vec<f32>) -> PyResult<Self> {
        if values.len() % 4 != 0 {
            return Err(PyValueError::new_err("point values must come in groups of 4"));
        }
        Ok(PyPointCloud { inner: geometry::PointCloud::from_xyzr(values) })
    }

    #[getter]
    fn count(&self) -> usize {
        self.inner.count()
    }

    fn row(&self, i: usize) -> Vec<f32> {
        self.inner.row(i).to_vec()
    }

    fn __len__(&self) -> usize {
        self.inner.count()
    }

    fn __repr__(&self) -> String {
        format!("PointCloud(count={})", self.inner.count())
    }
}

/// Oriented 3D box in lidar frame; dims are (length, width, height).
#[pyclass(name = "Box3D", from_py_object)]
#[derive(Clone)]
struct PyBox3D {
    inner: geometry::OrientedBox3D,
}

#[pymethods]
impl PyBox3D {
    #[new]
    fn new(center: [f64; 3], dims: [f64; 3], yaw: f64, class_code: u32) -> Self {
        PyBox3D { inner: geometry::OrientedBox3D { center, dims, yaw, class_code } }
    }

    #[getter]
    fn center(&self) -> [f64; 3] {
        self.inner.center
    }

    #[getter]
    fn dims(&self) -> [f64; 3] {
        self.inner.dims
    }

    #[getter]
    fn yaw(&self) -> f64 {
        self.inner.yaw
    }

    #[getter]
    fn class_code(&self) -> u32 {
        self.inner.class_code
    }

    fn contains(&self, p: [f64; 3]) -> bool {
        geometry::point_in_box(p, &self.inner)
    }

    /// BEV footprint corners, counter-clockwise.
    fn footprint(&self) -> Vec<[f64; 2]> {
        geometry::box_bev_footprint(&self.inner).to_vec()
    }

    fn __repr__(&self) -> String {
        let b = &self.inner;
        format!(
            "Box3D(center={:?}, dims={:?}, yaw={}, class_code={})",
            b.center, b.dims, b.yaw, b.class_code
        )
    }
}

/// BEV grid: ranges plus cell size per axis.
#[pyclass(name = "GridSpec", skip_from_py_object)]
#[derive(Clone)]
struct PyGridSpec {
    inner: bevgrid::GridSpec,
}

#[pymethods]
impl PyGridSpec {
    #[new]
    fn new(
        x_range: (f64, f64),
        y_range: (f64, f64),
        z_range: (f64, f64),
        cell: (f64, f64, f64),
    ) -> PyResult<Self> {
        Ok(PyGridSpec {
            inner: bevgrid::GridSpec::new(x_range, y_range, z_range, cell).map_err(value_err)?,
        })
    }

    /// The standard KITTI detection grid (496 x 432 x 1 cells).
    #[staticmethod]
    fn kitti() -> Self {
        PyGridSpec { inner: bevgrid::GridSpec::kitti() }
    }

    /// (height, width, depth) in cells.
    fn dims(&self) -> PyResult<(usize, usize, usize)> {
        self.inner.dims().map_err(value_err)
    }

    fn cell_of(&self, p: [f64; 3]) -> Option<(usize, usize, usize)> {
        self.inner.cell_of(p)
    }

    fn cell_center(&self, h: usize, w: usize) -> [f64; 2] {
        self.inner.cell_center(h, w)
    }

    fn __repr__(&self) -> String {
        let g = &self.inner;
        format!(
            "GridSpec(x={:?}, y={:?}, z={:?}, cell={:?})",
            g.x_range, g.y_range, g.z_range, g.cell
        )
    }
}

/// Per-class foreground/background BEV masks plus the class-agnostic
/// aggregates.
#[pyclass(name = "MaskStack", skip_from_py_object)]
#[derive(Clone)]
struct PyMaskStack {
    inner: bevgrid::MaskStack,
}

#[pymethods]
impl PyMaskStack {
    #[staticmethod]
    fn from_tensor(t: &PyTensor) -> PyResult<Self> {
        Ok(PyMaskStack { inner: bevgrid::MaskStack::from_tensor(&t.inner).map_err(value_err)? })
    }

    /// Serialize as a [2C+2, H, W] u8 tensor.
    fn to_tensor(&self) -> PyTensor {
        PyTensor { inner: self.inner.to_tensor() }
    }

    #[getter]
    fn height(&self) -> usize {
        self.inner.height
    }

    #[getter]
    fn width(&self) -> usize {
        self.inner.width
    }

    #[getter]
    fn num_classes(&self) -> usize {
        self.inner.num_classes()
    }

    /// Foreground mask for 1-based class code `c`.
    fn fg(&self, c: usize) -> PyResult<PyTensor> {
        let t = self
            .inner
            .per_class_fg
            .get(c.wrapping_sub(1))
            .ok_or_else(|| PyValueError::new_err(format!("class {c} out of range")))?;
        Ok(PyTensor { inner: t.clone() })
    }

    /// Background mask for 1-based class code `c`.
    fn bg(&self, c: usize) -> PyResult<PyTensor> {
        let t = self
            .inner
            .per_class_bg
            .get(c.wrapping_sub(1))
            .ok_or_else(|| PyValueError::new_err(format!("class {c} out of range")))?;
        Ok(PyTensor { inner: t.clone() })
    }

    #[getter]
    fn agg_fg(&self) -> PyTensor {
        PyTensor { inner: self.inner.agg_fg.clone() }
    }

    #[getter]
    fn agg_bg(&self) -> PyTensor {
        PyTensor { inner: self.inner.agg_bg.clone() }
    }

    fn __repr__(&self) -> String {
        format!(
            "MaskStack(classes={}, height={}, width={})",
            self.inner.num_classes(),
            self.inner.height,
            self.inner.width
        )
    }
}

/// Point cloud with per-point class paint appended.
#[pyclass(name = "PaintedCloud", skip_from_py_object)]
#[derive(Clone)]
struct PyPaintedCloud {
    inner: painting::PaintedCloud,
}

#[pymethods]
impl PyPaintedCloud {
    #[getter]
    fn count(&self) -> usize {
        self.inner.count()
    }

    #[getter]
    fn paint_width(&self) -> usize {
        self.inner.paint_width
    }

    /// Class code of point `i` (0 = background).
    fn class_of(&self, i: usize) -> u32 {
        self.inner.class_of(i)
    }

    /// N x (4 + paint_width) f32 tensor.
    fn to_tensor(&self) -> PyResult<PyTensor> {
        Ok(PyTensor { inner: self.inner.to_tensor().map_err(value_err)? })
    }

    fn __repr__(&self) -> String {
        format!(
            "PaintedCloud(count={}, paint_width={})",
            self.inner.count(),
            self.inner.paint_width
        )
    }
}

/// Loss weights; defaults are the published training configuration.
#[pyclass(name = "PassingWeights", from_py_object)]
#[derive(Clone)]
struct PyPassingWeights {
    inner: PassingWeights,
}

#[pymethods]
impl PyPassingWeights {
    #[new]
    #[pyo3(signature = (lambda_c=0.1, lambda_f=10.0, lambda_p=10.0, lambda_fg=2.0, lambda_bg=0.1, epsilon=1e-6))]
    fn new(
        lambda_c: f64,
        lambda_f: f64,
        lambda_p: f64,
        lambda_fg: f64,
        lambda_bg: f64,
        epsilon: f64,
    ) -> Self {
        PyPassingWeights {
            inner: PassingWeights { lambda_c, lambda_f, lambda_p, lambda_fg, lambda_bg, epsilon },
        }
    }

    #[getter]
    fn lambda_c(&self) -> f64 {
        self.inner.lambda_c
    }

    #[getter]
    fn lambda_f(&self) -> f64 {
        self.inner.lambda_f
    }

    #[getter]
    fn lambda_p(&self) -> f64 {
        self.inner.lambda_p
    }

    #[getter]
    fn lambda_fg(&self) -> f64 {
        self.inner.lambda_fg
    }

    #[getter]
    fn lambda_bg(&self) -> f64 {
        self.inner.lambda_bg
    }

    #[getter]
    fn epsilon(&self) -> f64 {
        self.inner.epsilon
    }
}

/// Result of the combined distillation loss.
#[pyclass(name = "LossReport", skip_from_py_object)]
#[derive(Clone)]
struct PyLossReport {
    inner: passing::LossReport,
}

#[pymethods]
impl PyLossReport {
    #[getter]
    fn l_c(&self) -> f64 {
        self.inner.l_c
    }

    #[getter]
    fn l_f(&self) -> f64 {
        self.inner.l_f
    }

    #[getter]
    fn l_p(&self) -> f64 {
        self.inner.l_p
    }

    #[getter]
    fn l_total(&self) -> f64 {
        self.inner.l_total
    }

    #[getter]
    fn per_class_centers(&self) -> Option<Vec<Vec<f64>>> {
        self.inner.per_class_centers.clone()
    }

    fn to_csv(&self) -> String {
        self.inner.to_csv()
    }

    fn __repr__(&self) -> String {
        format!(
            "LossReport(l_c={}, l_f={}, l_p={}, l_total={})",
            self.inner.l_c, self.inner.l_f, self.inner.l_p, self.inner.l_total
        )
    }
}

fn unwrap_boxes(boxes: Vec<PyBox3D>) -> Vec<geometry::OrientedBox3D> {
    boxes.into_iter().map(|b| b.inner).collect()
}

fn class_kind(name: &str) -> PyResult<ClassLossKind> {
    match name {
        "frobenius" => Ok(ClassLossKind::Frobenius),
        "absolute" => Ok(ClassLossKind::Absolute),
        _ => Err(PyValueError::new_err(format!("unknown class loss kind {name:?}"))),
    }
}

fn pixel_kind(name: &str) -> PyResult<PixelLossKind> {
    match name {
        "l1" => Ok(PixelLossKind::L1),
        "l2" => Ok(PixelLossKind::L2),
        "kld" => Ok(PixelLossKind::Kld),
        _ => Err(PyValueError::new_err(format!("unknown pixel loss kind {name:?}"))),
    }
}

fn instance_kind(name: &str) -> PyResult<InstanceLossKind> {
    match name {
        "l1" => Ok(InstanceLossKind::L1),
        "l2" => Ok(InstanceLossKind::L2),
        "kld" => Ok(InstanceLossKind::Kld),
        _ => Err(PyValueError::new_err(format!("unknown instance loss kind {name:?}"))),
    }
}

/// Parse a raw velodyne buffer (N x 4 little-endian f32).
#[pyfunction]
fn parse_velodyne(bytes: Vec<u8>) -> PyResult<PyPointCloud> {
    Ok(PyPointCloud { inner: kitti::parse_velodyne(&bytes).map_err(value_err)? })
}

/// Parse KITTI label and calib text into lidar-frame boxes.
/// Unknown class names are skipped.
#[pyfunction]
fn load_boxes(label_text: &str, calib_text: &str) -> PyResult<Vec<PyBox3D>> {
    let (records, _skipped) =
        kitti::parse_labels(label_text, &kitti::default_class_map()).map_err(value_err)?;
    let calib = kitti::parse_calib(calib_text).map_err(value_err)?;
    records
        .iter()
        .map(|r| {
            box_cam_to_lidar(r, &calib)
                .map(|inner| PyBox3D { inner })
                .map_err(value_err)
        })
        .collect()
}

/// Append a single class-code column to every point.
#[pyfunction]
fn paint_categorical(cloud: &PyPointCloud, boxes: Vec<PyBox3D>) -> PyPaintedCloud {
    PyPaintedCloud { inner: painting::paint_categorical(&cloud.inner, &unwrap_boxes(boxes)) }
}

/// Append a (num_classes + 1)-wide one-hot paint to every point.
#[pyfunction]
fn paint_onehot(
    cloud: &PyPointCloud,
    boxes: Vec<PyBox3D>,
    num_classes: u32,
) -> PyResult<PyPaintedCloud> {
    Ok(PyPaintedCloud {
        inner: painting::paint_onehot(&cloud.inner, &unwrap_boxes(boxes), num_classes)
            .map_err(value_err)?,
    })
}

/// Rasterize boxes into per-class BEV masks. `bg_mode` is "per_class" or
/// "all_class".
#[pyfunction]
#[pyo3(signature = (boxes, grid, num_classes=3, bg_mode="per_class"))]
fn rasterize_class_masks(
    boxes: Vec<PyBox3D>,
    grid: &PyGridSpec,
    num_classes: usize,
    bg_mode: &str,
) -> PyResult<PyMaskStack> {
    let mode = match bg_mode {
        "per_class" => BackgroundMode::PerClass,
        "all_class" => BackgroundMode::AllClass,
        _ => return Err(PyValueError::new_err(format!("unknown bg_mode {bg_mode:?}"))),
    };
    Ok(PyMaskStack {
        inner: bevgrid::rasterize_class_masks(&unwrap_boxes(boxes), &grid.inner, num_classes, mode)
            .map_err(value_err)?,
    })
}

/// Aggregate points into H x W x D x 4 pillar features.
#[pyfunction]
fn pillarize(cloud: &PyPointCloud, grid: &PyGridSpec) -> PyResult<PyTensor> {
    Ok(PyTensor { inner: bevgrid::pillarize(&cloud.inner, &grid.inner).map_err(value_err)? })
}

/// Pillarize a painted cloud; the last channel is the foreground fraction.
#[pyfunction]
fn pillarize_painted(cloud: &PyPaintedCloud, grid: &PyGridSpec) -> PyResult<PyTensor> {
    Ok(PyTensor {
        inner: bevgrid::pillarize_painted(&cloud.inner, &grid.inner).map_err(value_err)?,
    })
}

/// Flatten H x W x D x M pillars into an H x W x (D*M) BEV tensor.
#[pyfunction]
fn compress_bev(v3d: &PyTensor) -> PyResult<PyTensor> {
    Ok(PyTensor { inner: bevgrid::compress_bev(&v3d.inner).map_err(value_err)? })
}

/// Masked mean feature over a foreground mask.
#[pyfunction]
fn class_center(v2d: &PyTensor, fg_mask: &PyTensor) -> PyResult<Vec<f64>> {
    passing::class_center(&v2d.inner, &fg_mask.inner).map_err(value_err)
}

/// Blend background features with the class center.
#[pyfunction]
fn global_feature(
    v2d: &PyTensor,
    fg_mask: &PyTensor,
    bg_mask: &PyTensor,
    center: Vec<f64>,
) -> PyResult<PyTensor> {
    Ok(PyTensor {
        inner: passing::global_feature(&v2d.inner, &fg_mask.inner, &bg_mask.inner, &center)
            .map_err(value_err)?,
    })
}

/// Per-pixel cosine similarity between features and the global feature.
#[pyfunction]
#[pyo3(signature = (v2d, global_feat, epsilon=1e-6))]
fn similarity_map(v2d: &PyTensor, global_feat: &PyTensor, epsilon: f64) -> PyResult<PyTensor> {
    Ok(PyTensor {
        inner: passing::similarity_map(&v2d.inner, &global_feat.inner, epsilon)
            .map_err(value_err)?
            .values,
    })
}

/// Class-wise similarity-map loss; returns (loss, gradient wrt student).
#[pyfunction]
#[pyo3(signature = (vt2d, vs2d, masks, epsilon=1e-6, kind="frobenius"))]
fn class_wise_loss(
    vt2d: &PyTensor,
    vs2d: &PyTensor,
    masks: &PyMaskStack,
    epsilon: f64,
    kind: &str,
) -> PyResult<(f64, PyTensor)> {
    let (l, g) =
        passing::class_wise_loss(&vt2d.inner, &vs2d.inner, &masks.inner, epsilon, class_kind(kind)?)
            .map_err(value_err)?;
    Ok((l, PyTensor { inner: g }))
}

/// Foreground-masked pixel loss; returns (loss, gradient wrt student).
#[pyfunction]
#[pyo3(signature = (ft, fs, fg_mask, epsilon=1e-6, kind="l2"))]
fn pixel_wise_loss(
    ft: &PyTensor,
    fs: &PyTensor,
    fg_mask: &PyTensor,
    epsilon: f64,
    kind: &str,
) -> PyResult<(f64, PyTensor)> {
    let (l, g) =
        passing::pixel_wise_loss(&ft.inner, &fs.inner, &fg_mask.inner, epsilon, pixel_kind(kind)?)
            .map_err(value_err)?;
    Ok((l, PyTensor { inner: g }))
}

/// Weighted foreground/background instance loss; returns (loss, gradient).
#[pyfunction]
#[pyo3(signature = (ot, os, fg_mask, bg_mask, weights=None, kind="kld"))]
fn instance_wise_loss(
    ot: &PyTensor,
    os: &PyTensor,
    fg_mask: &PyTensor,
    bg_mask: &PyTensor,
    weights: Option<PyPassingWeights>,
    kind: &str,
) -> PyResult<(f64, PyTensor)> {
    let w = weights.map(|w| w.inner).unwrap_or_default();
    let (l, g) = passing::instance_wise_loss(
        &ot.inner,
        &os.inner,
        &fg_mask.inner,
        &bg_mask.inner,
        &w,
        instance_kind(kind)?,
    )
    .map_err(value_err)?;
    Ok((l, PyTensor { inner: g }))
}

/// Masked KL divergence with inputs clamped into [epsilon, 1].
#[pyfunction]
#[pyo3(signature = (ft, fs, mask, epsilon=1e-6))]
fn masked_kld(ft: &PyTensor, fs: &PyTensor, mask: &PyTensor, epsilon: f64) -> PyResult<f64> {
    passing::masked_kld(&ft.inner, &fs.inner, &mask.inner, epsilon).map_err(value_err)
}

/// Combined distillation loss over the three teacher/student tensor pairs.
#[pyfunction]
#[pyo3(signature = (vt2d, vs2d, ft, fs, ot, os, masks, weights=None,
                    class_kind="frobenius", pixel_kind="l2", instance_kind="kld"))]
#[allow(clippy::too_many_arguments)]
fn total_distill_loss(
    vt2d: &PyTensor,
    vs2d: &PyTensor,
    ft: &PyTensor,
    fs: &PyTensor,
    ot: &PyTensor,
    os: &PyTensor,
    masks: &PyMaskStack,
    weights: Option<PyPassingWeights>,
    class_kind: &str,
    pixel_kind: &str,
    instance_kind: &str,
) -> PyResult<PyLossReport> {
    let w = weights.map(|w| w.inner).unwrap_or_default();
    let options = DistillOptions {
        class_kind: self::class_kind(class_kind)?,
        pixel_kind: self::pixel_kind(pixel_kind)?,
        instance_kind: self::instance_kind(instance_kind)?,
    };
    Ok(PyLossReport {
        inner: passing::total_distill_loss(
            &vt2d.inner,
            &vs2d.inner,
            &ft.inner,
            &fs.inner,
            &ot.inner,
            &os.inner,
            &masks.inner,
            &w,
            &options,
        )
        .map_err(value_err)?,
    })
}

/// Central finite-difference check of an analytic gradient. `loss` is
/// "class", "pixel" or "instance"; returns a dict with max_rel_err,
/// worst_index, analytic_at_worst and fd_at_worst.
#[pyfunction]
#[pyo3(signature = (loss, height=8, width=8, channels=4, num_classes=2, seed=1, step=1e-5))]
fn finite_diff_check(
    py: Python<'_>,
    loss: &str,
    height: usize,
    width: usize,
    channels: usize,
    num_classes: usize,
    seed: u64,
    step: f64,
) -> PyResult<Py<PyAny>> {
    let id = match loss {
        "class" => LossId::Class,
        "pixel" => LossId::Pixel,
        "instance" => LossId::Instance,
        _ => return Err(PyValueError::new_err(format!("unknown loss {loss:?}"))),
    };
    let r = passing::finite_diff_check(id, height, width, channels, num_classes, seed, step);
    let dict = pyo3::types::PyDict::new(py);
    dict.set_item("max_rel_err", r.max_rel_err)?;
    dict.set_item("worst_index", r.worst_index)?;
    dict.set_item("analytic_at_worst", r.analytic_at_worst)?;
    dict.set_item("fd_at_worst", r.fd_at_worst)?;
    Ok(dict.into_any().unbind())
}

/// Normalize an angle into (-pi, pi].
#[pyfunction]
fn normalize_angle(a: f64) -> f64 {
    geometry::normalize_angle(a)
}

#[pymodule]
fn spnet_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyTensor>()?;
    m.add_class::<PyPointCloud>()?;
    m.add_class::<PyBox3D>()?;
    m.add_class::<PyGridSpec>()?;
    m.add_class::<PyMaskStack>()?;
    m.add_class::<PyPaintedCloud>()?;
    m.add_class::<PyPassingWeights>()?;
    m.add_class::<PyLossReport>()?;
    m.add_function(wrap_pyfunction!(parse_velodyne, m)?)?;
    m.add_function(wrap_pyfunction!(load_boxes, m)?)?;
    m.add_function(wrap_pyfunction!(paint_categorical, m)?)?;
    m.add_function(wrap_pyfunction!(paint_onehot, m)?)?;
    m.add_function(wrap_pyfunction!(rasterize_class_masks, m)?)?;
    m.add_function(wrap_pyfunction!(pillarize, m)?)?;
    m.add_function(wrap_pyfunction!(pillarize_painted, m)?)?;
    m.add_function(wrap_pyfunction!(compress_bev, m)?)?;
    m.add_function(wrap_pyfunction!(class_center, m)?)?;
    m.add_function(wrap_pyfunction!(global_feature, m)?)?;
    m.add_function(wrap_pyfunction!(similarity_map, m)?)?;
    m.add_function(wrap_pyfunction!(class_wise_loss, m)?)?;
    m.add_function(wrap_pyfunction!(pixel_wise_loss, m)?)?;
    m.add_function(wrap_pyfunction!(instance_wise_loss, m)?)?;
    m.add_function(wrap_pyfunction!(masked_kld, m)?)?;
    m.add_function(wrap_pyfunction!(total_distill_loss, m)?)?;
    m.add_function(wrap_pyfunction!(finite_diff_check, m)?)?;
    m.add_function(wrap_pyfunction!(normalize_angle, m)?)?;
    Ok(())
}
