//! `spnet` command line: file-to-file pipelines over the core kernels.
//!
//! Exit codes: 0 success, 1 check failure, 2 input/validation error,
//! 3 i/o error.

mod config;
mod pgm;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use spnet_core::bevgrid::{rasterize_class_masks, BackgroundMode, GridSpec, MaskStack};
use spnet_core::geometry::box_cam_to_lidar;
use spnet_core::kitti::{
    default_class_map, format_calib, format_label, parse_calib, parse_labels, parse_velodyne,
    write_velodyne,
};
use spnet_core::oracle::paint_categorical_bruteforce;
use spnet_core::painting::{paint_categorical, paint_onehot};
use spnet_core::passing::{
    class_center, finite_diff_check, global_feature, similarity_map, total_distill_loss,
    ClassLossKind, DistillOptions, InstanceLossKind, LossId, PassingWeights, PixelLossKind,
};
use spnet_core::scene::{generate, SceneSpec};
use spnet_core::tensor::Tensor;

use config::Config;

#[derive(Parser)]
#[command(name = "spnet", about = "GT-painting, BEV masks and semantic-passing distillation losses")]
struct Cli {
    /// Optional key=value config file; flags override config values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum EncodingArg {
    Categorical,
    Onehot,
}

#[derive(Clone, Copy, ValueEnum)]
enum BgModeArg {
    PerClass,
    AllClass,
}

#[derive(Clone, Copy, ValueEnum)]
enum PixelKindArg {
    L1,
    L2,
    Kld,
}

#[derive(Clone, Copy, ValueEnum)]
enum InstanceKindArg {
    L1,
    L2,
    Kld,
}

#[derive(Clone, Copy, ValueEnum)]
enum ClassKindArg {
    Frobenius,
    Absolute,
}

#[derive(Clone, Copy, ValueEnum)]
enum LossIdArg {
    Class,
    Pixel,
    Instance,
}

#[derive(Subcommand)]
enum Command {
    /// Paint a velodyne cloud with GT-box class indicators.
    Paint {
        #[arg(long)]
        velodyne: PathBuf,
        #[arg(long)]
        labels: PathBuf,
        #[arg(long)]
        calib: PathBuf,
        #[arg(long, value_enum)]
        encoding: Option<EncodingArg>,
        /// Number of classes for one-hot encoding.
        #[arg(long)]
        classes: Option<u32>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Rasterize per-class foreground/background BEV masks.
    Masks {
        #[arg(long)]
        labels: PathBuf,
        #[arg(long)]
        calib: PathBuf,
        /// Grid string "xmin:xmax:dx,ymin:ymax:dy,zmin:zmax:dz".
        #[arg(long)]
        grid: Option<String>,
        #[arg(long)]
        classes: Option<u32>,
        #[arg(long, value_enum)]
        bg_mode: Option<BgModeArg>,
        #[arg(long)]
        out: PathBuf,
        /// Emit one PGM heatmap per mask plane into this directory.
        #[arg(long)]
        pgm_dir: Option<PathBuf>,
    },
    /// Compute the combined distillation loss from tensor files.
    Distill {
        #[arg(long)]
        teacher_v2d: PathBuf,
        #[arg(long)]
        student_v2d: PathBuf,
        #[arg(long)]
        teacher_bev: PathBuf,
        #[arg(long)]
        student_bev: PathBuf,
        #[arg(long)]
        teacher_cls: PathBuf,
        #[arg(long)]
        student_cls: PathBuf,
        #[arg(long)]
        masks: PathBuf,
        #[arg(long)]
        lambda_c: Option<f64>,
        #[arg(long)]
        lambda_f: Option<f64>,
        #[arg(long)]
        lambda_p: Option<f64>,
        #[arg(long)]
        lambda_fg: Option<f64>,
        #[arg(long)]
        lambda_bg: Option<f64>,
        #[arg(long)]
        epsilon: Option<f64>,
        #[arg(long, value_enum)]
        class_loss: Option<ClassKindArg>,
        #[arg(long, value_enum)]
        pixel_loss: Option<PixelKindArg>,
        #[arg(long, value_enum)]
        instance_loss: Option<InstanceKindArg>,
        #[arg(long)]
        report: PathBuf,
        /// Emit |D_T - D_S| and per-pixel pixel-loss heatmaps as PGM.
        #[arg(long)]
        heatmap_dir: Option<PathBuf>,
    },
    /// Generate a deterministic synthetic scene plus its oracle paint file.
    Synth {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Boxes per class.
        #[arg(long, default_value_t = 2)]
        boxes: usize,
        #[arg(long, default_value_t = 2000)]
        points: usize,
        #[arg(long)]
        grid: Option<String>,
        #[arg(long, default_value_t = 0.05)]
        noise: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Verify an analytic gradient against central finite differences.
    Gradcheck {
        #[arg(value_enum)]
        loss: LossIdArg,
        /// Input size, e.g. "8x8x4".
        #[arg(long, default_value = "8x8x4")]
        size: String,
        #[arg(long, default_value_t = 2)]
        classes: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 1e-5)]
        step: f64,
    },
}

/// Error carrying the process exit code.
struct CliError {
    code: u8,
    message: String,
}

impl CliError {
    fn input(message: impl Into<String>) -> Self {
        CliError { code: 2, message: message.into() }
    }

    fn io(message: impl Into<String>) -> Self {
        CliError { code: 3, message: message.into() }
    }

    fn check(message: impl Into<String>) -> Self {
        CliError { code: 1, message: message.into() }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let config = match cli.config.as_deref().map(Config::load).transpose() {
        Ok(c) => c.unwrap_or_default(),
        Err(e) => {
            eprintln!("error: {}", e.message);
            return ExitCode::from(e.code);
        }
    };
    match run(cli.command, &config) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}

fn read_file(path: &Path) -> Result<Vec<u8>, CliError> {
    std::fs::read(path).map_err(|e| CliError::input(format!("cannot read {}: {e}", path.display())))
}

fn read_text(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path)
        .map_err(|e| CliError::input(format!("cannot read {}: {e}", path.display())))
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    std::fs::write(path, bytes)
        .map_err(|e| CliError::io(format!("cannot write {}: {e}", path.display())))
}

fn load_tensor(path: &Path) -> Result<Tensor, CliError> {
    let bytes = read_file(path)?;
    Tensor::read(&mut bytes.as_slice())
        .map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

fn save_tensor(path: &Path, t: &Tensor) -> Result<(), CliError> {
    let mut buf = Vec::new();
    t.write(&mut buf)
        .map_err(|e| CliError::io(format!("{}: {e}", path.display())))?;
    write_bytes(path, &buf)
}

/// Parse "xmin:xmax:dx,ymin:ymax:dy,zmin:zmax:dz".
fn parse_grid(s: &str) -> Result<GridSpec, CliError> {
    let axes: Vec<&str> = s.split(',').collect();
    if axes.len() != 3 {
        return Err(CliError::input(format!("grid string {s:?} needs 3 comma-separated axes")));
    }
    let mut parsed = Vec::new();
    for axis in axes {
        let parts: Vec<&str> = axis.split(':').collect();
        if parts.len() != 3 {
            return Err(CliError::input(format!("grid axis {axis:?} needs min:max:cell")));
        }
        let nums: Result<Vec<f64>, _> = parts.iter().map(|p| p.parse::<f64>()).collect();
        let nums = nums.map_err(|_| CliError::input(format!("grid axis {axis:?} has a bad number")))?;
        parsed.push(nums);
    }
    GridSpec::new(
        (parsed[0][0], parsed[0][1]),
        (parsed[1][0], parsed[1][1]),
        (parsed[2][0], parsed[2][1]),
        (parsed[0][2], parsed[1][2], parsed[2][2]),
    )
    .map_err(|e| CliError::input(format!("grid string {s:?}: {e}")))
}

fn load_boxes(
    labels_path: &Path,
    calib_path: &Path,
) -> Result<Vec<spnet_core::OrientedBox3D>, CliError> {
    let label_text = read_text(labels_path)?;
    let calib_text = read_text(calib_path)?;
    let (records, _skipped) = parse_labels(&label_text, &default_class_map())
        .map_err(|e| CliError::input(format!("{}: {e}", labels_path.display())))?;
    let calib = parse_calib(&calib_text)
        .map_err(|e| CliError::input(format!("{}: {e}", calib_path.display())))?;
    records
        .iter()
        .map(|r| {
            box_cam_to_lidar(r, &calib)
                .map_err(|e| CliError::input(format!("{}: {e}", calib_path.display())))
        })
        .collect()
}

fn grid_from(flag: Option<&str>, config: &Config) -> Result<GridSpec, CliError> {
    match flag.or(config.get("grid")) {
        Some(s) => parse_grid(s),
        None => Ok(GridSpec::kitti()),
    }
}

fn run(command: Command, config: &Config) -> Result<(), CliError> {
    match command {
        Command::Paint { velodyne, labels, calib, encoding, classes, out } => {
            let cloud = parse_velodyne(&read_file(&velodyne)?)
                .map_err(|e| CliError::input(format!("{}: {e}", velodyne.display())))?;
            let boxes = load_boxes(&labels, &calib)?;
            let encoding = encoding
                .map(|e| matches!(e, EncodingArg::Onehot))
                .or_else(|| config.get("encoding").map(|v| v == "onehot"))
                .unwrap_or(false);
            let num_classes = classes
                .or_else(|| config.get("classes").and_then(|v| v.parse().ok()))
                .unwrap_or(3);
            let painted = if encoding {
                paint_onehot(&cloud, &boxes, num_classes)
                    .map_err(|e| CliError::input(e.to_string()))?
            } else {
                paint_categorical(&cloud, &boxes)
            };
            let tensor = painted
                .to_tensor()
                .map_err(|e| CliError::input(e.to_string()))?;
            save_tensor(&out, &tensor)?;
            let mut per_class: BTreeMap<u32, usize> = BTreeMap::new();
            for i in 0..painted.count() {
                *per_class.entry(painted.class_of(i)).or_default() += 1;
            }
            let fg: usize = per_class.iter().filter(|(&c, _)| c != 0).map(|(_, &n)| n).sum();
            println!("n_points={}", painted.count());
            println!("fg_points={fg}");
            for (&c, &n) in per_class.iter().filter(|(&c, _)| c != 0) {
                println!("class_{c}={n}");
            }
            Ok(())
        }
        Command::Masks { labels, calib, grid, classes, bg_mode, out, pgm_dir } => {
            let grid = grid_from(grid.as_deref(), config)?;
            let boxes = load_boxes(&labels, &calib)?;
            let num_classes = classes
                .or_else(|| config.get("classes").and_then(|v| v.parse().ok()))
                .unwrap_or(3) as usize;
            let mode = match bg_mode.unwrap_or(BgModeArg::PerClass) {
                BgModeArg::PerClass => BackgroundMode::PerClass,
                BgModeArg::AllClass => BackgroundMode::AllClass,
            };
            let masks = rasterize_class_masks(&boxes, &grid, num_classes, mode)
                .map_err(|e| CliError::input(e.to_string()))?;
            save_tensor(&out, &masks.to_tensor())?;
            println!("height={}", masks.height);
            println!("width={}", masks.width);
            println!("fg_cells={}", masks.agg_fg.sum() as u64);
            if let Some(dir) = pgm_dir {
                std::fs::create_dir_all(&dir)
                    .map_err(|e| CliError::io(format!("{}: {e}", dir.display())))?;
                let mut planes: Vec<(String, &Tensor)> = Vec::new();
                for (i, t) in masks.per_class_fg.iter().enumerate() {
                    planes.push((format!("fg_{}", i + 1), t));
                }
                for (i, t) in masks.per_class_bg.iter().enumerate() {
                    planes.push((format!("bg_{}", i + 1), t));
                }
                planes.push(("agg_fg".to_string(), &masks.agg_fg));
                planes.push(("agg_bg".to_string(), &masks.agg_bg));
                for (name, t) in planes {
                    let bytes = pgm::binary_mask_pgm(masks.width, masks.height, t);
                    write_bytes(&dir.join(format!("{name}.pgm")), &bytes)?;
                }
            }
            Ok(())
        }
        Command::Distill {
            teacher_v2d,
            student_v2d,
            teacher_bev,
            student_bev,
            teacher_cls,
            student_cls,
            masks,
            lambda_c,
            lambda_f,
            lambda_p,
            lambda_fg,
            lambda_bg,
            epsilon,
            class_loss,
            pixel_loss,
            instance_loss,
            report,
            heatmap_dir,
        } => {
            let vt = load_tensor(&teacher_v2d)?;
            let vs = load_tensor(&student_v2d)?;
            let ft = load_tensor(&teacher_bev)?;
            let fs = load_tensor(&student_bev)?;
            let ot = load_tensor(&teacher_cls)?;
            let os = load_tensor(&student_cls)?;
            let mask_stack = MaskStack::from_tensor(&load_tensor(&masks)?)
                .map_err(|e| CliError::input(format!("{}: {e}", masks.display())))?;
            let defaults = PassingWeights::default();
            let pick = |flag: Option<f64>, key: &str, default: f64| {
                flag.or_else(|| config.get(key).and_then(|v| v.parse().ok()))
                    .unwrap_or(default)
            };
            let weights = PassingWeights {
                lambda_c: pick(lambda_c, "lambda_c", defaults.lambda_c),
                lambda_f: pick(lambda_f, "lambda_f", defaults.lambda_f),
                lambda_p: pick(lambda_p, "lambda_p", defaults.lambda_p),
                lambda_fg: pick(lambda_fg, "lambda_fg", defaults.lambda_fg),
                lambda_bg: pick(lambda_bg, "lambda_bg", defaults.lambda_bg),
                epsilon: pick(epsilon, "epsilon", defaults.epsilon),
            };
            let options = DistillOptions {
                class_kind: match class_loss.unwrap_or(ClassKindArg::Frobenius) {
                    ClassKindArg::Frobenius => ClassLossKind::Frobenius,
                    ClassKindArg::Absolute => ClassLossKind::Absolute,
                },
                pixel_kind: match pixel_loss.unwrap_or(PixelKindArg::L2) {
                    PixelKindArg::L1 => PixelLossKind::L1,
                    PixelKindArg::L2 => PixelLossKind::L2,
                    PixelKindArg::Kld => PixelLossKind::Kld,
                },
                instance_kind: match instance_loss.unwrap_or(InstanceKindArg::Kld) {
                    InstanceKindArg::L1 => InstanceLossKind::L1,
                    InstanceKindArg::L2 => InstanceLossKind::L2,
                    InstanceKindArg::Kld => InstanceLossKind::Kld,
                },
            };
            let loss_report = total_distill_loss(
                &vt, &vs, &ft, &fs, &ot, &os, &mask_stack, &weights, &options,
            )
            .map_err(|e| CliError::input(e.to_string()))?;
            write_bytes(&report, loss_report.to_csv().as_bytes())?;
            println!("l_c={:.16e}", loss_report.l_c);
            println!("l_f={:.16e}", loss_report.l_f);
            println!("l_p={:.16e}", loss_report.l_p);
            println!("l_total={:.16e}", loss_report.l_total);
            if let Some(dir) = heatmap_dir {
                std::fs::create_dir_all(&dir)
                    .map_err(|e| CliError::io(format!("{}: {e}", dir.display())))?;
                write_distill_heatmaps(&dir, &vt, &vs, &ft, &fs, &mask_stack, &weights)?;
            }
            Ok(())
        }
        Command::Synth { seed, boxes, points, grid, noise, out } => {
            if points == 0 {
                return Err(CliError::input("--points must be at least 1"));
            }
            let grid = grid_from(grid.as_deref(), config)?;
            let spec = SceneSpec {
                seed,
                boxes_per_class: boxes,
                num_points: points,
                grid,
                noise,
            };
            let scene = generate(&spec);
            std::fs::create_dir_all(&out)
                .map_err(|e| CliError::io(format!("{}: {e}", out.display())))?;
            write_bytes(&out.join("velodyne.bin"), &write_velodyne(&scene.cloud))?;
            let mut label_text = String::new();
            for label in &scene.labels {
                label_text.push_str(&format_label(label));
                label_text.push('\n');
            }
            write_bytes(&out.join("labels.txt"), label_text.as_bytes())?;
            let calib = spnet_core::Calib::identity();
            write_bytes(&out.join("calib.txt"), format_calib(&calib).as_bytes())?;

            // the oracle paint is computed from the files as written, so the
            // 2-decimal label quantization is identical on both sides
            let reread = parse_labels(&label_text, &default_class_map())
                .map_err(|e| CliError::input(e.to_string()))?
                .0;
            let parsed_boxes: Result<Vec<_>, _> =
                reread.iter().map(|r| box_cam_to_lidar(r, &calib)).collect();
            let parsed_boxes = parsed_boxes.map_err(|e| CliError::input(e.to_string()))?;
            let codes = paint_categorical_bruteforce(&scene.cloud, &parsed_boxes);
            let mut values = Vec::with_capacity(scene.cloud.count() * 5);
            for i in 0..scene.cloud.count() {
                values.extend_from_slice(scene.cloud.row(i));
                values.push(codes[i] as f32);
            }
            let oracle = Tensor::from_f32(vec![scene.cloud.count(), 5], values)
                .map_err(|e| CliError::input(e.to_string()))?;
            save_tensor(&out.join("oracle_paint.sptn"), &oracle)?;
            println!("n_points={}", scene.cloud.count());
            println!("n_boxes={}", scene.boxes.len());
            println!("fg_points={}", codes.iter().filter(|&&c| c != 0).count());
            Ok(())
        }
        Command::Gradcheck { loss, size, classes, seed, step } => {
            if step <= 0.0 {
                return Err(CliError::input("step must be positive"));
            }
            let dims: Result<Vec<usize>, _> = size.split('x').map(str::parse).collect();
            let dims = dims.map_err(|_| CliError::input(format!("bad size string {size:?}")))?;
            if dims.len() != 3 || dims.iter().any(|&d| d == 0) {
                return Err(CliError::input(format!("size {size:?} must be HxWxC, all positive")));
            }
            let id = match loss {
                LossIdArg::Class => LossId::Class,
                LossIdArg::Pixel => LossId::Pixel,
                LossIdArg::Instance => LossId::Instance,
            };
            let r = finite_diff_check(id, dims[0], dims[1], dims[2], classes, seed, step);
            println!("max_rel_err={:.6e}", r.max_rel_err);
            if r.max_rel_err <= 1e-4 {
                Ok(())
            } else {
                Err(CliError::check(format!(
                    "gradient check failed at flat index {}: analytic {:.6e} vs fd {:.6e}",
                    r.worst_index, r.analytic_at_worst, r.fd_at_worst
                )))
            }
        }
    }
}

/// Per-class |D_T - D_S| maps plus the per-pixel pixel-loss contribution.
fn write_distill_heatmaps(
    dir: &Path,
    vt: &Tensor,
    vs: &Tensor,
    ft: &Tensor,
    fs: &Tensor,
    masks: &MaskStack,
    weights: &PassingWeights,
) -> Result<(), CliError> {
    let (h, w) = (masks.height, masks.width);
    for c in 0..masks.num_classes() {
        let fg = &masks.per_class_fg[c];
        let bg = &masks.per_class_bg[c];
        if fg.sum() == 0.0 {
            continue;
        }
        let sim = |v: &Tensor| -> Result<Tensor, CliError> {
            let center = class_center(v, fg).map_err(|e| CliError::input(e.to_string()))?;
            let g = global_feature(v, fg, bg, &center)
                .map_err(|e| CliError::input(e.to_string()))?;
            Ok(similarity_map(v, &g, weights.epsilon)
                .map_err(|e| CliError::input(e.to_string()))?
                .values)
        };
        let (dt, ds) = (sim(vt)?, sim(vs)?);
        let diff: Vec<f64> = (0..h * w).map(|p| (dt.at(p) - ds.at(p)).abs()).collect();
        let bytes = pgm::normalized_pgm(w, h, &diff);
        write_bytes(&dir.join(format!("sim_diff_{}.pgm", c + 1)), &bytes)?;
    }
    let u = ft.shape()[2];
    let per_pixel: Vec<f64> = (0..h * w)
        .map(|p| {
            if masks.agg_fg.at(p) == 0.0 {
                return 0.0;
            }
            let mut sq = 0.0;
            for c in 0..u {
                let d = ft.at(p * u + c) - fs.at(p * u + c);
                sq += d * d;
            }
            sq.sqrt()
        })
        .collect();
    let bytes = pgm::normalized_pgm(w, h, &per_pixel);
    write_bytes(&dir.join("pixel_loss.pgm"), &bytes)
}
