//! Acceptance suite: one test per criterion, each printing a PASS line
//! (run with `cargo test -p spnet-cli --test acceptance -- --nocapture`
//! to see them).

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use spnet_core::bevgrid::{
    compress_bev, pillarize, pillarize_painted, rasterize_class_masks, BackgroundMode, GridSpec,
    MaskStack,
};
use spnet_core::geometry::{box_bev_footprint, OrientedBox3D};
use spnet_core::kitti::{
    default_class_map, format_label, parse_labels, parse_velodyne, LabelRecord,
};
use spnet_core::oracle::{paint_categorical_bruteforce, point_in_footprint};
use spnet_core::painting::{paint_categorical, paint_onehot};
use spnet_core::passing::{
    class_center, class_wise_loss, finite_diff_check, global_feature, instance_wise_loss,
    masked_kld, pixel_wise_loss, similarity_map, total_distill_loss, ClassLossKind,
    DistillOptions, InstanceLossKind, LossId, PassingWeights, PixelLossKind,
};
use spnet_core::scene::{generate, SceneSpec};
use spnet_core::tensor::{Dtype, Tensor};

const SPNET: &str = env!("CARGO_BIN_EXE_spnet");

fn feat(h: usize, w: usize, k: usize, data: Vec<f64>) -> Tensor {
    Tensor::from_f64(vec![h, w, k], data).unwrap()
}

fn mask(h: usize, w: usize, data: Vec<u8>) -> Tensor {
    Tensor::from_u8(vec![h, w], data).unwrap()
}

fn random_masks(h: usize, w: usize, num_classes: usize, rng: &mut ChaCha8Rng) -> MaskStack {
    let hw = h * w;
    let fg_planes: Vec<Vec<u8>> = (0..num_classes)
        .map(|c| {
            let mut p: Vec<u8> = (0..hw).map(|_| u8::from(rng.random_bool(0.35))).collect();
            p[(3 * c + 1) % hw] = 1;
            p
        })
        .collect();
    let agg: Vec<u8> = (0..hw)
        .map(|i| fg_planes.iter().map(|p| p[i]).max().unwrap())
        .collect();
    MaskStack {
        height: h,
        width: w,
        per_class_fg: fg_planes.iter().cloned().map(|d| mask(h, w, d)).collect(),
        per_class_bg: fg_planes
            .iter()
            .map(|p| mask(h, w, p.iter().map(|&v| 1 - v).collect()))
            .collect(),
        agg_fg: mask(h, w, agg.clone()),
        agg_bg: mask(h, w, agg.iter().map(|&v| 1 - v).collect()),
    }
}

#[test]
fn criterion_1_gradient_suite() {
    let start = Instant::now();
    let cases = [
        (LossId::Class, "class-wise"),
        (LossId::Pixel, "pixel-wise"),
        (LossId::Instance, "instance-wise"),
    ];
    for (id, name) in cases {
        for seed in 0..10u64 {
            let h = 4 + (seed as usize % 5); // up to 8
            let w = 4 + ((seed as usize * 3) % 5);
            let k = 2 + (seed as usize % 3); // up to 4
            let classes = 1 + (seed as usize % 3);
            let r = finite_diff_check(id, h, w, k, classes, seed, 1e-5);
            assert!(
                r.max_rel_err <= 1e-4,
                "{name} seed {seed} size {h}x{w}x{k}: rel err {}",
                r.max_rel_err
            );
        }
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 10.0, "gradient suite took {elapsed:?}");
    println!("criterion 1 PASS: analytic gradients match central FD (rel err <= 1e-4, {elapsed:?})");
}

#[test]
fn criterion_2_painting_oracle() {
    let start = Instant::now();
    let grid = GridSpec::new((0.0, 32.0), (-16.0, 16.0), (-3.0, 1.0), (0.5, 0.5, 4.0)).unwrap();
    for seed in 0..100u64 {
        let scene = generate(&SceneSpec {
            seed,
            boxes_per_class: 5, // 15 boxes in a 32x32 m area: plenty of overlap
            num_points: 2000 + (seed as usize * 317) % 18001,
            grid,
            noise: 0.1,
        });
        let categorical = paint_categorical(&scene.cloud, &scene.boxes);
        let onehot = paint_onehot(&scene.cloud, &scene.boxes, 3).unwrap();
        let oracle = paint_categorical_bruteforce(&scene.cloud, &scene.boxes);
        for i in 0..scene.cloud.count() {
            assert_eq!(categorical.class_of(i), oracle[i], "seed {seed} point {i}");
            assert_eq!(onehot.class_of(i), oracle[i], "seed {seed} point {i} (one-hot)");
        }
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 5.0, "painting oracle took {elapsed:?}");
    println!("criterion 2 PASS: painting matches the brute-force oracle on 100 scenes ({elapsed:?})");
}

#[test]
fn criterion_3_rasterization_oracle() {
    let start = Instant::now();
    let grid = GridSpec::new((0.0, 32.0), (-16.0, 16.0), (-3.0, 1.0), (0.5, 0.5, 4.0)).unwrap();
    let (h, w, _) = grid.dims().unwrap();
    assert_eq!((h, w), (64, 64));
    let mut rng = ChaCha8Rng::seed_from_u64(1234);
    for trial in 0..50 {
        let boxes: Vec<OrientedBox3D> = (0..8)
            .map(|_| OrientedBox3D {
                center: [rng.random_range(2.0..30.0), rng.random_range(-14.0..14.0), 0.0],
                dims: [
                    rng.random_range(1.0..8.0),
                    rng.random_range(1.0..5.0),
                    rng.random_range(1.0..3.0),
                ],
                yaw: rng.random_range(-3.14..3.14),
                class_code: rng.random_range(1..4),
            })
            .collect();
        let masks = rasterize_class_masks(&boxes, &grid, 3, BackgroundMode::PerClass).unwrap();
        for class in 1..=3u32 {
            let footprints: Vec<_> = boxes
                .iter()
                .filter(|b| b.class_code == class)
                .map(box_bev_footprint)
                .collect();
            for ch in 0..h {
                for cw in 0..w {
                    let want = footprints
                        .iter()
                        .any(|f| point_in_footprint(grid.cell_center(ch, cw), f));
                    let got = masks.per_class_fg[class as usize - 1].get(&[ch, cw]) != 0.0;
                    assert_eq!(got, want, "trial {trial} class {class} cell ({ch},{cw})");
                }
            }
        }
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 5.0, "rasterization oracle took {elapsed:?}");
    println!("criterion 3 PASS: rasterization matches per-cell containment on 50 scenes ({elapsed:?})");
}

#[test]
fn criterion_4_zero_loss_identities() {
    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = 3 + (seed as usize % 6);
        let w = 3 + ((seed as usize * 5) % 6);
        let k = 1 + (seed as usize % 4);
        let n = h * w * k;
        let v = feat(h, w, k, (0..n).map(|_| rng.random_range(0.05..1.0)).collect());
        let o = feat(h, w, k, (0..n).map(|_| rng.random_range(0.1..0.9)).collect());
        let masks = random_masks(h, w, 1 + (seed as usize % 3), &mut rng);
        let report = total_distill_loss(
            &v,
            &v,
            &v,
            &v,
            &o,
            &o,
            &masks,
            &PassingWeights::default(),
            &DistillOptions::default(),
        )
        .unwrap();
        assert_eq!(report.l_c, 0.0, "seed {seed}");
        assert_eq!(report.l_f, 0.0, "seed {seed}");
        assert_eq!(report.l_p, 0.0, "seed {seed}");
        assert_eq!(report.l_total, 0.0, "seed {seed}");
    }
    println!("criterion 4 PASS: teacher == student gives exact zero losses over 20 configs");
}

#[test]
fn criterion_5_scale_and_mask_invariances() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let (h, w, k) = (6, 6, 3);
    let n = h * w * k;
    let vt: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..1.0)).collect();
    let vs: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..1.0)).collect();
    let masks = random_masks(h, w, 2, &mut rng);
    let fg = &masks.per_class_fg[0];
    let bg = &masks.per_class_bg[0];
    let base_sim = {
        let v = feat(h, w, k, vs.clone());
        let g = global_feature(&v, fg, bg, &class_center(&v, fg).unwrap()).unwrap();
        similarity_map(&v, &g, 1e-6).unwrap().values
    };
    for lambda in [0.5, 3.0, 100.0] {
        let scaled = feat(h, w, k, vs.iter().map(|x| x * lambda).collect());
        let g = global_feature(&scaled, fg, bg, &class_center(&scaled, fg).unwrap()).unwrap();
        let sim = similarity_map(&scaled, &g, 1e-6).unwrap().values;
        for p in 0..h * w {
            assert!(
                (sim.at(p) - base_sim.at(p)).abs() <= 1e-9,
                "lambda {lambda} pixel {p}"
            );
        }
    }
    let (base_loss, _) = class_wise_loss(
        &feat(h, w, k, vt.clone()),
        &feat(h, w, k, vs.clone()),
        &masks,
        1e-6,
        ClassLossKind::Frobenius,
    )
    .unwrap();
    for lambda in [0.5, 3.0, 100.0] {
        let (l, _) = class_wise_loss(
            &feat(h, w, k, vt.clone()),
            &feat(h, w, k, vs.iter().map(|x| x * lambda).collect()),
            &masks,
            1e-6,
            ClassLossKind::Frobenius,
        )
        .unwrap();
        assert!((l - base_loss).abs() <= 1e-9, "lambda {lambda}");
    }

    let ot = feat(h, w, 2, (0..h * w * 2).map(|_| rng.random_range(0.1..0.9)).collect());
    let os = feat(h, w, 2, (0..h * w * 2).map(|_| rng.random_range(0.1..0.9)).collect());
    let binary: Vec<f64> = (0..h * w).map(|i| f64::from(i % 3 == 0)).collect();
    let base = masked_kld(
        &ot,
        &os,
        &Tensor::from_f64(vec![h, w], binary.clone()).unwrap(),
        1e-6,
    )
    .unwrap();
    for c in [2.0, 10.0] {
        let scaled = Tensor::from_f64(vec![h, w], binary.iter().map(|v| v * c).collect()).unwrap();
        let got = masked_kld(&ot, &os, &scaled, 1e-6).unwrap();
        assert!((got - base).abs() <= 1e-12, "mask scale {c}");
    }
    println!("criterion 5 PASS: cosine scale invariance and KLD mask-scale neutrality hold");
}

#[test]
fn criterion_6_paper_constants() {
    let w = PassingWeights::default();
    assert_eq!(w.lambda_c, 0.1);
    assert_eq!(w.lambda_f, 10.0);
    assert_eq!(w.lambda_p, 10.0);
    assert_eq!(w.lambda_fg, 2.0);
    assert_eq!(w.lambda_bg, 0.1);
    assert_eq!(w.epsilon, 1e-6);
    let (h, width, d) = GridSpec::kitti().dims().unwrap();
    assert_eq!((h, width, d), (496, 432, 1));

    // the CLI echoes the same defaults into the report when no flags are given
    let dir = tempfile::tempdir().unwrap();
    let t = feat(2, 2, 2, vec![0.5; 8]);
    let o = feat(2, 2, 2, vec![0.5; 8]);
    for name in ["v2d.sptn", "bev.sptn"] {
        t.write_to_file(&dir.path().join(name)).unwrap();
    }
    o.write_to_file(&dir.path().join("cls.sptn")).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    random_masks(2, 2, 2, &mut rng)
        .to_tensor()
        .write_to_file(&dir.path().join("masks.sptn"))
        .unwrap();
    let report = dir.path().join("report.csv");
    let status = Command::new(SPNET)
        .args(["distill"])
        .arg("--teacher-v2d").arg(dir.path().join("v2d.sptn"))
        .arg("--student-v2d").arg(dir.path().join("v2d.sptn"))
        .arg("--teacher-bev").arg(dir.path().join("bev.sptn"))
        .arg("--student-bev").arg(dir.path().join("bev.sptn"))
        .arg("--teacher-cls").arg(dir.path().join("cls.sptn"))
        .arg("--student-cls").arg(dir.path().join("cls.sptn"))
        .arg("--masks").arg(dir.path().join("masks.sptn"))
        .arg("--report").arg(&report)
        .status()
        .unwrap();
    assert!(status.success());
    let csv = std::fs::read_to_string(&report).unwrap();
    assert!(csv.contains("lambda_c,1.0000000000000001e-1"));
    assert!(csv.contains("lambda_f,1.0000000000000000e1"));
    assert!(csv.contains("lambda_p,1.0000000000000000e1"));
    assert!(csv.contains("lambda_fg,2.0000000000000000e0"));
    assert!(csv.contains("lambda_bg,1.0000000000000001e-1"));
    println!("criterion 6 PASS: default weights, epsilon and the 496x432x1 grid are exact");
}

#[test]
fn criterion_7_hand_computed_values() {
    let ft = feat(1, 1, 2, vec![0.5, 0.5]);
    let fs = feat(1, 1, 2, vec![0.25, 0.75]);
    let full = mask(1, 1, vec![1]);
    let kld = masked_kld(&ft, &fs, &full, 1e-6).unwrap();
    assert!((kld - 0.14384).abs() <= 1e-5, "kld = {kld}");

    let v = feat(2, 2, 1, vec![1.0, 2.0, 3.0, 4.0]);
    let m = mask(2, 2, vec![1, 1, 0, 0]);
    assert_eq!(class_center(&v, &m).unwrap(), vec![1.5]);

    let x = feat(1, 1, 2, vec![0.3, 0.8]);
    let sim = similarity_map(&x, &x, 1e-6).unwrap();
    assert_eq!(sim.values.at(0), 1.0);
    println!("criterion 7 PASS: hand-computed KLD, class center and self-similarity values match");
}

#[test]
fn criterion_8_format_round_trips() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for trial in 0..200 {
        let rank = rng.random_range(1..5);
        let shape: Vec<usize> = (0..rank).map(|_| rng.random_range(1..6)).collect();
        let n: usize = shape.iter().product();
        let t = match rng.random_range(0..3) {
            0 => Tensor::from_f32(shape, (0..n).map(|_| rng.random::<f32>()).collect()).unwrap(),
            1 => Tensor::from_f64(shape, (0..n).map(|_| rng.random::<f64>()).collect()).unwrap(),
            _ => Tensor::from_u8(shape, (0..n).map(|_| rng.random::<u8>()).collect()).unwrap(),
        };
        let mut buf = Vec::new();
        t.write(&mut buf).unwrap();
        let back = Tensor::read(&mut buf.as_slice()).unwrap();
        assert_eq!(t, back, "trial {trial}");
        assert_eq!(back.dtype(), t.dtype());
        assert!(matches!(t.dtype(), Dtype::F32 | Dtype::F64 | Dtype::U8));
    }

    // velodyne concatenation property
    let a: Vec<u8> = (0..160).map(|i| (i * 7 % 251) as u8).collect();
    let b: Vec<u8> = (0..96).map(|i| (i * 13 % 251) as u8).collect();
    let joined: Vec<u8> = a.iter().chain(&b).copied().collect();
    let mut expect = parse_velodyne(&a).unwrap().values;
    expect.extend(parse_velodyne(&b).unwrap().values);
    assert_eq!(parse_velodyne(&joined).unwrap().values, expect);

    // label writer/parser round trip within 0.005 per field
    for trial in 0..50 {
        let mut lr = ChaCha8Rng::seed_from_u64(trial);
        let rec = LabelRecord {
            class_name: "Cyclist".to_string(),
            class_code: 3,
            truncation: lr.random_range(0.0..1.0),
            occlusion: lr.random_range(0..3),
            alpha: lr.random_range(-3.0..3.0),
            bbox2d: [0.0; 4],
            dims_hwl: [
                lr.random_range(0.5..2.0),
                lr.random_range(0.5..2.0),
                lr.random_range(0.5..4.0),
            ],
            location_cam: [
                lr.random_range(-20.0..20.0),
                lr.random_range(-2.0..2.0),
                lr.random_range(1.0..60.0),
            ],
            rotation_y: lr.random_range(-3.1..3.1),
        };
        let (parsed, _) = parse_labels(&format_label(&rec), &default_class_map()).unwrap();
        let p = &parsed[0];
        assert!((p.truncation - rec.truncation).abs() <= 0.005);
        assert!((p.alpha - rec.alpha).abs() <= 0.005);
        for i in 0..3 {
            assert!((p.dims_hwl[i] - rec.dims_hwl[i]).abs() <= 0.005);
            assert!((p.location_cam[i] - rec.location_cam[i]).abs() <= 0.005);
        }
        assert!((p.rotation_y - rec.rotation_y).abs() <= 0.005);
    }
    println!("criterion 8 PASS: SPTN, velodyne and label round trips hold");
}

fn run_ok(cmd: &mut Command) -> String {
    let out = cmd.output().unwrap();
    assert!(
        out.status.success(),
        "command failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn dir_contents(path: &Path) -> Vec<(String, Vec<u8>)> {
    let mut entries: Vec<_> = std::fs::read_dir(path)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().into_string().unwrap(), std::fs::read(e.path()).unwrap())
        })
        .collect();
    entries.sort();
    entries
}

#[test]
fn criterion_9_end_to_end_determinism() {
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let grid_str = "0:32:0.5,-16:16:0.5,-3:1:4";

    // synth twice: byte-identical directories
    for name in ["a", "b"] {
        run_ok(Command::new(SPNET).args([
            "synth",
            "--seed",
            "7",
            "--boxes",
            "4",
            "--points",
            "8000",
            "--grid",
            grid_str,
            "--out",
        ]).arg(dir.path().join(name)));
    }
    let a = dir_contents(&dir.path().join("a"));
    let b = dir_contents(&dir.path().join("b"));
    assert_eq!(a, b, "synth --seed 7 is not byte-deterministic");

    // paint matches the emitted oracle file exactly
    let scene = dir.path().join("a");
    let painted_path = dir.path().join("painted.sptn");
    run_ok(
        Command::new(SPNET)
            .args(["paint"])
            .arg("--velodyne").arg(scene.join("velodyne.bin"))
            .arg("--labels").arg(scene.join("labels.txt"))
            .arg("--calib").arg(scene.join("calib.txt"))
            .arg("--out").arg(&painted_path),
    );
    assert_eq!(
        std::fs::read(&painted_path).unwrap(),
        std::fs::read(scene.join("oracle_paint.sptn")).unwrap(),
        "paint output differs from the oracle paint file"
    );

    // masks
    let masks_path = dir.path().join("masks.sptn");
    run_ok(
        Command::new(SPNET)
            .args(["masks", "--grid", grid_str])
            .arg("--labels").arg(scene.join("labels.txt"))
            .arg("--calib").arg(scene.join("calib.txt"))
            .arg("--out").arg(&masks_path),
    );

    // pillarize teacher (painted) and student (raw) features in-library
    let grid = GridSpec::new((0.0, 32.0), (-16.0, 16.0), (-3.0, 1.0), (0.5, 0.5, 4.0)).unwrap();
    let bytes = std::fs::read(scene.join("velodyne.bin")).unwrap();
    let cloud = parse_velodyne(&bytes).unwrap();
    let label_text = std::fs::read_to_string(scene.join("labels.txt")).unwrap();
    let calib = spnet_core::kitti::parse_calib(
        &std::fs::read_to_string(scene.join("calib.txt")).unwrap(),
    )
    .unwrap();
    let boxes: Vec<OrientedBox3D> = parse_labels(&label_text, &default_class_map())
        .unwrap()
        .0
        .iter()
        .map(|r| spnet_core::geometry::box_cam_to_lidar(r, &calib).unwrap())
        .collect();
    let painted = paint_categorical(&cloud, &boxes);
    let teacher_v2d = compress_bev(&pillarize_painted(&painted, &grid).unwrap()).unwrap();
    let student_v2d = compress_bev(&pillarize(&cloud, &grid).unwrap()).unwrap();

    let write = |name: &str, t: &Tensor| {
        t.write_to_file(&dir.path().join(name)).unwrap();
    };
    write("teacher_v2d.sptn", &teacher_v2d);
    write("student_v2d.sptn", &student_v2d);
    // the same stand-in features double as the BEV maps and, clamped,
    // as the prediction score maps
    write("teacher_bev.sptn", &teacher_v2d);
    write("student_bev.sptn", &student_v2d);
    let clamp = |t: &Tensor| {
        Tensor::from_f64(
            t.shape().to_vec(),
            t.to_f64_vec().iter().map(|v| v.clamp(0.001, 1.0)).collect(),
        )
        .unwrap()
    };
    write("teacher_cls.sptn", &clamp(&teacher_v2d));
    write("student_cls.sptn", &clamp(&student_v2d));

    let report = dir.path().join("report.csv");
    let stdout = run_ok(
        Command::new(SPNET)
            .args(["distill"])
            .arg("--teacher-v2d").arg(dir.path().join("teacher_v2d.sptn"))
            .arg("--student-v2d").arg(dir.path().join("student_v2d.sptn"))
            .arg("--teacher-bev").arg(dir.path().join("teacher_bev.sptn"))
            .arg("--student-bev").arg(dir.path().join("student_bev.sptn"))
            .arg("--teacher-cls").arg(dir.path().join("teacher_cls.sptn"))
            .arg("--student-cls").arg(dir.path().join("student_cls.sptn"))
            .arg("--masks").arg(&masks_path)
            .arg("--report").arg(&report),
    );
    let l_total: f64 = stdout
        .lines()
        .find_map(|l| l.strip_prefix("l_total="))
        .unwrap()
        .parse()
        .unwrap();
    assert!(l_total > 0.0, "painted vs unpainted features gave l_total = {l_total}");
    let csv = std::fs::read_to_string(&report).unwrap();
    assert!(csv.starts_with("metric,value\n"));

    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 30.0, "pipeline took {elapsed:?}");
    println!("criterion 9 PASS: deterministic synth, oracle-exact paint, full pipeline l_total = {l_total:.6} ({elapsed:?})");
}

#[test]
fn instance_loss_uses_published_weights() {
    let ot = feat(1, 1, 2, vec![0.5, 0.5]);
    let os = feat(1, 1, 2, vec![0.25, 0.75]);
    let fg = mask(1, 1, vec![1]);
    let bg = mask(1, 1, vec![0]);
    let (l, _) = instance_wise_loss(
        &ot,
        &os,
        &fg,
        &bg,
        &PassingWeights::default(),
        InstanceLossKind::Kld,
    )
    .unwrap();
    assert!((l - 0.28768).abs() <= 1e-4);
    let (lf, _) = pixel_wise_loss(&ot, &os, &fg, 1e-6, PixelLossKind::L2).unwrap();
    assert!(lf > 0.0);
}
