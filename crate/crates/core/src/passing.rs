//! The three semantic-passing distillation losses with analytic gradients
//! w.r.t. the student inputs, a finite-difference verifier, and the
//! weighted combiner.
//!
//! All arithmetic is f64. Reductions run in a fixed canonical order
//! (class index major, then row-major pixels) so results are
//! bit-reproducible across runs.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::bevgrid::MaskStack;
use crate::tensor::Tensor;

#[derive(Debug, Error)]
pub enum PassingError {
    #[error("shape mismatch: {left:?} vs {right:?}")]
    ShapeMismatch { left: Vec<usize>, right: Vec<usize> },
    #[error("mask stack has {masks} classes, expected {want}")]
    ClassCountMismatch { masks: usize, want: usize },
    #[error("foreground and background masks are not complementary")]
    MaskNotComplementary,
}

/// Loss weights and the zero-division guard. Defaults are the published
/// configuration: lambda_c=0.1, lambda_f=10, lambda_p=10, lambda_fg=2,
/// lambda_bg=0.1, epsilon=1e-6.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PassingWeights {
    pub lambda_c: f64,
    pub lambda_f: f64,
    pub lambda_p: f64,
    pub lambda_fg: f64,
    pub lambda_bg: f64,
    pub epsilon: f64,
}

impl Default for PassingWeights {
    fn default() -> Self {
        PassingWeights {
            lambda_c: 0.1,
            lambda_f: 10.0,
            lambda_p: 10.0,
            lambda_fg: 2.0,
            lambda_bg: 0.1,
            epsilon: 1e-6,
        }
    }
}

/// Distance used by the pixel-wise term. L2 is the default configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PixelLossKind {
    L1,
    #[default]
    L2,
    Kld,
}

/// Distance used by the instance-wise term. KLD is the default configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InstanceLossKind {
    L1,
    L2,
    #[default]
    Kld,
}

/// How the per-class similarity-map difference is reduced. Frobenius is the
/// default; Absolute sums elementwise |.| instead.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ClassLossKind {
    #[default]
    Frobenius,
    Absolute,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossReport {
    pub l_c: f64,
    pub l_f: f64,
    pub l_p: f64,
    pub l_total: f64,
    pub weights: PassingWeights,
    /// Student class centers, one K-vector per class, for diagnostics.
    pub per_class_centers: Option<Vec<Vec<f64>>>,
}

impl LossReport {
    /// CSV with header `metric,value`, floats at 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("metric,value\n");
        let rows = [
            ("l_c", self.l_c),
            ("l_f", self.l_f),
            ("l_p", self.l_p),
            ("l_total", self.l_total),
            ("lambda_c", self.weights.lambda_c),
            ("lambda_f", self.weights.lambda_f),
            ("lambda_p", self.weights.lambda_p),
            ("lambda_fg", self.weights.lambda_fg),
            ("lambda_bg", self.weights.lambda_bg),
            ("epsilon", self.weights.epsilon),
        ];
        for (name, value) in rows {
            out.push_str(&format!("{name},{value:.16e}\n"));
        }
        out
    }
}

/// A per-pixel cosine similarity map, every value in [-1, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMap {
    pub values: Tensor,
}

fn check_same_shape(a: &Tensor, b: &Tensor) -> Result<(), PassingError> {
    if a.shape() != b.shape() {
        return Err(PassingError::ShapeMismatch {
            left: a.shape().to_vec(),
            right: b.shape().to_vec(),
        });
    }
    Ok(())
}

fn check_hw(t: &Tensor, mask: &Tensor) -> Result<(usize, usize, usize), PassingError> {
    let s = t.shape();
    if s.len() != 3 || mask.shape() != &s[..2] {
        return Err(PassingError::ShapeMismatch {
            left: s.to_vec(),
            right: mask.shape().to_vec(),
        });
    }
    Ok((s[0], s[1], s[2]))
}

fn check_complementary(fg: &Tensor, bg: &Tensor) -> Result<(), PassingError> {
    if fg.shape() != bg.shape() {
        return Err(PassingError::ShapeMismatch {
            left: fg.shape().to_vec(),
            right: bg.shape().to_vec(),
        });
    }
    for i in 0..fg.len() {
        if fg.at(i) + bg.at(i) != 1.0 {
            return Err(PassingError::MaskNotComplementary);
        }
    }
    Ok(())
}

/// Masked average pooling over the spatial dimensions: the channelwise mean
/// of `v2d` over foreground pixels. An all-zero mask yields the zero vector
/// (class-absent rule).
pub fn class_center(v2d: &Tensor, fg_mask: &Tensor) -> Result<Vec<f64>, PassingError> {
    let (h, w, k) = check_hw(v2d, fg_mask)?;
    let mut sum = vec![0.0; k];
    let mut n = 0.0;
    for p in 0..h * w {
        let m = fg_mask.at(p);
        if m == 0.0 {
            continue;
        }
        n += 1.0;
        for (c, s) in sum.iter_mut().enumerate() {
            *s += v2d.at(p * k + c);
        }
    }
    if n > 0.0 {
        for s in &mut sum {
            *s /= n;
        }
    }
    Ok(sum)
}

/// Background pixels keep their features, foreground pixels are replaced by
/// the broadcast class center.
pub fn global_feature(
    v2d: &Tensor,
    fg_mask: &Tensor,
    bg_mask: &Tensor,
    center: &[f64],
) -> Result<Tensor, PassingError> {
    let (h, w, k) = check_hw(v2d, fg_mask)?;
    check_complementary(fg_mask, bg_mask)?;
    if center.len() != k {
        return Err(PassingError::ShapeMismatch {
            left: vec![k],
            right: vec![center.len()],
        });
    }
    let mut out = vec![0.0; h * w * k];
    for p in 0..h * w {
        let (m, b) = (fg_mask.at(p), bg_mask.at(p));
        for c in 0..k {
            out[p * k + c] = b * v2d.at(p * k + c) + m * center[c];
        }
    }
    Ok(Tensor::from_f64(vec![h, w, k], out).unwrap())
}

/// Per-pixel cosine similarity between two feature maps:
/// dot(v, g) / max(|v| * |g|, epsilon).
pub fn similarity_map(
    v2d: &Tensor,
    global_feat: &Tensor,
    epsilon: f64,
) -> Result<SimilarityMap, PassingError> {
    check_same_shape(v2d, global_feat)?;
    let s = v2d.shape();
    let (hw, k) = (s[..s.len() - 1].iter().product::<usize>(), s[s.len() - 1]);
    let mut out = vec![0.0; hw];
    for p in 0..hw {
        let mut dot = 0.0;
        let mut nv = 0.0;
        let mut ng = 0.0;
        for c in 0..k {
            let v = v2d.at(p * k + c);
            let g = global_feat.at(p * k + c);
            dot += v * g;
            nv += v * v;
            ng += g * g;
        }
        // sqrt of the product (not product of sqrts) so that identical
        // inputs give exactly 1.0
        let denom = (nv * ng).sqrt().max(epsilon);
        out[p] = (dot / denom).clamp(-1.0, 1.0);
    }
    let values = Tensor::from_f64(s[..s.len() - 1].to_vec(), out).unwrap();
    debug_assert!(values.to_f64_vec().iter().all(|v| (-1.0..=1.0).contains(v)));
    Ok(SimilarityMap { values })
}

/// Forward similarity values for one class with everything the backward
/// pass needs.
struct ClassSimState {
    sim: Vec<f64>,
    dot: Vec<f64>,
    sq_v: Vec<f64>,
    sq_g: Vec<f64>,
    global: Vec<f64>,
    mask_count: f64,
}

fn class_sim_forward(
    v: &Tensor,
    fg: &Tensor,
    bg: &Tensor,
    epsilon: f64,
) -> ClassSimState {
    let s = v.shape();
    let (hw, k) = (s[0] * s[1], s[2]);
    let mut center = vec![0.0; k];
    let mut n = 0.0;
    for p in 0..hw {
        if fg.at(p) != 0.0 {
            n += 1.0;
            for (c, acc) in center.iter_mut().enumerate() {
                *acc += v.at(p * k + c);
            }
        }
    }
    if n > 0.0 {
        for acc in &mut center {
            *acc /= n;
        }
    }
    let mut global = vec![0.0; hw * k];
    let mut sim = vec![0.0; hw];
    let mut dot_v = vec![0.0; hw];
    let mut sq_v = vec![0.0; hw];
    let mut sq_g = vec![0.0; hw];
    for p in 0..hw {
        let (m, b) = (fg.at(p), bg.at(p));
        let mut dot = 0.0;
        let mut nv = 0.0;
        let mut ng = 0.0;
        for c in 0..k {
            let vv = v.at(p * k + c);
            let g = b * vv + m * center[c];
            global[p * k + c] = g;
            dot += vv * g;
            nv += vv * vv;
            ng += g * g;
        }
        dot_v[p] = dot;
        sq_v[p] = nv;
        sq_g[p] = ng;
        sim[p] = dot / (nv * ng).sqrt().max(epsilon);
    }
    ClassSimState {
        sim,
        dot: dot_v,
        sq_v,
        sq_g,
        global,
        mask_count: n,
    }
}

/// Backward pass for one class: given dL/d(sim), accumulate dL/dV into
/// `grad`. The max(., epsilon) denominator is treated as locally constant
/// on the epsilon branch.
fn class_sim_backward(
    v: &Tensor,
    fg: &Tensor,
    bg: &Tensor,
    epsilon: f64,
    state: &ClassSimState,
    sim_bar: &[f64],
    grad: &mut [f64],
) {
    let s = v.shape();
    let (hw, k) = (s[0] * s[1], s[2]);
    let mut global_bar = vec![0.0; hw * k];
    let mut center_bar = vec![0.0; k];
    for p in 0..hw {
        let abar = sim_bar[p];
        if abar == 0.0 {
            continue;
        }
        let (nv2, ng2) = (state.sq_v[p], state.sq_g[p]);
        let prod = (nv2 * ng2).sqrt();
        let denom = prod.max(epsilon);
        let sbar = abar / denom;
        for c in 0..k {
            let vv = v.at(p * k + c);
            let g = state.global[p * k + c];
            global_bar[p * k + c] += sbar * vv;
            grad[p * k + c] += sbar * g;
        }
        if prod >= epsilon {
            // d = sqrt(|v|^2 |g|^2), so dd/dv = |g|^2 v / d, dd/dg = |v|^2 g / d
            let dbar = -abar * state.dot[p] / (denom * denom);
            for c in 0..k {
                let vv = v.at(p * k + c);
                let g = state.global[p * k + c];
                grad[p * k + c] += dbar * ng2 * vv / prod;
                global_bar[p * k + c] += dbar * nv2 * g / prod;
            }
        }
    }
    for p in 0..hw {
        let (m, b) = (fg.at(p), bg.at(p));
        for c in 0..k {
            let gbar = global_bar[p * k + c];
            grad[p * k + c] += b * gbar;
            center_bar[c] += m * gbar;
        }
    }
    if state.mask_count > 0.0 {
        for p in 0..hw {
            if fg.at(p) == 0.0 {
                continue;
            }
            for c in 0..k {
                grad[p * k + c] += center_bar[c] / state.mask_count;
            }
        }
    }
}

/// Class-wise passing loss: the per-class similarity-map difference between
/// teacher and student, reduced per `kind`, summed over classes and scaled
/// by 1/(H*W). Classes with an empty foreground mask contribute zero.
///
/// Returns the loss and its analytic gradient w.r.t. the student features.
pub fn class_wise_loss(
    vt2d: &Tensor,
    vs2d: &Tensor,
    masks: &MaskStack,
    epsilon: f64,
    kind: ClassLossKind,
) -> Result<(f64, Tensor), PassingError> {
    check_same_shape(vt2d, vs2d)?;
    let s = vs2d.shape();
    if s.len() != 3 {
        return Err(PassingError::ShapeMismatch {
            left: s.to_vec(),
            right: vec![0, 0, 0],
        });
    }
    let (h, w, k) = (s[0], s[1], s[2]);
    if masks.height != h || masks.width != w {
        return Err(PassingError::ShapeMismatch {
            left: vec![h, w],
            right: vec![masks.height, masks.width],
        });
    }
    if masks.num_classes() == 0 {
        return Err(PassingError::ClassCountMismatch { masks: 0, want: 1 });
    }
    let hw = h * w;
    let scale = 1.0 / hw as f64;
    let mut loss = 0.0;
    let mut grad = vec![0.0; hw * k];
    for c in 0..masks.num_classes() {
        let fg = &masks.per_class_fg[c];
        let bg = &masks.per_class_bg[c];
        if fg.sum() == 0.0 {
            continue;
        }
        let teacher = class_sim_forward(vt2d, fg, bg, epsilon);
        let student = class_sim_forward(vs2d, fg, bg, epsilon);
        match kind {
            ClassLossKind::Frobenius => {
                let mut sq = 0.0;
                for p in 0..hw {
                    let d = teacher.sim[p] - student.sim[p];
                    sq += d * d;
                }
                let frob = sq.sqrt();
                loss += scale * frob;
                if frob > 0.0 {
                    let sim_bar: Vec<f64> = (0..hw)
                        .map(|p| scale * (student.sim[p] - teacher.sim[p]) / frob)
                        .collect();
                    class_sim_backward(vs2d, fg, bg, epsilon, &student, &sim_bar, &mut grad);
                }
            }
            ClassLossKind::Absolute => {
                let mut sim_bar = vec![0.0; hw];
                for p in 0..hw {
                    let d = teacher.sim[p] - student.sim[p];
                    loss += scale * d.abs();
                    sim_bar[p] = scale * -d.signum() * if d == 0.0 { 0.0 } else { 1.0 };
                }
                class_sim_backward(vs2d, fg, bg, epsilon, &student, &sim_bar, &mut grad);
            }
        }
    }
    Ok((loss, Tensor::from_f64(vec![h, w, k], grad).unwrap()))
}

/// Pixel-wise passing loss over the foreground, normalized by the mask
/// popcount. The default L2 form is sum_p fg_p * |ft_p - fs_p|_2 /
/// max(sum fg, epsilon), with the subgradient at ft = fs taken as zero.
pub fn pixel_wise_loss(
    ft: &Tensor,
    fs: &Tensor,
    fg_mask: &Tensor,
    epsilon: f64,
    kind: PixelLossKind,
) -> Result<(f64, Tensor), PassingError> {
    check_same_shape(ft, fs)?;
    let (h, w, u) = check_hw(ft, fg_mask)?;
    if kind == PixelLossKind::Kld {
        let (loss, grad) = masked_kld_with_grad(ft, fs, fg_mask, epsilon)?;
        return Ok((loss, grad));
    }
    let hw = h * w;
    let denom = fg_mask.sum().max(epsilon);
    let mut loss = 0.0;
    let mut grad = vec![0.0; hw * u];
    for p in 0..hw {
        let m = fg_mask.at(p);
        if m == 0.0 {
            continue;
        }
        match kind {
            PixelLossKind::L2 => {
                let mut sq = 0.0;
                for c in 0..u {
                    let d = ft.at(p * u + c) - fs.at(p * u + c);
                    sq += d * d;
                }
                let norm = sq.sqrt();
                loss += m * norm;
                if norm > 0.0 {
                    for c in 0..u {
                        let d = ft.at(p * u + c) - fs.at(p * u + c);
                        grad[p * u + c] = -m * d / (norm * denom);
                    }
                }
            }
            PixelLossKind::L1 => {
                for c in 0..u {
                    let d = ft.at(p * u + c) - fs.at(p * u + c);
                    loss += m * d.abs();
                    grad[p * u + c] = -m * d.signum() * if d == 0.0 { 0.0 } else { 1.0 };
                    grad[p * u + c] /= denom;
                }
            }
            PixelLossKind::Kld => unreachable!(),
        }
    }
    Ok((loss / denom, Tensor::from_f64(vec![h, w, u], grad).unwrap()))
}

fn clamp_prob(x: f64, epsilon: f64) -> f64 {
    x.clamp(epsilon, 1.0)
}

/// Masked KL divergence: sum(mask * ft * (log ft - log fs)) /
/// max(sum mask, epsilon), mask broadcast across trailing channels,
/// both inputs clamped to [epsilon, 1].
pub fn masked_kld(
    ft: &Tensor,
    fs: &Tensor,
    mask: &Tensor,
    epsilon: f64,
) -> Result<f64, PassingError> {
    masked_kld_with_grad(ft, fs, mask, epsilon).map(|(l, _)| l)
}

fn masked_kld_with_grad(
    ft: &Tensor,
    fs: &Tensor,
    mask: &Tensor,
    epsilon: f64,
) -> Result<(f64, Tensor), PassingError> {
    check_same_shape(ft, fs)?;
    let shape = ft.shape();
    let hw = mask.len();
    if ft.len() % hw != 0 || shape[..mask.shape().len()] != *mask.shape() {
        return Err(PassingError::ShapeMismatch {
            left: shape.to_vec(),
            right: mask.shape().to_vec(),
        });
    }
    let channels = ft.len() / hw;
    let denom = mask.sum().max(epsilon);
    let mut loss = 0.0;
    let mut grad = vec![0.0; ft.len()];
    for p in 0..hw {
        let m = mask.at(p);
        if m == 0.0 {
            continue;
        }
        for c in 0..channels {
            let i = p * channels + c;
            let t = clamp_prob(ft.at(i), epsilon);
            let s_raw = fs.at(i);
            let s = clamp_prob(s_raw, epsilon);
            loss += m * t * (t.ln() - s.ln());
            // gradient only flows where the clamp is inactive
            if s_raw > epsilon && s_raw < 1.0 {
                grad[i] = -m * t / (s * denom);
            }
        }
    }
    Ok((loss / denom, Tensor::from_f64(shape.to_vec(), grad).unwrap()))
}

/// Instance-wise passing loss: the foreground and background masked
/// distances reweighted by lambda_fg and lambda_bg. KLD is the default
/// distance; L1/L2 are available for ablations.
pub fn instance_wise_loss(
    ot: &Tensor,
    os: &Tensor,
    fg_mask: &Tensor,
    bg_mask: &Tensor,
    weights: &PassingWeights,
    kind: InstanceLossKind,
) -> Result<(f64, Tensor), PassingError> {
    check_same_shape(ot, os)?;
    check_complementary(fg_mask, bg_mask)?;
    let eps = weights.epsilon;
    let term = |mask: &Tensor| -> Result<(f64, Tensor), PassingError> {
        match kind {
            InstanceLossKind::Kld => masked_kld_with_grad(ot, os, mask, eps),
            InstanceLossKind::L2 => pixel_wise_loss(ot, os, mask, eps, PixelLossKind::L2),
            InstanceLossKind::L1 => pixel_wise_loss(ot, os, mask, eps, PixelLossKind::L1),
        }
    };
    let (l_fg, g_fg) = term(fg_mask)?;
    let (l_bg, g_bg) = term(bg_mask)?;
    let loss = weights.lambda_fg * l_fg + weights.lambda_bg * l_bg;
    let grad: Vec<f64> = (0..ot.len())
        .map(|i| weights.lambda_fg * g_fg.at(i) + weights.lambda_bg * g_bg.at(i))
        .collect();
    Ok((loss, Tensor::from_f64(ot.shape().to_vec(), grad).unwrap()))
}

/// Options for the combined loss; defaults are the published configuration.
#[derive(Debug, Clone, Copy, Default)]
pub struct DistillOptions {
    pub class_kind: ClassLossKind,
    pub pixel_kind: PixelLossKind,
    pub instance_kind: InstanceLossKind,
}

/// Combine the three passing losses:
/// l_total = lambda_c * l_c + lambda_f * l_f + lambda_p * l_p.
#[allow(clippy::too_many_arguments)]
pub fn total_distill_loss(
    vt2d: &Tensor,
    vs2d: &Tensor,
    ft: &Tensor,
    fs: &Tensor,
    ot: &Tensor,
    os: &Tensor,
    masks: &MaskStack,
    weights: &PassingWeights,
    options: &DistillOptions,
) -> Result<LossReport, PassingError> {
    let (l_c, _) = class_wise_loss(vt2d, vs2d, masks, weights.epsilon, options.class_kind)?;
    let (l_f, _) = pixel_wise_loss(ft, fs, &masks.agg_fg, weights.epsilon, options.pixel_kind)?;
    let (l_p, _) = instance_wise_loss(
        ot,
        os,
        &masks.agg_fg,
        &masks.agg_bg,
        weights,
        options.instance_kind,
    )?;
    let centers: Vec<Vec<f64>> = masks
        .per_class_fg
        .iter()
        .map(|fg| class_center(vs2d, fg))
        .collect::<Result<_, _>>()?;
    Ok(LossReport {
        l_c,
        l_f,
        l_p,
        l_total: weights.lambda_c * l_c + weights.lambda_f * l_f + weights.lambda_p * l_p,
        weights: *weights,
        per_class_centers: Some(centers),
    })
}

/// Which loss a gradient check targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossId {
    Class,
    Pixel,
    Instance,
}

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub max_rel_err: f64,
    pub worst_index: usize,
    pub analytic_at_worst: f64,
    pub fd_at_worst: f64,
}

/// Central-difference verification of the analytic gradients on random
/// smooth inputs. Relative error uses max(|analytic|, |fd|, 1e-8) as the
/// denominator.
pub fn finite_diff_check(
    loss_id: LossId,
    height: usize,
    width: usize,
    channels: usize,
    num_classes: usize,
    seed: u64,
    step: f64,
) -> GradCheckReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let hw = height * width;
    let n = hw * channels;
    let weights = PassingWeights::default();

    // random masks with at least one foreground pixel per class
    let mut fg_planes: Vec<Vec<u8>> = Vec::new();
    for c in 0..num_classes.max(1) {
        let mut plane: Vec<u8> = (0..hw).map(|_| u8::from(rng.random_bool(0.3))).collect();
        plane[(c * 7 + 3) % hw] = 1;
        fg_planes.push(plane);
    }
    let mk_mask = |data: Vec<u8>| Tensor::from_u8(vec![height, width], data).unwrap();

    let (teacher, student): (Vec<f64>, Vec<f64>) = match loss_id {
        LossId::Instance => {
            // probabilities well inside the clamp interval
            let t: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..0.9)).collect();
            let s: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..0.9)).collect();
            (t, s)
        }
        _ => {
            // keep norms away from zero and teacher away from student so no
            // pixel sits at a non-differentiable point
            let t: Vec<f64> = (0..n).map(|_| rng.random_range(0.25..1.25)).collect();
            let s: Vec<f64> = t
                .iter()
                .map(|&v| v + rng.random_range(0.05..0.35) * if rng.random_bool(0.5) { 1.0 } else { -1.0 })
                .collect();
            (t, s)
        }
    };
    let teacher_t = Tensor::from_f64(vec![height, width, channels], teacher).unwrap();
    let student_base = student;

    let eval = |student: &[f64]| -> (f64, Option<Tensor>) {
        let s = Tensor::from_f64(vec![height, width, channels], student.to_vec()).unwrap();
        match loss_id {
            LossId::Class => {
                let per_class_fg: Vec<Tensor> = fg_planes.iter().cloned().map(&mk_mask).collect();
                let per_class_bg: Vec<Tensor> = fg_planes
                    .iter()
                    .map(|p| mk_mask(p.iter().map(|&v| 1 - v).collect()))
                    .collect();
                let agg: Vec<u8> = (0..hw)
                    .map(|i| fg_planes.iter().map(|p| p[i]).max().unwrap())
                    .collect();
                let masks = MaskStack {
                    height,
                    width,
                    per_class_fg,
                    per_class_bg,
                    agg_fg: mk_mask(agg.clone()),
                    agg_bg: mk_mask(agg.iter().map(|&v| 1 - v).collect()),
                };
                let (l, g) = class_wise_loss(
                    &teacher_t,
                    &s,
                    &masks,
                    weights.epsilon,
                    ClassLossKind::Frobenius,
                )
                .unwrap();
                (l, Some(g))
            }
            LossId::Pixel => {
                let (l, g) = pixel_wise_loss(
                    &teacher_t,
                    &s,
                    &mk_mask(fg_planes[0].clone()),
                    weights.epsilon,
                    PixelLossKind::L2,
                )
                .unwrap();
                (l, Some(g))
            }
            LossId::Instance => {
                let fg = mk_mask(fg_planes[0].clone());
                let bg = mk_mask(fg_planes[0].iter().map(|&v| 1 - v).collect());
                let (l, g) =
                    instance_wise_loss(&teacher_t, &s, &fg, &bg, &weights, InstanceLossKind::Kld)
                        .unwrap();
                (l, Some(g))
            }
        }
    };

    let (_, analytic) = eval(&student_base);
    let analytic = analytic.unwrap();
    let mut report = GradCheckReport {
        max_rel_err: 0.0,
        worst_index: 0,
        analytic_at_worst: 0.0,
        fd_at_worst: 0.0,
    };
    let mut probe = student_base.clone();
    for i in 0..n {
        let orig = probe[i];
        probe[i] = orig + step;
        let (plus, _) = eval(&probe);
        probe[i] = orig - step;
        let (minus, _) = eval(&probe);
        probe[i] = orig;
        let fd = (plus - minus) / (2.0 * step);
        let a = analytic.at(i);
        let rel = (a - fd).abs() / a.abs().max(fd.abs()).max(1e-8);
        if rel > report.max_rel_err {
            report = GradCheckReport {
                max_rel_err: rel,
                worst_index: i,
                analytic_at_worst: a,
                fd_at_worst: fd,
            };
        }
    }
    report
}
