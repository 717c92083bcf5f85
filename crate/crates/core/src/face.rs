//! Linear morphable face model, landmark projection and the
//! landmark-weighted expression losses.

use std::fmt::Write as _;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::pose::{mat_vec, transpose, PoseFrame};

/// Landmark weight for ordinary points.
pub const WEIGHT_REGULAR: f64 = 1.0;
/// Landmark weight for nose and inner-mouth points.
pub const WEIGHT_EMPHASIS: f64 = 20.0;
/// Default weight of the landmark term in the expression loss.
pub const DEFAULT_LAMBDA_LDMK: f64 = 0.02;
/// Default focal scale of the projection.
pub const DEFAULT_FOCAL: f64 = 5.0;

/// Seed of the bundled 68-point model.
pub const BUILTIN_SEED: u64 = 68;
const BUILTIN_FIXTURE: &str = include_str!("../fixtures/face68.txt");
const FIXTURE_MAGIC: &str = "face-model v1";

/// Expression coefficients; used directly as the frame-level expression
/// feature.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpressionCoeff(pub Vec<f64>);

/// Identity (shape) coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct IdentityCoeff(pub Vec<f64>);

/// `S = S̄ + B_id·α + B_exp·β` with a set of weighted landmark vertices.
#[derive(Debug, Clone, PartialEq)]
pub struct FaceModel {
    mean_shape: Vec<f64>,
    /// `3V × D_id`, row-major
    identity_basis: Vec<f64>,
    /// `3V × D_exp`, row-major
    expression_basis: Vec<f64>,
    identity_dim: usize,
    expression_dim: usize,
    landmark_indices: Vec<usize>,
    landmark_weights: Vec<f64>,
}

impl FaceModel {
    pub fn new(
        mean_shape: Vec<f64>,
        identity_basis: Vec<f64>,
        identity_dim: usize,
        expression_basis: Vec<f64>,
        expression_dim: usize,
        landmark_indices: Vec<usize>,
        landmark_weights: Vec<f64>,
    ) -> Result<Self> {
        if mean_shape.is_empty() || !mean_shape.len().is_multiple_of(3) {
            return Err(Error::Domain("mean shape length must be a positive multiple of 3".into()));
        }
        let rows = mean_shape.len();
        let vertices = rows / 3;
        if identity_basis.len() != rows * identity_dim {
            return Err(Error::shape("identity basis", rows * identity_dim, identity_basis.len()));
        }
        if expression_basis.len() != rows * expression_dim {
            return Err(Error::shape("expression basis", rows * expression_dim, expression_basis.len()));
        }
        if landmark_indices.len() != landmark_weights.len() {
            return Err(Error::shape("landmark weights", landmark_indices.len(), landmark_weights.len()));
        }
        if landmark_indices.is_empty() {
            return Err(Error::Empty("face model has no landmarks".into()));
        }
        let mut seen = vec![false; vertices];
        for &i in &landmark_indices {
            if i >= vertices {
                return Err(Error::OutOfRange { index: i, len: vertices });
            }
            if std::mem::replace(&mut seen[i], true) {
                return Err(Error::Domain(format!("landmark index {i} repeated")));
            }
        }
        if landmark_weights
            .iter()
            .any(|w| *w != WEIGHT_REGULAR && *w != WEIGHT_EMPHASIS)
        {
            return Err(Error::Domain("landmark weights must be 1 or 20".into()));
        }
        if mean_shape
            .iter()
            .chain(&identity_basis)
            .chain(&expression_basis)
            .any(|v| !v.is_finite())
        {
            return Err(Error::Domain("face model has non-finite entries".into()));
        }
        Ok(FaceModel {
            mean_shape,
            identity_basis,
            expression_basis,
            identity_dim,
            expression_dim,
            landmark_indices,
            landmark_weights,
        })
    }

    /// The bundled 68-landmark model.
    pub fn builtin() -> Self {
        parse_face_model(BUILTIN_FIXTURE, "fixtures/face68.txt").expect("bundled face model parses")
    }

    /// Generates the 68-vertex model: vertices at canonical landmark
    /// positions, `D_id = 8`, `D_exp = 16`, bases from a seeded Gaussian
    /// matrix with orthonormalized columns.
    pub fn desk_scale(seed: u64) -> Self {
        const ID_DIM: usize = 8;
        const EXP_DIM: usize = 16;
        let mean_shape = canonical_landmarks();
        let rows = mean_shape.len();
        let cols = ID_DIM + EXP_DIM;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut columns: Vec<Vec<f64>> = (0..cols)
            .map(|_| (0..rows).map(|_| StandardNormal.sample(&mut rng)).collect())
            .collect();
        // modified Gram-Schmidt
        for j in 0..cols {
            for k in 0..j {
                let (done, rest) = columns.split_at_mut(j);
                let proj: f64 = done[k].iter().zip(&rest[0]).map(|(a, b)| a * b).sum();
                rest[0].iter_mut().zip(&done[k]).for_each(|(c, q)| *c -= proj * q);
            }
            let n = columns[j].iter().map(|v| v * v).sum::<f64>().sqrt();
            columns[j].iter_mut().for_each(|v| *v /= n);
        }
        let to_row_major = |cols: &[Vec<f64>]| -> Vec<f64> {
            (0..rows).flat_map(|r| cols.iter().map(move |c| c[r])).collect()
        };
        let identity_basis = to_row_major(&columns[..ID_DIM]);
        let expression_basis = to_row_major(&columns[ID_DIM..]);
        let landmark_indices: Vec<usize> = (0..68).collect();
        let landmark_weights = landmark_indices
            .iter()
            .map(|i| {
                if (27..=35).contains(i) || (60..=67).contains(i) {
                    WEIGHT_EMPHASIS
                } else {
                    WEIGHT_REGULAR
                }
            })
            .collect();
        FaceModel::new(
            mean_shape,
            identity_basis,
            ID_DIM,
            expression_basis,
            EXP_DIM,
            landmark_indices,
            landmark_weights,
        )
        .expect("generated face model is valid")
    }

    pub fn vertex_count(&self) -> usize {
        self.mean_shape.len() / 3
    }

    pub fn identity_dim(&self) -> usize {
        self.identity_dim
    }

    pub fn expression_dim(&self) -> usize {
        self.expression_dim
    }

    pub fn landmark_indices(&self) -> &[usize] {
        &self.landmark_indices
    }

    pub fn landmark_weights(&self) -> &[f64] {
        &self.landmark_weights
    }

    pub fn mean_shape(&self) -> &[f64] {
        &self.mean_shape
    }

    pub fn reconstruct_shape(&self, alpha: &IdentityCoeff, beta: &ExpressionCoeff) -> Result<Vec<f64>> {
        if alpha.0.len() != self.identity_dim {
            return Err(Error::shape("identity coefficients", self.identity_dim, alpha.0.len()));
        }
        if beta.0.len() != self.expression_dim {
            return Err(Error::shape("expression coefficients", self.expression_dim, beta.0.len()));
        }
        let mut shape = self.mean_shape.clone();
        for (r, s) in shape.iter_mut().enumerate() {
            let id_row = &self.identity_basis[r * self.identity_dim..(r + 1) * self.identity_dim];
            let exp_row = &self.expression_basis[r * self.expression_dim..(r + 1) * self.expression_dim];
            *s += id_row.iter().zip(&alpha.0).map(|(b, a)| b * a).sum::<f64>();
            *s += exp_row.iter().zip(&beta.0).map(|(b, a)| b * a).sum::<f64>();
        }
        Ok(shape)
    }

    fn expression_entry(&self, row: usize, col: usize) -> f64 {
        self.expression_basis[row * self.expression_dim + col]
    }
}

pub type Point2 = [f64; 2];

/// Gathers the landmark vertices of `shape`, applies the pose and projects
/// with `(x, y) · focal / z`.
pub fn project_landmarks(
    shape: &[f64],
    model: &FaceModel,
    pose: &PoseFrame,
    focal: f64,
) -> Result<Vec<Point2>> {
    Ok(posed_landmarks(shape, model, pose)?
        .into_iter()
        .map(|v| [focal * v[0] / v[2], focal * v[1] / v[2]])
        .collect())
}

fn posed_landmarks(shape: &[f64], model: &FaceModel, pose: &PoseFrame) -> Result<Vec<[f64; 3]>> {
    if shape.len() != model.mean_shape.len() {
        return Err(Error::shape("face shape", model.mean_shape.len(), shape.len()));
    }
    let r = pose.rotation();
    model
        .landmark_indices
        .iter()
        .map(|&vi| {
            let v = mat_vec(&r, [shape[3 * vi], shape[3 * vi + 1], shape[3 * vi + 2]]);
            let posed = [
                v[0] + pose.translation[0],
                v[1] + pose.translation[1],
                v[2] + pose.translation[2],
            ];
            if posed[2] > 0.0 {
                Ok(posed)
            } else {
                Err(Error::Projection {
                    vertex: vi,
                    depth: posed[2],
                })
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct LandmarkLoss {
    pub value: f64,
    /// dL/d(predicted point)
    pub grad: Vec<Point2>,
}

/// `(1/N) Σ ω_n ‖p̃_n − p_n‖²`
pub fn landmark_loss(predicted: &[Point2], target: &[Point2], omega: &[f64]) -> Result<LandmarkLoss> {
    if predicted.len() != target.len() {
        return Err(Error::shape("landmark targets", predicted.len(), target.len()));
    }
    if omega.len() != predicted.len() {
        return Err(Error::shape("landmark weights", predicted.len(), omega.len()));
    }
    if predicted.is_empty() {
        return Err(Error::Empty("no landmarks".into()));
    }
    let n = predicted.len() as f64;
    let mut value = 0.0;
    let mut grad = Vec::with_capacity(predicted.len());
    for ((p, q), w) in predicted.iter().zip(target).zip(omega) {
        let dx = p[0] - q[0];
        let dy = p[1] - q[1];
        value += w * (dx * dx + dy * dy);
        grad.push([2.0 * w * dx / n, 2.0 * w * dy / n]);
    }
    Ok(LandmarkLoss { value: value / n, grad })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExpressionLoss {
    pub value: f64,
    pub l2: f64,
    pub landmark: f64,
    pub grad_beta: Vec<f64>,
}

/// Inputs of the expression loss that stay fixed for one training sample.
#[derive(Debug, Clone, Copy)]
pub struct ExpressionTarget<'a> {
    pub beta: &'a ExpressionCoeff,
    pub alpha: &'a IdentityCoeff,
    pub pose: &'a PoseFrame,
    pub landmarks: &'a [Point2],
}

/// `‖β̃ − β‖₂ + λ · L_ldmk` where the predicted landmarks are the projection
/// of the shape rebuilt from `β̃`. The norm's gradient at zero is taken as
/// zero.
pub fn expression_loss(
    beta_pred: &ExpressionCoeff,
    target: &ExpressionTarget<'_>,
    model: &FaceModel,
    lambda_ldmk: f64,
    focal: f64,
) -> Result<ExpressionLoss> {
    if !(lambda_ldmk >= 0.0) {
        return Err(Error::Domain(format!("lambda_ldmk must be >= 0, got {lambda_ldmk}")));
    }
    if beta_pred.0.len() != target.beta.0.len() {
        return Err(Error::shape("expression coefficients", target.beta.0.len(), beta_pred.0.len()));
    }
    let diff: Vec<f64> = beta_pred.0.iter().zip(&target.beta.0).map(|(a, b)| a - b).collect();
    let l2 = diff.iter().map(|d| d * d).sum::<f64>().sqrt();
    let mut grad_beta: Vec<f64> = if l2 > 0.0 {
        diff.iter().map(|d| d / l2).collect()
    } else {
        vec![0.0; diff.len()]
    };

    let shape = model.reconstruct_shape(target.alpha, beta_pred)?;
    let posed = posed_landmarks(&shape, model, target.pose)?;
    let predicted: Vec<Point2> = posed
        .iter()
        .map(|v| [focal * v[0] / v[2], focal * v[1] / v[2]])
        .collect();
    let ldmk = landmark_loss(&predicted, target.landmarks, &model.landmark_weights)?;

    if lambda_ldmk > 0.0 {
        let rt = transpose(&target.pose.rotation());
        for ((v, g), &vi) in posed.iter().zip(&ldmk.grad).zip(&model.landmark_indices) {
            let z = v[2];
            let d_posed = [
                lambda_ldmk * focal * g[0] / z,
                lambda_ldmk * focal * g[1] / z,
                -lambda_ldmk * focal * (g[0] * v[0] + g[1] * v[1]) / (z * z),
            ];
            let d_vertex = mat_vec(&rt, d_posed);
            for (c, dv) in d_vertex.iter().enumerate() {
                let row = 3 * vi + c;
                for (j, gb) in grad_beta.iter_mut().enumerate() {
                    *gb += dv * model.expression_entry(row, j);
                }
            }
        }
    }

    Ok(ExpressionLoss {
        value: l2 + lambda_ldmk * ldmk.value,
        l2,
        landmark: ldmk.value,
        grad_beta,
    })
}

/// Canonical 68-point layout (jaw, brows, nose, eyes, mouth) in model
/// units; x right, y up, z away from the camera.
fn canonical_landmarks() -> Vec<f64> {
    use std::f64::consts::PI;
    let mut pts: Vec<[f64; 3]> = Vec::with_capacity(68);
    for i in 0..17 {
        let s = i as f64 / 16.0;
        let bulge = (PI * s).sin();
        pts.push([-0.75 + 1.5 * s, -0.15 - 0.65 * bulge, 0.35 - 0.3 * bulge]);
    }
    for side in [-1.0, 1.0] {
        for k in 0..5 {
            let s = k as f64 / 4.0;
            let x = if side < 0.0 { -0.6 + 0.5 * s } else { 0.1 + 0.5 * s };
            pts.push([x, 0.45 + 0.06 * (PI * s).sin(), -0.1]);
        }
    }
    for k in 0..4 {
        pts.push([0.0, 0.3 - 0.12 * k as f64, -0.15 - 0.06 * k as f64]);
    }
    for k in 0..5 {
        let s = k as f64 / 4.0;
        pts.push([-0.15 + 0.3 * s, -0.12 + 0.03 * (PI * s).sin(), -0.28 + 0.05 * (2.0 * s - 1.0).abs()]);
    }
    for cx in [-0.32, 0.32] {
        for k in 0..6 {
            let a = PI - 2.0 * PI * k as f64 / 6.0;
            pts.push([cx + 0.12 * a.cos(), 0.25 + 0.05 * a.sin(), -0.05]);
        }
    }
    for k in 0..12 {
        let a = PI - 2.0 * PI * k as f64 / 12.0;
        pts.push([0.3 * a.cos(), -0.42 + 0.12 * a.sin(), -0.15]);
    }
    for k in 0..8 {
        let a = PI - 2.0 * PI * k as f64 / 8.0;
        pts.push([0.2 * a.cos(), -0.42 + 0.05 * a.sin(), -0.12]);
    }
    debug_assert_eq!(pts.len(), 68);
    pts.into_iter().flatten().collect()
}

/// Renders a model in the fixture text format.
pub fn format_face_model(model: &FaceModel) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{FIXTURE_MAGIC}");
    let _ = writeln!(
        out,
        "{} {} {} {}",
        model.vertex_count(),
        model.identity_dim,
        model.expression_dim,
        model.landmark_indices.len()
    );
    let join = |v: &[f64]| v.iter().map(f64::to_string).collect::<Vec<_>>().join(" ");
    out.push_str("# mean shape\n");
    for v in model.mean_shape.chunks_exact(3) {
        let _ = writeln!(out, "{}", join(v));
    }
    out.push_str("# identity basis\n");
    for row in model.identity_basis.chunks_exact(model.identity_dim.max(1)) {
        let _ = writeln!(out, "{}", join(row));
    }
    out.push_str("# expression basis\n");
    for row in model.expression_basis.chunks_exact(model.expression_dim.max(1)) {
        let _ = writeln!(out, "{}", join(row));
    }
    out.push_str("# landmark indices\n");
    let idx: Vec<String> = model.landmark_indices.iter().map(usize::to_string).collect();
    let _ = writeln!(out, "{}", idx.join(" "));
    out.push_str("# landmark weights\n");
    let _ = writeln!(out, "{}", join(&model.landmark_weights));
    out
}

pub fn parse_face_model(text: &str, source_name: &str) -> Result<FaceModel> {
    let mut tokens = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim_start().starts_with('#') && !l.trim().is_empty())
        .flat_map(|(n, l)| l.split_whitespace().map(move |t| (n + 1, t)));
    let first = text.lines().next().unwrap_or_default();
    if first.trim() != FIXTURE_MAGIC {
        return Err(Error::parse(source_name, 1, format!("expected `{FIXTURE_MAGIC}`")));
    }
    // skip the two magic tokens
    tokens.next();
    tokens.next();
    let mut next_usize = |what: &str| -> Result<usize> {
        let (line, tok) = tokens
            .next()
            .ok_or_else(|| Error::parse(source_name, 0, format!("truncated before {what}")))?;
        tok.parse()
            .map_err(|_| Error::parse(source_name, line, format!("bad {what} `{tok}`")))
    };
    let vertices = next_usize("V")?;
    let id_dim = next_usize("D_id")?;
    let exp_dim = next_usize("D_exp")?;
    let n = next_usize("N")?;
    let mut numbers = |count: usize, what: &str| -> Result<Vec<f64>> {
        (0..count)
            .map(|_| {
                let (line, tok) = tokens
                    .next()
                    .ok_or_else(|| Error::parse(source_name, 0, format!("truncated in {what}")))?;
                tok.parse()
                    .map_err(|_| Error::parse(source_name, line, format!("bad number `{tok}` in {what}")))
            })
            .collect()
    };
    let mean = numbers(3 * vertices, "mean shape")?;
    let id_basis = numbers(3 * vertices * id_dim, "identity basis")?;
    let exp_basis = numbers(3 * vertices * exp_dim, "expression basis")?;
    let indices = numbers(n, "landmark indices")?;
    let weights = numbers(n, "landmark weights")?;
    let indices = indices
        .into_iter()
        .map(|v| {
            if v >= 0.0 && v.fract() == 0.0 {
                Ok(v as usize)
            } else {
                Err(Error::parse(source_name, 0, format!("bad landmark index {v}")))
            }
        })
        .collect::<Result<Vec<_>>>()?;
    FaceModel::new(mean, id_basis, id_dim, exp_basis, exp_dim, indices, weights)
        .map_err(|e| Error::parse(source_name, 0, e.to_string()))
}

pub fn read_face_model(path: &Path) -> Result<FaceModel> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_face_model(&text, &path.display().to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_model() -> FaceModel {
        // V = 4, D_id = 1, D_exp = 2
        let mean = vec![0.0, 0.0, 1.0, 1.0, 0.0, 1.0, 0.0, 1.0, 1.0, 1.0, 1.0, 1.0];
        let id = vec![0.1; 12];
        let mut exp = vec![0.0; 24];
        // vertex 0 x moves with beta0, vertex 3 y with beta1
        exp[0] = 1.0;
        exp[10 * 2 + 1] = 0.5;
        exp[5 * 2] = 0.25; // vertex 1 z with beta0
        FaceModel::new(mean, id, 1, exp, 2, vec![0, 1, 2, 3], vec![1.0, 20.0, 1.0, 1.0]).unwrap()
    }

    #[test]
    fn mean_shape_at_zero_coefficients() {
        let m = toy_model();
        let s = m
            .reconstruct_shape(&IdentityCoeff(vec![0.0]), &ExpressionCoeff(vec![0.0, 0.0]))
            .unwrap();
        assert_eq!(s, m.mean_shape);
    }

    #[test]
    fn toy_combination_by_hand() {
        let m = toy_model();
        let s = m
            .reconstruct_shape(&IdentityCoeff(vec![2.0]), &ExpressionCoeff(vec![0.4, -2.0]))
            .unwrap();
        let mut expected = vec![0.0, 0.0, 1.0, 1.0, 0.0, 1.0, 0.0, 1.0, 1.0, 1.0, 1.0, 1.0];
        expected.iter_mut().for_each(|v| *v += 0.2);
        expected[0] += 0.4;
        expected[5] += 0.25 * 0.4;
        expected[10] += 0.5 * -2.0;
        for (a, b) in s.iter().zip(&expected) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn reconstruct_shape_dims_checked() {
        let m = toy_model();
        assert!(m
            .reconstruct_shape(&IdentityCoeff(vec![0.0, 1.0]), &ExpressionCoeff(vec![0.0, 0.0]))
            .is_err());
    }

    #[test]
    fn unit_depth_projection() {
        let mean = vec![0.2, -0.1, 1.0, 0.0, 0.0, 1.0];
        let m = FaceModel::new(mean.clone(), vec![], 0, vec![], 0, vec![0, 1], vec![1.0, 1.0]).unwrap();
        let p = project_landmarks(&mean, &m, &PoseFrame::ZERO, 1.0).unwrap();
        assert_eq!(p[0], [0.2, -0.1]);
        let p2 = project_landmarks(&mean, &m, &PoseFrame::ZERO, 2.0).unwrap();
        assert_eq!(p2[0], [0.4, -0.2]);
    }

    #[test]
    fn rotated_projection_matches_manual() {
        let m = toy_model();
        let pose = PoseFrame::new([0.1, -0.2, 0.3], [0.05, -0.1, 3.0]).unwrap();
        let shape = m.mean_shape.clone();
        let p = project_landmarks(&shape, &m, &pose, 2.5).unwrap();
        let r = crate::pose::euler_to_rotation([0.1, -0.2, 0.3]).unwrap();
        for (n, vi) in m.landmark_indices().iter().enumerate() {
            let v = &shape[3 * vi..3 * vi + 3];
            let x = r[0][0] * v[0] + r[0][1] * v[1] + r[0][2] * v[2] + 0.05;
            let y = r[1][0] * v[0] + r[1][1] * v[1] + r[1][2] * v[2] - 0.1;
            let z = r[2][0] * v[0] + r[2][1] * v[1] + r[2][2] * v[2] + 3.0;
            assert!((p[n][0] - 2.5 * x / z).abs() < 1e-12);
            assert!((p[n][1] - 2.5 * y / z).abs() < 1e-12);
        }
    }

    #[test]
    fn nonpositive_depth_fails() {
        let m = toy_model();
        let pose = PoseFrame::new([0.0; 3], [0.0, 0.0, -5.0]).unwrap();
        assert!(matches!(
            project_landmarks(&m.mean_shape, &m, &pose, 1.0),
            Err(Error::Projection { .. })
        ));
    }

    #[test]
    fn landmark_loss_weighting() {
        let pred = [[1.0, 0.0], [0.0, 0.5]];
        let target = [[0.0, 0.0], [0.0, 0.0]];
        let l = landmark_loss(&pred, &target, &[1.0, 20.0]).unwrap();
        assert_eq!(l.value, 3.0);
        assert_eq!(landmark_loss(&target, &target, &[1.0, 20.0]).unwrap().value, 0.0);
        assert!(landmark_loss(&pred, &target[..1], &[1.0]).is_err());
    }

    #[test]
    fn landmark_loss_gradient_fd() {
        let pred = vec![[0.3, -0.2], [1.1, 0.4], [-0.5, 0.9]];
        let target = vec![[0.1, 0.1], [1.0, 0.0], [-0.2, 0.7]];
        let w = [1.0, 20.0, 1.0];
        let l = landmark_loss(&pred, &target, &w).unwrap();
        let h = 1e-5;
        for n in 0..3 {
            for c in 0..2 {
                let mut p = pred.clone();
                p[n][c] += h;
                let up = landmark_loss(&p, &target, &w).unwrap().value;
                p[n][c] -= 2.0 * h;
                let down = landmark_loss(&p, &target, &w).unwrap().value;
                let fd = (up - down) / (2.0 * h);
                assert!(crate::nn::relative_error(l.grad[n][c], fd) < 1e-6);
            }
        }
    }

    #[test]
    fn face_model_validation() {
        let mean = vec![0.0; 6];
        assert!(FaceModel::new(mean.clone(), vec![], 0, vec![], 0, vec![0, 0], vec![1.0, 1.0]).is_err());
        assert!(FaceModel::new(mean.clone(), vec![], 0, vec![], 0, vec![0, 2], vec![1.0, 1.0]).is_err());
        assert!(FaceModel::new(mean, vec![], 0, vec![], 0, vec![0, 1], vec![1.0, 5.0]).is_err());
    }

    #[test]
    fn bundled_fixture_matches_generator() {
        let generated = FaceModel::desk_scale(BUILTIN_SEED);
        assert_eq!(FaceModel::builtin(), generated);
        assert_eq!(generated.vertex_count(), 68);
        assert_eq!(generated.expression_dim(), 16);
        assert_eq!(generated.landmark_weights().iter().filter(|w| **w == 20.0).count(), 17);
    }

    #[test]
    fn fixture_round_trip_and_truncation() {
        let m = toy_model();
        let text = format_face_model(&m);
        assert_eq!(parse_face_model(&text, "mem").unwrap(), m);
        let cut = &text[..text.len() / 2];
        assert!(parse_face_model(cut, "mem").is_err());
        assert!(parse_face_model("face-model v2\n", "mem").is_err());
    }
}
