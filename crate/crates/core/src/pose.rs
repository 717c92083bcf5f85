//! Head pose value types, Euler/rotation conversion, clip segmentation and
//! first-frame-relative offset encoding.
//!
//! Angles are radians. The Euler convention is intrinsic roll-pitch-yaw:
//! `R = Rx(roll) · Ry(pitch) · Rz(yaw)`. Translation is in dimensionless
//! model units.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

pub type Mat3 = [[f64; 3]; 3];

/// Header line of the trajectory CSV format.
pub const TRAJECTORY_HEADER: &str = "frame,roll,pitch,yaw,tx,ty,tz";

/// Default clip length in frames.
pub const DEFAULT_CLIP_LEN: usize = 5;
/// Default frame rate.
pub const DEFAULT_FPS: f64 = 25.0;

/// Maps any finite angle into `(-π, π]`. Values already in range are
/// returned unchanged.
pub fn wrap_angle(a: f64) -> f64 {
    if a > -PI && a <= PI {
        return a;
    }
    let mut w = a.rem_euclid(2.0 * PI);
    if w > PI {
        w -= 2.0 * PI;
    }
    if w <= -PI {
        w += 2.0 * PI;
    }
    w
}

/// One frame of rigid head pose.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoseFrame {
    /// (roll, pitch, yaw)
    pub euler: [f64; 3],
    /// (tx, ty, tz)
    pub translation: [f64; 3],
}

impl PoseFrame {
    pub const ZERO: PoseFrame = PoseFrame {
        euler: [0.0; 3],
        translation: [0.0; 3],
    };

    pub fn new(euler: [f64; 3], translation: [f64; 3]) -> Result<Self> {
        for (i, a) in euler.iter().enumerate() {
            if !a.is_finite() || *a <= -PI || *a > PI {
                return Err(Error::Domain(format!(
                    "euler component {i} = {a} outside (-pi, pi]"
                )));
            }
        }
        if translation.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("non-finite translation".into()));
        }
        Ok(PoseFrame { euler, translation })
    }

    /// Builds a frame from a 6-vector, wrapping the angles into range.
    pub fn from_vec6_wrapped(v: [f64; 6]) -> Result<Self> {
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::Domain("non-finite pose component".into()));
        }
        PoseFrame::new(
            [wrap_angle(v[0]), wrap_angle(v[1]), wrap_angle(v[2])],
            [v[3], v[4], v[5]],
        )
    }

    pub fn to_vec6(&self) -> [f64; 6] {
        let [r, p, y] = self.euler;
        let [x, yy, z] = self.translation;
        [r, p, y, x, yy, z]
    }

    pub fn rotation(&self) -> Mat3 {
        // euler is always finite by construction
        euler_to_rotation(self.euler).expect("finite euler")
    }
}

/// A fixed-length run of consecutive frames.
#[derive(Debug, Clone, PartialEq)]
pub struct PoseClip {
    pub frames: Vec<PoseFrame>,
    pub fps: f64,
}

impl PoseClip {
    pub fn new(frames: Vec<PoseFrame>, fps: f64) -> Result<Self> {
        if frames.is_empty() {
            return Err(Error::Empty("pose clip has no frames".into()));
        }
        if !(fps > 0.0) || !fps.is_finite() {
            return Err(Error::Domain(format!("fps must be positive, got {fps}")));
        }
        Ok(PoseClip { frames, fps })
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }
}

/// Per-frame pose differences relative to the first frame of a clip.
#[derive(Debug, Clone, PartialEq)]
pub struct OffsetClip {
    offsets: Vec<[f64; 6]>,
}

impl OffsetClip {
    pub fn new(offsets: Vec<[f64; 6]>) -> Result<Self> {
        match offsets.first() {
            None => Err(Error::Empty("offset clip has no frames".into())),
            Some(first) if first.iter().any(|v| *v != 0.0) => Err(Error::Contract(
                "first offset of a clip must be exactly zero".into(),
            )),
            Some(_) if offsets.iter().flatten().any(|v| !v.is_finite()) => {
                Err(Error::Domain("non-finite offset".into()))
            }
            Some(_) => Ok(OffsetClip { offsets }),
        }
    }

    /// Builds a clip from a flat `6t` vector; the first six entries are
    /// ignored and the first offset is set to zero.
    pub fn from_flat_anchored(flat: &[f64], t: usize) -> Result<Self> {
        if flat.len() != 6 * t {
            return Err(Error::shape("flat offset clip", 6 * t, flat.len()));
        }
        let mut offsets = Vec::with_capacity(t);
        offsets.push([0.0; 6]);
        for chunk in flat.chunks_exact(6).skip(1) {
            let mut o = [0.0; 6];
            o.copy_from_slice(chunk);
            offsets.push(o);
        }
        OffsetClip::new(offsets)
    }

    pub fn offsets(&self) -> &[[f64; 6]] {
        &self.offsets
    }

    pub fn len(&self) -> usize {
        self.offsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.offsets.is_empty()
    }

    /// Row-major `6t` vector.
    pub fn flatten(&self) -> Vec<f64> {
        self.offsets.iter().flatten().copied().collect()
    }
}

fn check_finite3(v: [f64; 3]) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::Domain(format!("non-finite euler triple {v:?}")))
    }
}

pub fn mat_mul(a: &Mat3, b: &Mat3) -> Mat3 {
    let mut out = [[0.0; 3]; 3];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, cell) in row.iter_mut().enumerate() {
            *cell = (0..3).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    out
}

pub fn transpose(a: &Mat3) -> Mat3 {
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = a[j][i];
        }
    }
    out
}

pub fn mat_vec(a: &Mat3, v: [f64; 3]) -> [f64; 3] {
    [
        a[0][0] * v[0] + a[0][1] * v[1] + a[0][2] * v[2],
        a[1][0] * v[0] + a[1][1] * v[1] + a[1][2] * v[2],
        a[2][0] * v[0] + a[2][1] * v[1] + a[2][2] * v[2],
    ]
}

pub fn determinant(a: &Mat3) -> f64 {
    a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1])
        - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
        + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0])
}

/// Max-abs deviation of `AᵀA` from the identity.
pub fn orthonormality_error(a: &Mat3) -> f64 {
    let ata = mat_mul(&transpose(a), a);
    let mut worst: f64 = 0.0;
    for (i, row) in ata.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((v - target).abs());
        }
    }
    worst
}

/// Rotation matrix `Rx(roll) · Ry(pitch) · Rz(yaw)`.
pub fn euler_to_rotation(euler: [f64; 3]) -> Result<Mat3> {
    check_finite3(euler)?;
    let [roll, pitch, yaw] = euler;
    let (sr, cr) = roll.sin_cos();
    let (sp, cp) = pitch.sin_cos();
    let (sy, cy) = yaw.sin_cos();
    Ok([
        [cp * cy, -cp * sy, sp],
        [cr * sy + sr * sp * cy, cr * cy - sr * sp * sy, -sr * cp],
        [sr * sy - cr * sp * cy, sr * cy + cr * sp * sy, cr * cp],
    ])
}

/// Tolerance on orthonormality and determinant accepted by
/// [`rotation_to_euler`].
pub const ROTATION_TOLERANCE: f64 = 1e-6;

/// Inverse of [`euler_to_rotation`]. Pitch lands in `[-π/2, π/2]`; at gimbal
/// lock roll is set to zero and the remaining rotation goes to yaw.
pub fn rotation_to_euler(r: &Mat3) -> Result<[f64; 3]> {
    if r.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::Domain("non-finite rotation matrix".into()));
    }
    let ortho = orthonormality_error(r);
    let det = determinant(r);
    if ortho > ROTATION_TOLERANCE || (det - 1.0).abs() > ROTATION_TOLERANCE {
        return Err(Error::Domain(format!(
            "matrix is not a proper rotation (orthonormality error {ortho:e}, det {det})"
        )));
    }
    let s = r[0][2].clamp(-1.0, 1.0);
    let pitch = s.asin();
    let (roll, yaw) = if s.abs() >= 1.0 - 1e-12 {
        // gimbal lock: row 1 reduces to (sin yaw, cos yaw, 0) when roll = 0
        (0.0, r[1][0].atan2(r[1][1]))
    } else {
        ((-r[1][2]).atan2(r[2][2]), (-r[0][1]).atan2(r[0][0]))
    };
    Ok([wrap_angle(roll), pitch, wrap_angle(yaw)])
}

/// Cuts a trajectory into windows of `t` frames starting every `stride`
/// frames. A trailing partial window is dropped.
pub fn segment_clips(
    trajectory: &[PoseFrame],
    t: usize,
    stride: usize,
    fps: f64,
) -> Result<Vec<PoseClip>> {
    if t < 2 {
        return Err(Error::Domain(format!("clip length must be >= 2, got {t}")));
    }
    if stride == 0 {
        return Err(Error::Domain("stride must be >= 1".into()));
    }
    if trajectory.len() < t {
        return Err(Error::Empty(format!(
            "trajectory of {} frames is shorter than clip length {t}",
            trajectory.len()
        )));
    }
    (0..=trajectory.len() - t)
        .step_by(stride)
        .map(|start| PoseClip::new(trajectory[start..start + t].to_vec(), fps))
        .collect()
}

/// Componentwise difference of every frame from the clip's first frame.
pub fn clip_to_offsets(clip: &PoseClip) -> OffsetClip {
    let first = clip.frames[0].to_vec6();
    let offsets = clip
        .frames
        .iter()
        .map(|f| {
            let v = f.to_vec6();
            std::array::from_fn(|k| v[k] - first[k])
        })
        .collect();
    // x - x == 0 for finite x, so the first row is exactly zero
    OffsetClip { offsets }
}

/// Renders frames in the trajectory CSV format. Numbers are printed with
/// the shortest representation that round-trips exactly.
pub fn format_trajectory(frames: &[PoseFrame]) -> String {
    let mut out = String::with_capacity(64 * (frames.len() + 1));
    out.push_str(TRAJECTORY_HEADER);
    out.push('\n');
    for (i, f) in frames.iter().enumerate() {
        let v = f.to_vec6();
        let _ = writeln!(out, "{i},{},{},{},{},{},{}", v[0], v[1], v[2], v[3], v[4], v[5]);
    }
    out
}

pub fn parse_trajectory(text: &str, source_name: &str) -> Result<Vec<PoseFrame>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == TRAJECTORY_HEADER => {}
        Some((_, h)) => {
            return Err(Error::parse(
                source_name,
                1,
                format!("expected header `{TRAJECTORY_HEADER}`, found `{h}`"),
            ))
        }
        None => return Err(Error::parse(source_name, 1, "empty trajectory file")),
    }
    let mut frames = Vec::new();
    let mut last_index: Option<u64> = None;
    for (lineno, line) in lines {
        let lineno = lineno + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 7 {
            return Err(Error::parse(
                source_name,
                lineno,
                format!("expected 7 fields, found {}", fields.len()),
            ));
        }
        let index: u64 = fields[0]
            .parse()
            .map_err(|_| Error::parse(source_name, lineno, format!("bad frame index `{}`", fields[0])))?;
        match last_index {
            None if index != 0 => {
                return Err(Error::parse(source_name, lineno, "frame indices must start at 0"))
            }
            Some(prev) if index <= prev => {
                return Err(Error::parse(
                    source_name,
                    lineno,
                    "frame indices must be strictly increasing",
                ))
            }
            _ => {}
        }
        last_index = Some(index);
        let mut v = [0.0; 6];
        for (k, field) in fields[1..].iter().enumerate() {
            v[k] = field
                .parse()
                .map_err(|_| Error::parse(source_name, lineno, format!("bad number `{field}`")))?;
        }
        let frame = PoseFrame::new([v[0], v[1], v[2]], [v[3], v[4], v[5]])
            .map_err(|e| Error::parse(source_name, lineno, e.to_string()))?;
        frames.push(frame);
    }
    Ok(frames)
}

pub fn read_trajectory(path: &Path) -> Result<Vec<PoseFrame>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_trajectory(&text, &path.display().to_string())
}

pub fn write_trajectory(path: &Path, frames: &[PoseFrame]) -> Result<()> {
    std::fs::write(path, format_trajectory(frames)).map_err(|e| Error::io(path, e))
}
