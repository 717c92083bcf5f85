//! One-to-many inference: center features, ε-ball sampling, pose decoding,
//! clip stitching and feature-window assembly.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::face::ExpressionCoeff;
use crate::motion_space::{norm, BasisWeights, MotionBasisBank, MotionFeature};
use crate::nn::SmallNet;
use crate::pose::{OffsetClip, PoseFrame};

/// Default sampling radius.
pub const DEFAULT_EPSILON: f64 = 1.0;
/// Default half-width of the feature window.
pub const DEFAULT_WINDOW_HALF: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleConfig {
    pub epsilon: f64,
    pub seed: u64,
    pub num_samples: usize,
}

impl SampleConfig {
    pub fn new(epsilon: f64, seed: u64, num_samples: usize) -> Result<Self> {
        if !(epsilon >= 0.0) || !epsilon.is_finite() {
            return Err(Error::Domain(format!("epsilon must be >= 0, got {epsilon}")));
        }
        if num_samples == 0 {
            return Err(Error::Domain("num_samples must be >= 1".into()));
        }
        Ok(SampleConfig {
            epsilon,
            seed,
            num_samples,
        })
    }
}

/// Independent random stream for sample `j` under `seed`.
pub fn sample_rng(seed: u64, j: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(j);
    rng
}

/// The center of the reachable motion set for given audio weights.
pub fn center_feature(bank: &MotionBasisBank, audio_weights: &BasisWeights) -> Result<MotionFeature> {
    bank.reconstruct(audio_weights)
}

/// One uniform draw from the closed ball of radius `epsilon` around
/// `center`. The returned point is guaranteed to satisfy
/// `‖F − center‖₂ ≤ epsilon` in floating point.
pub fn sample_ball<R: Rng + ?Sized>(center: &MotionFeature, epsilon: f64, rng: &mut R) -> MotionFeature {
    let dim = center.dim();
    let mut dir: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
    let n = norm(&dir);
    if n > 0.0 {
        dir.iter_mut().for_each(|d| *d /= n);
    }
    let u: f64 = rng.random();
    let mut radius = epsilon * u.powf(1.0 / dim as f64);
    loop {
        let point: Vec<f64> = center
            .values()
            .iter()
            .zip(&dir)
            .map(|(c, d)| c + radius * d)
            .collect();
        let dist = norm(
            &point
                .iter()
                .zip(center.values())
                .map(|(p, c)| p - c)
                .collect::<Vec<_>>(),
        );
        if dist <= epsilon {
            return MotionFeature::new(point).expect("finite sample");
        }
        // rounding pushed the point past the boundary
        radius *= 1.0 - 1e-12;
    }
}

/// `num_samples` draws from the ε-ball; sample `j` uses its own stream so
/// any subset can be regenerated independently.
pub fn sample_motion(center: &MotionFeature, cfg: &SampleConfig) -> Vec<MotionFeature> {
    (0..cfg.num_samples as u64)
        .map(|j| sample_ball(center, cfg.epsilon, &mut sample_rng(cfg.seed, j)))
        .collect()
}

/// Decodes a motion feature into `t` pose offsets. The first offset is
/// pinned to zero regardless of the decoder's first six outputs.
pub fn decode_pose(decoder: &SmallNet, feature: &MotionFeature) -> Result<OffsetClip> {
    let out = decoder.predict(feature.values())?;
    if out.len() % 6 != 0 || out.len() < 12 {
        return Err(Error::shape("decoder output (6t)", 6 * (out.len() / 6).max(2), out.len()));
    }
    OffsetClip::from_flat_anchored(&out, out.len() / 6)
}

/// Composes clips into one trajectory. Each clip starts at the last frame
/// emitted so far; its duplicate zero-offset first frame is skipped for all
/// clips after the first.
pub fn stitch_clips(clips: &[OffsetClip], initial: PoseFrame) -> Result<Vec<PoseFrame>> {
    if clips.is_empty() {
        return Err(Error::Empty("no clips to stitch".into()));
    }
    let total = clips[0].len() + clips[1..].iter().map(|c| c.len() - 1).sum::<usize>();
    let mut out = Vec::with_capacity(total);
    out.push(initial);
    for clip in clips {
        let anchor = out[out.len() - 1].to_vec6();
        for off in &clip.offsets()[1..] {
            let v: [f64; 6] = std::array::from_fn(|k| anchor[k] + off[k]);
            out.push(PoseFrame::from_vec6_wrapped(v)?);
        }
    }
    Ok(out)
}

/// `2k + 1` concatenated (expression, motion) frame features centered on
/// one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureWindow {
    pub entries: Vec<Vec<f64>>,
}

impl FeatureWindow {
    pub fn center(&self) -> &[f64] {
        &self.entries[self.entries.len() / 2]
    }
}

/// Window of frames `i−k ..= i+k`, replicating the edge frames past either
/// end of the sequence.
pub fn assemble_window(
    expressions: &[ExpressionCoeff],
    motions: &[[f64; 6]],
    i: usize,
    k: usize,
) -> Result<FeatureWindow> {
    if expressions.len() != motions.len() {
        return Err(Error::shape("motion sequence", expressions.len(), motions.len()));
    }
    if i >= expressions.len() {
        return Err(Error::OutOfRange {
            index: i,
            len: expressions.len(),
        });
    }
    let last = expressions.len() as isize - 1;
    let entries = (-(k as isize)..=k as isize)
        .map(|d| {
            let idx = (i as isize + d).clamp(0, last) as usize;
            let mut e = expressions[idx].0.clone();
            e.extend_from_slice(&motions[idx]);
            e
        })
        .collect();
    Ok(FeatureWindow { entries })
}

/// Decodes basis vector `index` and stitches it `num_clips` times from
/// `initial`, exposing the motion that basis stands for.
pub fn probe_basis(
    bank: &MotionBasisBank,
    decoder: &SmallNet,
    index: usize,
    initial: PoseFrame,
    num_clips: usize,
) -> Result<Vec<PoseFrame>> {
    if num_clips == 0 {
        return Err(Error::Domain("num_clips must be >= 1".into()));
    }
    let feature = bank.basis_feature(index)?;
    let clip = decode_pose(decoder, &feature)?;
    stitch_clips(&vec![clip; num_clips], initial)
}
