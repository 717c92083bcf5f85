//! Finite-difference verification of every hand-written gradient used in
//! training, on seeded random instances.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::encoders::AudioClipFeature;
use crate::error::{Error, Result};
use crate::face::{ExpressionCoeff, FaceModel, IdentityCoeff};
use crate::model::{MotionModel, ParamGroup};
use crate::motion_space::{softmax_scaled, BasisWeights};
use crate::nn::fd_coordinate_error;
use crate::pose::{OffsetClip, PoseFrame};
use crate::train::{audio_sample_loss, expression_sample_loss, motion_sample_loss, FrameSample, ModelGrads};

/// Worst relative error over the checked coordinates of one tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorCheck {
    pub name: String,
    pub max_error: f64,
    pub checked: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelGradReport {
    pub tensors: Vec<TensorCheck>,
    pub tolerance: f64,
    pub max_error: f64,
    pub passed: bool,
}

impl ModelGradReport {
    pub fn failing(&self) -> Vec<&str> {
        self.tensors
            .iter()
            .filter(|t| t.max_error > self.tolerance)
            .map(|t| t.name.as_str())
            .collect()
    }
}

/// One random training example of each kind.
#[derive(Debug, Clone)]
pub struct GradInstance {
    pub clip: OffsetClip,
    pub audio: AudioClipFeature,
    pub visual: BasisWeights,
    pub frame: FrameSample,
}

impl GradInstance {
    pub fn random(model: &MotionModel, face: &FaceModel, seed: u64) -> Result<Self> {
        if model.expression_dim() != face.expression_dim() {
            return Err(Error::shape("model expression size", face.expression_dim(), model.expression_dim()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let t = model.clip_len();
        let small = Normal::new(0.0, 0.2).expect("valid std");
        let mut offsets = vec![[0.0; 6]; t];
        for o in offsets.iter_mut().skip(1) {
            o.iter_mut().for_each(|v| *v = small.sample(&mut rng));
        }
        let clip = OffsetClip::new(offsets)?;
        let audio = AudioClipFeature::new(
            (0..t * crate::AUDIO_FRAME_DIM).map(|_| rng.sample(StandardNormal)).collect(),
            t,
        )?;
        let logits: Vec<f64> = (0..model.bank.size()).map(|_| 2.0 * rng.sample::<f64, _>(StandardNormal)).collect();
        let visual = BasisWeights::new(softmax_scaled(&logits, 1.0))?;
        let half = Normal::new(0.0, 0.5).expect("valid std");
        let beta = ExpressionCoeff((0..face.expression_dim()).map(|_| half.sample(&mut rng)).collect());
        let alpha = IdentityCoeff((0..face.identity_dim()).map(|_| half.sample(&mut rng)).collect());
        let pose = PoseFrame::new(
            [
                rng.random_range(-0.3..0.3),
                rng.random_range(-0.3..0.3),
                rng.random_range(-0.3..0.3),
            ],
            [rng.random_range(-0.1..0.1), rng.random_range(-0.1..0.1), 5.0],
        )?;
        let frame_audio: Vec<f64> = (0..crate::AUDIO_FRAME_DIM).map(|_| rng.sample(StandardNormal)).collect();
        let subject = rng.random_range(0..model.identities.subjects());
        let frame = FrameSample::new(face, model.config.focal, &frame_audio, subject, beta, alpha, pose)?;
        Ok(GradInstance {
            clip,
            audio,
            visual,
            frame,
        })
    }
}

type LossFn<'a> = dyn Fn(&MotionModel, &mut ModelGrads) -> Result<f64> + 'a;

fn check_groups(
    model: &MotionModel,
    groups: &[ParamGroup],
    loss: &LossFn<'_>,
    tolerance: f64,
    per_tensor: Option<usize>,
    rng: &mut ChaCha8Rng,
    out: &mut Vec<TensorCheck>,
) -> Result<()> {
    let mut grads = ModelGrads::default();
    loss(model, &mut grads)?;
    let mut scratch = ModelGrads::default();
    let mut probe = model.clone();
    for &group in groups {
        let analytic = grads
            .get(group)
            .ok_or_else(|| Error::Contract(format!("loss produced no gradient for {group}")))?;
        let n = model.params(group).len();
        if analytic.len() != n {
            return Err(Error::shape("analytic gradient", n, analytic.len()));
        }
        // contiguous runs of parameters sharing a tensor name
        let mut start = 0;
        while start < n {
            let name = model.param_name(group, start);
            let mut end = start + 1;
            while end < n && model.param_name(group, end) == name {
                end += 1;
            }
            let len = end - start;
            let mut picks: Vec<usize> = match per_tensor {
                Some(k) if k < len => sample(rng, len, k).into_iter().collect(),
                _ => (0..len).collect(),
            };
            picks.sort_unstable();
            let mut worst = 0.0f64;
            for &off in &picks {
                let i = start + off;
                let orig = model.params(group)[i];
                let err = fd_coordinate_error(analytic[i], orig, tolerance, |v| {
                    probe.params_mut(group)[i] = v;
                    loss(&probe, &mut scratch)
                })?;
                probe.params_mut(group)[i] = orig;
                worst = worst.max(err);
            }
            out.push(TensorCheck {
                name,
                max_error: worst,
                checked: picks.len(),
            });
            start = end;
        }
    }
    Ok(())
}

/// Checks the stage-1 chain (E_m, bank, decoder), the KL chain (E_a) and
/// the expression chain (extractor, identity embeddings) on one random
/// instance. `per_tensor` limits the coordinates checked per tensor.
pub fn check_model(
    model: &MotionModel,
    face: &FaceModel,
    seed: u64,
    tolerance: f64,
    per_tensor: Option<usize>,
) -> Result<ModelGradReport> {
    let inst = GradInstance::random(model, face, seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    let mut tensors = Vec::new();
    check_groups(
        model,
        &[ParamGroup::MotionEncoder, ParamGroup::MotionSpace, ParamGroup::Decoder],
        &|m, g| motion_sample_loss(m, &inst.clip, g),
        tolerance,
        per_tensor,
        &mut rng,
        &mut tensors,
    )?;
    check_groups(
        model,
        &[ParamGroup::AudioEncoder],
        &|m, g| audio_sample_loss(m, &inst.audio, &inst.visual, g),
        tolerance,
        per_tensor,
        &mut rng,
        &mut tensors,
    )?;
    let subject = inst.frame.subject;
    let mut identity_rows = Vec::new();
    check_groups(
        model,
        &[ParamGroup::Extractor, ParamGroup::Identity],
        &|m, g| expression_sample_loss(m, face, &inst.frame, g),
        tolerance,
        per_tensor,
        &mut rng,
        &mut identity_rows,
    )?;
    // untouched identity rows have zero gradient on both sides; keep only
    // the row this instance exercises
    let own = format!("{}/subject{subject}", ParamGroup::Identity);
    identity_rows.retain(|t| !t.name.starts_with("identity/") || t.name == own);
    tensors.extend(identity_rows);

    let max_error = tensors.iter().map(|t| t.max_error).fold(0.0, f64::max);
    Ok(ModelGradReport {
        tensors,
        tolerance,
        max_error,
        passed: max_error <= tolerance,
    })
}
