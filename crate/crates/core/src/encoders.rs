//! The task-specific views of [`SmallNet`]: motion encoder, audio weight
//! predictor and expression extractor.

use crate::error::{Error, Result};
use crate::face::ExpressionCoeff;
use crate::motion_space::{softmax_scaled, BasisWeights, MotionFeature};
use crate::nn::SmallNet;
use crate::pose::OffsetClip;
use crate::AUDIO_FRAME_DIM;

/// Flattened per-frame 16×16 audio feature blocks for one clip.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioClipFeature {
    values: Vec<f64>,
    frames: usize,
}

impl AudioClipFeature {
    pub fn new(values: Vec<f64>, frames: usize) -> Result<Self> {
        if values.len() != frames * AUDIO_FRAME_DIM {
            return Err(Error::shape("audio clip feature", frames * AUDIO_FRAME_DIM, values.len()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("audio feature has non-finite entries".into()));
        }
        Ok(AudioClipFeature { values, frames })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn frame(&self, i: usize) -> &[f64] {
        &self.values[i * AUDIO_FRAME_DIM..(i + 1) * AUDIO_FRAME_DIM]
    }
}

/// Runs the motion encoder on the flattened offsets of a clip.
pub fn encode_motion(encoder: &SmallNet, clip: &OffsetClip) -> Result<MotionFeature> {
    let x = clip.flatten();
    if x.len() != encoder.input_dim() {
        return Err(Error::shape("motion encoder input (6t)", encoder.input_dim(), x.len()));
    }
    MotionFeature::new(encoder.predict(&x)?)
}

/// Predicts basis weights from audio: logits followed by an unscaled
/// softmax.
pub fn encode_audio_weights(encoder: &SmallNet, audio: &AudioClipFeature) -> Result<BasisWeights> {
    let logits = encoder.predict(audio.values())?;
    Ok(weights_from_logits(&logits))
}

pub(crate) fn weights_from_logits(logits: &[f64]) -> BasisWeights {
    BasisWeights::new(softmax_scaled(logits, 1.0)).expect("softmax output is on the simplex")
}

/// Concatenates one audio frame with an identity embedding.
pub fn expression_input(audio_frame: &[f64], identity_embedding: &[f64]) -> Result<Vec<f64>> {
    if audio_frame.len() != AUDIO_FRAME_DIM {
        return Err(Error::shape("audio frame", AUDIO_FRAME_DIM, audio_frame.len()));
    }
    let mut x = Vec::with_capacity(AUDIO_FRAME_DIM + identity_embedding.len());
    x.extend_from_slice(audio_frame);
    x.extend_from_slice(identity_embedding);
    Ok(x)
}

pub fn extract_expression(
    extractor: &SmallNet,
    audio_frame: &[f64],
    identity_embedding: &[f64],
) -> Result<ExpressionCoeff> {
    let x = expression_input(audio_frame, identity_embedding)?;
    if x.len() != extractor.input_dim() {
        return Err(Error::shape("extractor input", extractor.input_dim(), x.len()));
    }
    Ok(ExpressionCoeff(extractor.predict(&x)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::face::FaceModel;
    use crate::nn::Momentum;
    use crate::pose::{clip_to_offsets, PoseClip, PoseFrame};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn clip(base: f64) -> PoseClip {
        let frames = (0..5)
            .map(|i| PoseFrame::new([0.0, base + 0.05 * i as f64, base], [0.0, 0.0, 5.0]).unwrap())
            .collect();
        PoseClip::new(frames, 25.0).unwrap()
    }

    #[test]
    fn motion_encoding_is_deterministic_and_shift_invariant() {
        let net = SmallNet::motion_encoder(5, 16, 8, &mut ChaCha8Rng::seed_from_u64(11)).unwrap();
        let zero = OffsetClip::new(vec![[0.0; 6]; 5]).unwrap();
        let a = encode_motion(&net, &zero).unwrap();
        let b = encode_motion(&net, &zero).unwrap();
        assert_eq!(a, b);
        let f1 = encode_motion(&net, &clip_to_offsets(&clip(0.0))).unwrap();
        let f2 = encode_motion(&net, &clip_to_offsets(&clip(0.3))).unwrap();
        for (x, y) in f1.values().iter().zip(f2.values()) {
            assert!((x - y).abs() < 1e-12);
        }
        let short = OffsetClip::new(vec![[0.0; 6]; 4]).unwrap();
        assert!(matches!(encode_motion(&net, &short), Err(Error::Shape { .. })));
    }

    #[test]
    fn zero_last_layer_gives_uniform_weights() {
        let net = SmallNet::audio_encoder(2, 8, 4, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let audio = AudioClipFeature::new(vec![0.3; 512], 2).unwrap();
        let w = encode_audio_weights(&net, &audio).unwrap();
        assert!(w.values().iter().all(|v| (*v - 0.25).abs() < 1e-15));
    }

    #[test]
    fn audio_weights_on_simplex() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut net = SmallNet::audio_encoder(1, 8, 5, &mut rng).unwrap();
        for p in net.params_mut() {
            *p = rng.random_range(-1.0..1.0);
        }
        for _ in 0..1000 {
            let v: Vec<f64> = (0..AUDIO_FRAME_DIM).map(|_| rng.random_range(-3.0..3.0)).collect();
            let w = encode_audio_weights(&net, &AudioClipFeature::new(v, 1).unwrap()).unwrap();
            let s: f64 = w.values().iter().sum();
            assert!((s - 1.0).abs() < 1e-9);
            assert!(w.values().iter().all(|x| *x >= 0.0));
        }
    }

    #[test]
    fn permuting_last_layer_rows_permutes_weights() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut net = SmallNet::audio_encoder(1, 6, 3, &mut rng).unwrap();
        for p in net.params_mut() {
            *p = rng.random_range(-1.0..1.0);
        }
        let hidden = 6;
        let first_layer = (AUDIO_FRAME_DIM + 1) * hidden;
        let mut swapped = net.clone();
        {
            let p = swapped.params_mut();
            // swap output rows 0 and 2 of layer 1 (weights then bias)
            for i in 0..hidden {
                p.swap(first_layer + i, first_layer + 2 * hidden + i);
            }
            let bias = first_layer + 3 * hidden;
            p.swap(bias, bias + 2);
        }
        let audio = AudioClipFeature::new((0..AUDIO_FRAME_DIM).map(|i| (i as f64).sin()).collect(), 1).unwrap();
        let a = encode_audio_weights(&net, &audio).unwrap();
        let b = encode_audio_weights(&swapped, &audio).unwrap();
        assert_eq!(a.values()[0], b.values()[2]);
        assert_eq!(a.values()[1], b.values()[1]);
        assert_eq!(a.values()[2], b.values()[0]);
    }

    #[test]
    fn extractor_output_matches_face_model() {
        let face = FaceModel::builtin();
        let net = SmallNet::expression_extractor(8, 16, face.expression_dim(), &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let beta = extract_expression(&net, &[0.1; AUDIO_FRAME_DIM], &[0.0; 8]).unwrap();
        assert_eq!(beta.0.len(), face.expression_dim());
        assert_eq!(beta, extract_expression(&net, &[0.1; AUDIO_FRAME_DIM], &[0.0; 8]).unwrap());
        assert!(extract_expression(&net, &[0.1; 10], &[0.0; 8]).is_err());
        assert!(extract_expression(&net, &[0.1; AUDIO_FRAME_DIM], &[0.0; 3]).is_err());
    }

    #[test]
    fn extractor_overfits_one_pair_with_l2() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let mut net = SmallNet::expression_extractor(4, 32, 16, &mut rng).unwrap();
        let audio: Vec<f64> = (0..AUDIO_FRAME_DIM).map(|_| rng.random_range(-1.0..1.0)).collect();
        let ident = [0.2, -0.1, 0.3, 0.0];
        let target: Vec<f64> = (0..16).map(|_| rng.random_range(-1.0..1.0)).collect();
        let x = expression_input(&audio, &ident).unwrap();
        let mut opt = Momentum::new(net.param_count());
        let schedule = crate::config::LrSchedule { lr: 0.005, decay: 0.25, decay_every: 200, min_lr: 0.0 };
        for step in 0..2000 {
            let cache = net.forward(&x).unwrap();
            let diff: Vec<f64> = cache.output().iter().zip(&target).map(|(a, b)| a - b).collect();
            let loss = diff.iter().map(|d| d * d).sum::<f64>().sqrt();
            let up: Vec<f64> = if loss > 0.0 { diff.iter().map(|d| d / loss).collect() } else { vec![0.0; 16] };
            let g = net.backward(&cache, &up).unwrap();
            let lr = schedule.rate(step);
            opt.step(net.params_mut(), &g.params, lr, 0.9);
        }
        let out = net.predict(&x).unwrap();
        let loss = out.iter().zip(&target).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        assert!(loss < 1e-4, "final L2 {loss}");
    }
}
