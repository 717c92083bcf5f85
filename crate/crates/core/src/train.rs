//! Three-stage training: motion space (E_m, bank, decoder), audio alignment
//! (E_a against frozen visual weights) and expression extraction.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::checkpoint::Checkpoint;
use crate::config::{TrainConfig, STAGES};
use crate::encoders::{expression_input, weights_from_logits, AudioClipFeature};
use crate::error::{Error, Result};
use crate::face::{
    expression_loss, project_landmarks, ExpressionCoeff, ExpressionTarget, FaceModel, IdentityCoeff, Point2,
};
use crate::model::{MotionModel, ParamGroup};
use crate::motion_space::{basis_loss, kl_loss, l1_loss, BasisWeights, MotionFeature};
use crate::nn::Momentum;
use crate::pose::{clip_to_offsets, OffsetClip, PoseFrame};
use crate::synth::Corpus;

const STAGE_NAMES: [&str; STAGES] = ["stage1", "stage2", "stage3"];
const SHUFFLE_SALT: [u64; STAGES] = [0x51a6_e001, 0x51a6_e002, 0x51a6_e003];

/// Parameter groups updated by each stage.
pub fn stage_groups(stage: usize) -> &'static [ParamGroup] {
    match stage {
        0 => &[ParamGroup::MotionSpace, ParamGroup::MotionEncoder, ParamGroup::Decoder],
        1 => &[ParamGroup::AudioEncoder],
        _ => &[ParamGroup::Extractor, ParamGroup::Identity],
    }
}

/// Per-group gradients; groups a loss does not touch are absent.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ModelGrads {
    pub groups: HashMap<ParamGroup, Vec<f64>>,
}

impl ModelGrads {
    pub fn get(&self, group: ParamGroup) -> Option<&[f64]> {
        self.groups.get(&group).map(Vec::as_slice)
    }

    /// Accumulator for `group`, created zeroed on first use.
    fn buffer(&mut self, group: ParamGroup, len: usize) -> &mut [f64] {
        self.groups.entry(group).or_insert_with(|| vec![0.0; len])
    }

    fn scale(&mut self, s: f64) {
        self.groups.values_mut().flatten().for_each(|v| *v *= s);
    }
}

/// L1 between decoded offsets and the true offsets, skipping the pinned
/// first frame. Returns the value and dL/d(decoder output).
fn decode_l1(decoded: &[f64], target: &[f64]) -> Result<(f64, Vec<f64>)> {
    let pair = l1_loss(&decoded[6..], &target[6..])?;
    let mut grad = vec![0.0; decoded.len()];
    grad[6..].copy_from_slice(&pair.grad_first);
    Ok((pair.value, grad))
}

/// Stage-1 loss of one clip:
/// `‖F − F̃‖₁ + λ_dec (‖dec(F) − x‖₁ + ‖dec(F̃) − x‖₁)`. Gradients for E_m,
/// the bank and the decoder are added into `grads`.
pub fn motion_sample_loss(model: &MotionModel, clip: &OffsetClip, grads: &mut ModelGrads) -> Result<f64> {
    let lambda = model.config.lambda_decode;
    let x = clip.flatten();
    let enc = model.motion_encoder.forward(&x)?;
    let feature = MotionFeature::new(enc.output().to_vec())?;
    let fwd = model.bank.forward(&feature)?;
    let basis = basis_loss(&feature, &fwd.reconstruction)?;

    let dec_f = model.decoder.forward(feature.values())?;
    let dec_r = model.decoder.forward(fwd.reconstruction.values())?;
    let (lf, mut gf) = decode_l1(dec_f.output(), &x)?;
    let (lr, mut gr) = decode_l1(dec_r.output(), &x)?;
    gf.iter_mut().chain(gr.iter_mut()).for_each(|g| *g *= lambda);
    let dec_acc = grads.buffer(ParamGroup::Decoder, model.decoder.param_count());
    let back_f = model.decoder.backward_accumulate(&dec_f, &gf, dec_acc)?;
    let back_r = model.decoder.backward_accumulate(&dec_r, &gr, dec_acc)?;

    let grad_recon: Vec<f64> = basis.grad_second.iter().zip(&back_r).map(|(a, b)| a + b).collect();
    let bank_grads = model.bank.backward(&fwd, &grad_recon, None)?;
    let grad_feature: Vec<f64> = basis
        .grad_first
        .iter()
        .zip(&bank_grads.query)
        .zip(&back_f)
        .map(|((a, b), c)| a + b + c)
        .collect();
    let enc_acc = grads.buffer(ParamGroup::MotionEncoder, model.motion_encoder.param_count());
    model.motion_encoder.backward_accumulate(&enc, &grad_feature, enc_acc)?;
    let bank_acc = grads.buffer(ParamGroup::MotionSpace, bank_grads.basis.len());
    bank_acc.iter_mut().zip(&bank_grads.basis).for_each(|(a, b)| *a += b);
    Ok(basis.value + lambda * (lf + lr))
}

/// `KL(w_visual ‖ w_audio)` of one clip; the E_a gradient is added into
/// `grads`.
pub fn audio_sample_loss(
    model: &MotionModel,
    audio: &AudioClipFeature,
    visual: &BasisWeights,
    grads: &mut ModelGrads,
) -> Result<f64> {
    let cache = model.audio_encoder.forward(audio.values())?;
    let kl = kl_loss(visual, &weights_from_logits(cache.output()))?;
    let acc = grads.buffer(ParamGroup::AudioEncoder, model.audio_encoder.param_count());
    model.audio_encoder.backward_accumulate(&cache, &kl.grad_logits, acc)?;
    Ok(kl.value)
}

/// Everything needed to score one frame of expression prediction.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameSample {
    pub audio_frame: Vec<f64>,
    pub subject: usize,
    pub beta: ExpressionCoeff,
    pub alpha: IdentityCoeff,
    pub pose: PoseFrame,
    pub landmarks: Vec<Point2>,
}

impl FrameSample {
    /// Builds the sample with target landmarks projected from the true
    /// expression.
    pub fn new(
        face: &FaceModel,
        focal: f64,
        audio_frame: &[f64],
        subject: usize,
        beta: ExpressionCoeff,
        alpha: IdentityCoeff,
        pose: PoseFrame,
    ) -> Result<Self> {
        let shape = face.reconstruct_shape(&alpha, &beta)?;
        let landmarks = project_landmarks(&shape, face, &pose, focal)?;
        Ok(FrameSample {
            audio_frame: audio_frame.to_vec(),
            subject,
            beta,
            alpha,
            pose,
            landmarks,
        })
    }
}

/// `L_exp` of one frame; gradients for the extractor and the identity
/// table are added into `grads`.
pub fn expression_sample_loss(
    model: &MotionModel,
    face: &FaceModel,
    sample: &FrameSample,
    grads: &mut ModelGrads,
) -> Result<f64> {
    let embedding = model.identities.embedding(sample.subject)?;
    let x = expression_input(&sample.audio_frame, embedding)?;
    let cache = model.extractor.forward(&x)?;
    let target = ExpressionTarget {
        beta: &sample.beta,
        alpha: &sample.alpha,
        pose: &sample.pose,
        landmarks: &sample.landmarks,
    };
    let loss = expression_loss(
        &ExpressionCoeff(cache.output().to_vec()),
        &target,
        face,
        model.config.lambda_ldmk,
        model.config.focal,
    )?;
    let acc = grads.buffer(ParamGroup::Extractor, model.extractor.param_count());
    let grad_input = model.extractor.backward_accumulate(&cache, &loss.grad_beta, acc)?;
    let d = model.identities.dim();
    let rows = grads.buffer(ParamGroup::Identity, model.identities.values().len());
    rows[sample.subject * d..(sample.subject + 1) * d]
        .iter_mut()
        .zip(&grad_input[crate::AUDIO_FRAME_DIM..])
        .for_each(|(a, b)| *a += b);
    Ok(loss.value)
}

/// Mean and end-of-stage values of a stage's full-training-set loss.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StageSummary {
    pub stage: usize,
    pub initial: f64,
    pub final_loss: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossRecord {
    pub stage: usize,
    pub step: usize,
    pub loss: f64,
}

/// Momentum buffers, one per parameter group.
#[derive(Debug, Clone, PartialEq)]
pub struct Velocities {
    pub buffers: Vec<(ParamGroup, Momentum)>,
}

impl Velocities {
    pub fn zeros(model: &MotionModel) -> Self {
        Velocities {
            buffers: ParamGroup::ALL
                .iter()
                .map(|g| (*g, Momentum::new(model.params(*g).len())))
                .collect(),
        }
    }

    pub fn get(&self, group: ParamGroup) -> &Momentum {
        &self.buffers.iter().find(|(g, _)| *g == group).expect("all groups present").1
    }

    fn get_mut(&mut self, group: ParamGroup) -> &mut Momentum {
        &mut self.buffers.iter_mut().find(|(g, _)| *g == group).expect("all groups present").1
    }
}

/// Where training stands; everything besides the model needed to resume.
#[derive(Debug, Clone, PartialEq)]
pub struct Progress {
    /// Current stage index, `STAGES` once finished.
    pub stage: usize,
    /// Steps completed in the current stage.
    pub step: usize,
    pub velocities: Velocities,
    pub summaries: Vec<StageSummary>,
    pub history: Vec<LossRecord>,
}

impl Progress {
    pub fn start(model: &MotionModel) -> Self {
        Progress {
            stage: 0,
            step: 0,
            velocities: Velocities::zeros(model),
            summaries: Vec::new(),
            history: Vec::new(),
        }
    }

    pub fn finished(&self) -> bool {
        self.stage >= STAGES
    }

    pub fn summary(&self, stage: usize) -> Option<&StageSummary> {
        self.summaries.iter().find(|s| s.stage == stage)
    }
}

/// Drives training over a corpus; every batch is a pure function of
/// (seed, stage, step), so a resumed run repeats the uninterrupted one.
pub struct Trainer<'a> {
    corpus: &'a Corpus,
    face: FaceModel,
    train_clips: Vec<usize>,
    held_clips: Vec<usize>,
    offsets: Vec<OffsetClip>,
    checkpoint: Checkpoint,
    visual_targets: Option<Vec<BasisWeights>>,
    frames: Option<Vec<FrameSample>>,
    order: Option<(usize, usize, Vec<usize>)>,
}

impl<'a> Trainer<'a> {
    pub fn new(corpus: &'a Corpus, config: &TrainConfig) -> Result<Self> {
        Self::check_corpus(corpus, config)?;
        let model = MotionModel::init(config, corpus.subjects(), corpus.expression_dim())?;
        let progress = Progress::start(&model);
        Self::build(corpus, Checkpoint { model, progress })
    }

    /// Continues from a checkpoint. `config`, when given, replaces the step
    /// counts and schedules; it must describe the same architecture, seed
    /// and split.
    pub fn resume(corpus: &'a Corpus, mut checkpoint: Checkpoint, config: Option<&TrainConfig>) -> Result<Self> {
        if let Some(cfg) = config {
            cfg.validate()?;
            if !cfg.compatible_with(&checkpoint.model.config) {
                return Err(Error::Config(
                    "config differs from the checkpoint in architecture, seed, batch size or split".into(),
                ));
            }
            let mut merged = cfg.clone();
            merged.kappa = checkpoint.model.config.kappa;
            checkpoint.model.config = merged;
        }
        Self::check_corpus(corpus, &checkpoint.model.config)?;
        if checkpoint.model.identities.subjects() != corpus.subjects()
            || checkpoint.model.expression_dim() != corpus.expression_dim()
        {
            return Err(Error::Config("checkpoint does not match the corpus subjects or expression size".into()));
        }
        Self::build(corpus, checkpoint)
    }

    fn check_corpus(corpus: &Corpus, config: &TrainConfig) -> Result<()> {
        config.validate()?;
        if corpus.clips.is_empty() {
            return Err(Error::Empty("corpus has no clips".into()));
        }
        if corpus.clip_len != config.clip_len {
            return Err(Error::Config(format!(
                "corpus clips have {} frames, config t = {}",
                corpus.clip_len, config.clip_len
            )));
        }
        Ok(())
    }

    fn build(corpus: &'a Corpus, checkpoint: Checkpoint) -> Result<Self> {
        checkpoint.model.check_consistency()?;
        let face = FaceModel::builtin();
        if corpus.expression_dim() != face.expression_dim() {
            return Err(Error::shape("corpus expression size", face.expression_dim(), corpus.expression_dim()));
        }
        if let Some(id) = corpus.identities.iter().find(|a| a.0.len() != face.identity_dim()) {
            return Err(Error::shape("corpus identity size", face.identity_dim(), id.0.len()));
        }
        let cfg = &checkpoint.model.config;
        let (train_clips, held_clips) = corpus.split(cfg.train_fraction, cfg.seed);
        let offsets = corpus.clips.iter().map(|c| clip_to_offsets(&c.pose)).collect();
        Ok(Trainer {
            corpus,
            face,
            train_clips,
            held_clips,
            offsets,
            checkpoint,
            visual_targets: None,
            frames: None,
            order: None,
        })
    }

    pub fn checkpoint(&self) -> &Checkpoint {
        &self.checkpoint
    }

    pub fn into_checkpoint(self) -> Checkpoint {
        self.checkpoint
    }

    pub fn model(&self) -> &MotionModel {
        &self.checkpoint.model
    }

    pub fn train_indices(&self) -> &[usize] {
        &self.train_clips
    }

    pub fn held_out_indices(&self) -> &[usize] {
        &self.held_clips
    }

    pub fn face(&self) -> &FaceModel {
        &self.face
    }

    pub fn offsets(&self, clip: usize) -> &OffsetClip {
        &self.offsets[clip]
    }

    pub fn finished(&self) -> bool {
        self.checkpoint.progress.finished()
    }

    fn ensure_targets(&mut self, stage: usize) -> Result<()> {
        if stage == 1 && self.visual_targets.is_none() {
            let model = &self.checkpoint.model;
            let targets = self
                .offsets
                .iter()
                .map(|o| model.visual_weights(o))
                .collect::<Result<Vec<_>>>()?;
            self.visual_targets = Some(targets);
        }
        if stage == 2 && self.frames.is_none() {
            let focal = self.checkpoint.model.config.focal;
            let mut frames = Vec::new();
            for &c in &self.train_clips {
                let clip = &self.corpus.clips[c];
                for f in 0..self.corpus.clip_len {
                    frames.push(FrameSample::new(
                        &self.face,
                        focal,
                        clip.audio.frame(f),
                        clip.subject,
                        clip.expressions[f].clone(),
                        self.corpus.identities[clip.subject].clone(),
                        clip.pose.frames[f],
                    )?);
                }
            }
            self.frames = Some(frames);
        }
        Ok(())
    }

    fn item_count(&self, stage: usize) -> usize {
        match stage {
            2 => self.frames.as_ref().map_or(0, Vec::len),
            _ => self.train_clips.len(),
        }
    }

    fn item_loss(&self, stage: usize, item: usize, grads: &mut ModelGrads) -> Result<f64> {
        let model = &self.checkpoint.model;
        match stage {
            0 => motion_sample_loss(model, &self.offsets[self.train_clips[item]], grads),
            1 => {
                let c = self.train_clips[item];
                let target = &self.visual_targets.as_ref().expect("targets built")[c];
                audio_sample_loss(model, &self.corpus.clips[c].audio, target, grads)
            }
            _ => expression_sample_loss(model, &self.face, &self.frames.as_ref().expect("frames built")[item], grads),
        }
    }

    /// Mean loss of `stage` over its whole training set at the current
    /// parameters.
    pub fn evaluate(&mut self, stage: usize) -> Result<f64> {
        self.ensure_targets(stage)?;
        let n = self.item_count(stage);
        let mut total = 0.0;
        let mut scratch = ModelGrads::default();
        for i in 0..n {
            let value = if stage == 0 {
                let model = &self.checkpoint.model;
                let f = model.encode(&self.offsets[self.train_clips[i]])?;
                let fwd = model.bank.forward(&f)?;
                basis_loss(&f, &fwd.reconstruction)?.value
            } else {
                self.item_loss(stage, i, &mut scratch)?
            };
            total += value;
        }
        Ok(total / n as f64)
    }

    fn batch_items(&mut self, stage: usize, step: usize) -> Vec<usize> {
        let n = self.item_count(stage);
        let b = self.checkpoint.model.config.batch_size.min(n);
        let seed = self.checkpoint.model.config.seed ^ SHUFFLE_SALT[stage];
        (step * b..(step + 1) * b)
            .map(|p| {
                let epoch = p / n;
                let fresh = !matches!(&self.order, Some((s, e, _)) if *s == stage && *e == epoch);
                if fresh {
                    let mut perm: Vec<usize> = (0..n).collect();
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    rng.set_stream(epoch as u64);
                    perm.shuffle(&mut rng);
                    self.order = Some((stage, epoch, perm));
                }
                self.order.as_ref().expect("order set").2[p % n]
            })
            .collect()
    }

    /// Performs one optimizer step, handling stage boundaries. Returns
    /// `false` once every stage is complete.
    pub fn step(&mut self) -> Result<bool> {
        loop {
            let progress = &self.checkpoint.progress;
            if progress.finished() {
                return Ok(false);
            }
            let stage = progress.stage;
            let total = self.checkpoint.model.config.steps[stage];
            if progress.step >= total {
                self.finish_stage(stage)?;
                continue;
            }
            if progress.step == 0 && progress.summary(stage).is_none() {
                let initial = self.evaluate(stage)?;
                self.checkpoint.progress.summaries.push(StageSummary {
                    stage,
                    initial,
                    final_loss: None,
                });
            }
            self.ensure_targets(stage)?;
            self.optimize(stage)?;
            return Ok(true);
        }
    }

    fn finish_stage(&mut self, stage: usize) -> Result<()> {
        if self.checkpoint.model.config.steps[stage] > 0 {
            let value = self.evaluate(stage)?;
            if !value.is_finite() {
                return Err(Error::Diverged {
                    stage: STAGE_NAMES[stage],
                    step: self.checkpoint.progress.step,
                });
            }
            if let Some(s) = self.checkpoint.progress.summaries.iter_mut().find(|s| s.stage == stage) {
                s.final_loss = Some(value);
            }
        }
        let p = &mut self.checkpoint.progress;
        p.stage += 1;
        p.step = 0;
        Ok(())
    }

    fn optimize(&mut self, stage: usize) -> Result<()> {
        let step = self.checkpoint.progress.step;
        let items = self.batch_items(stage, step);
        let mut grads = ModelGrads::default();
        let mut loss = 0.0;
        for &i in &items {
            loss += self.item_loss(stage, i, &mut grads)?;
        }
        let scale = 1.0 / items.len() as f64;
        loss *= scale;
        grads.scale(scale);
        let diverged = Error::Diverged {
            stage: STAGE_NAMES[stage],
            step,
        };
        if !loss.is_finite() {
            return Err(diverged);
        }

        let cfg = &self.checkpoint.model.config;
        let lr = cfg.schedules[stage].rate(step);
        let momentum = cfg.momentum;
        let log = step.is_multiple_of(cfg.log_every) || step + 1 == cfg.steps[stage];
        let Checkpoint { model, progress } = &mut self.checkpoint;
        for &group in stage_groups(stage) {
            if let Some(g) = grads.get(group) {
                progress.velocities.get_mut(group).step(model.params_mut(group), g, lr, momentum);
            }
            if model.params(group).iter().any(|v| !v.is_finite()) {
                return Err(diverged);
            }
        }
        if stage == 0 {
            let degenerate = (0..model.bank.size()).any(|i| {
                let n = crate::motion_space::norm(model.bank.basis(i));
                !n.is_finite() || n <= crate::motion_space::MIN_NORM
            });
            if degenerate {
                return Err(diverged);
            }
            model.bank.renormalize();
        }
        if log {
            progress.history.push(LossRecord { stage, step, loss });
        }
        progress.step += 1;
        Ok(())
    }

    /// Runs at most `max_steps` further steps; returns the number taken.
    pub fn run_steps(&mut self, max_steps: usize) -> Result<usize> {
        let mut taken = 0;
        while taken < max_steps && self.step()? {
            taken += 1;
        }
        Ok(taken)
    }

    /// Trains every remaining stage to completion.
    pub fn run(&mut self) -> Result<()> {
        while self.step()? {}
        Ok(())
    }
}

/// Trains from scratch through all three stages.
pub fn train(corpus: &Corpus, config: &TrainConfig) -> Result<Checkpoint> {
    let mut trainer = Trainer::new(corpus, config)?;
    trainer.run()?;
    Ok(trainer.into_checkpoint())
}

/// Fraction of `clips` whose audio-predicted argmax basis equals the
/// visual argmax basis.
pub fn alignment_accuracy(model: &MotionModel, corpus: &Corpus, clips: &[usize]) -> Result<f64> {
    if clips.is_empty() {
        return Err(Error::Empty("no clips to evaluate".into()));
    }
    let mut hits = 0usize;
    for &c in clips {
        let clip = &corpus.clips[c];
        let visual = model.visual_weights(&clip_to_offsets(&clip.pose))?;
        let audio = model.audio_weights(&clip.audio)?;
        if visual.argmax() == audio.argmax() {
            hits += 1;
        }
    }
    Ok(hits as f64 / clips.len() as f64)
}

/// Mean absolute error of the Euler offsets of decode(encode(x)) against x,
/// over every frame of `clips`.
pub fn autoencode_mae(model: &MotionModel, corpus: &Corpus, clips: &[usize]) -> Result<f64> {
    if clips.is_empty() {
        return Err(Error::Empty("no clips to evaluate".into()));
    }
    let mut total = 0.0;
    let mut count = 0usize;
    for &c in clips {
        let truth = clip_to_offsets(&corpus.clips[c].pose);
        let decoded = model.autoencode(&truth)?;
        for (a, b) in decoded.offsets().iter().zip(truth.offsets()) {
            total += (0..3).map(|k| (a[k] - b[k]).abs()).sum::<f64>();
            count += 3;
        }
    }
    Ok(total / count as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{synth_dataset, MotionClass, SynthConfig};

    fn corpus(clips: usize) -> Corpus {
        synth_dataset(&SynthConfig {
            classes: vec![MotionClass::Nod, MotionClass::Shake],
            subjects: 2,
            clips_per_class: clips,
            ..SynthConfig::default()
        })
        .unwrap()
    }

    fn tiny(steps: [usize; 3]) -> TrainConfig {
        TrainConfig {
            basis_count: 3,
            feature_dim: 6,
            hidden: 8,
            identity_dim: 2,
            batch_size: 4,
            steps,
            log_every: 1,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn stages_run_in_order_and_record_summaries() {
        let corpus = corpus(4);
        let ckpt = train(&corpus, &tiny([3, 2, 2])).unwrap();
        let p = &ckpt.progress;
        assert!(p.finished());
        assert_eq!(p.summaries.iter().map(|s| s.stage).collect::<Vec<_>>(), vec![0, 1, 2]);
        assert!(p.summaries.iter().all(|s| s.final_loss.is_some()));
        assert_eq!(p.history.len(), 7);
        assert_eq!((p.history[3].stage, p.history[3].step), (1, 0));
    }

    #[test]
    fn stage_freezing() {
        let corpus = corpus(3);
        let cfg = tiny([0, 4, 0]);
        let start = MotionModel::init(&cfg, corpus.subjects(), corpus.expression_dim()).unwrap();
        let done = train(&corpus, &cfg).unwrap().model;
        assert_eq!(start.bank, done.bank);
        assert_eq!(start.motion_encoder, done.motion_encoder);
        assert_eq!(start.extractor, done.extractor);
        assert_ne!(start.audio_encoder, done.audio_encoder);
    }

    #[test]
    fn divergence_names_the_stage() {
        let corpus = corpus(3);
        let mut cfg = tiny([50, 0, 0]);
        cfg.schedules[0].lr = 1e300;
        cfg.schedules[0].min_lr = 1e300;
        match train(&corpus, &cfg) {
            Err(Error::Diverged { stage, .. }) => assert_eq!(stage, "stage1"),
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn resume_matches_uninterrupted() {
        let corpus = corpus(4);
        let cfg = tiny([5, 4, 3]);
        let full = train(&corpus, &cfg).unwrap();
        for cut in [2, 5, 7, 11] {
            let mut first = Trainer::new(&corpus, &cfg).unwrap();
            first.run_steps(cut).unwrap();
            let mut second = Trainer::resume(&corpus, first.into_checkpoint(), None).unwrap();
            second.run().unwrap();
            assert_eq!(second.into_checkpoint(), full, "cut at {cut}");
        }
    }

    #[test]
    fn mismatched_clip_length_is_rejected() {
        let corpus = corpus(2);
        let mut cfg = tiny([1, 1, 1]);
        cfg.clip_len = 4;
        assert!(matches!(Trainer::new(&corpus, &cfg), Err(Error::Config(_))));
    }
}
