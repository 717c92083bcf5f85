//! End-to-end acceptance checks. Each test prints one PASS/FAIL line to
//! stdout (bypassing capture) and fails when its criterion is not met.

use std::io::Write;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use motionspace::checkpoint::{format_checkpoint, parse_checkpoint};
use motionspace::config::{LrSchedule, TrainConfig};
use motionspace::encoders::AudioClipFeature;
use motionspace::face::{
    expression_loss, landmark_loss, ExpressionCoeff, ExpressionTarget, FaceModel, WEIGHT_EMPHASIS, WEIGHT_REGULAR,
};
use motionspace::gradcheck::check_model;
use motionspace::metrics::{channel_std, diversity_metric};
use motionspace::model::ParamGroup;
use motionspace::motion_space::MotionFeature;
use motionspace::nn::Momentum;
use motionspace::pose::{clip_to_offsets, OffsetClip, PoseFrame};
use motionspace::sampler::{sample_ball, sample_motion, sample_rng, stitch_clips, SampleConfig};
use motionspace::synth::{synth_dataset, Corpus, MotionClass, SynthConfig};
use motionspace::train::{
    alignment_accuracy, autoencode_mae, expression_sample_loss, stage_groups, FrameSample, ModelGrads,
};
use motionspace::{Checkpoint, MotionModel, Trainer};

const SYNTH_SEED: u64 = 1;
const INITIAL: ([f64; 3], [f64; 3]) = ([0.0; 3], [0.0, 0.0, 5.0]);

fn report(id: usize, name: &str, pass: bool, detail: &str) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    let line = format!("criterion {id} {name}: {verdict} ({detail})\n");
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(line.as_bytes());
    let _ = out.flush();
    assert!(pass, "criterion {id} {name} failed: {detail}");
}

fn initial() -> PoseFrame {
    PoseFrame::new(INITIAL.0, INITIAL.1).unwrap()
}

fn corpus() -> &'static Corpus {
    static CORPUS: OnceLock<Corpus> = OnceLock::new();
    CORPUS.get_or_init(|| {
        synth_dataset(&SynthConfig {
            seed: SYNTH_SEED,
            ..SynthConfig::default()
        })
        .unwrap()
    })
}

struct Trained {
    checkpoint: Checkpoint,
    train: Vec<usize>,
    held_out: Vec<usize>,
    stage1_time: Duration,
    total_time: Duration,
}

fn trained() -> &'static Trained {
    static TRAINED: OnceLock<Trained> = OnceLock::new();
    TRAINED.get_or_init(|| {
        let cfg = TrainConfig::default();
        let start = Instant::now();
        let mut trainer = Trainer::new(corpus(), &cfg).unwrap();
        trainer.run_steps(cfg.steps[0]).unwrap();
        let stage1_time = start.elapsed();
        trainer.run().unwrap();
        Trained {
            train: trainer.train_indices().to_vec(),
            held_out: trainer.held_out_indices().to_vec(),
            checkpoint: trainer.into_checkpoint(),
            stage1_time,
            total_time: start.elapsed(),
        }
    })
}

fn model() -> &'static MotionModel {
    &trained().checkpoint.model
}

fn held_out_audio(count: usize) -> Vec<AudioClipFeature> {
    trained()
        .held_out
        .iter()
        .take(count)
        .map(|&c| corpus().clips[c].audio.clone())
        .collect()
}

#[test]
fn criterion_1_gradients() {
    let face = FaceModel::builtin();
    let start = Instant::now();
    let instances = 100u64;
    let mut worst = 0.0f64;
    let mut worst_tensor = String::new();
    let mut failures = 0usize;
    let mut checked = 0usize;
    for seed in 0..instances {
        let cfg = TrainConfig {
            basis_count: 4,
            feature_dim: 6,
            clip_len: 4,
            hidden: 5,
            identity_dim: 3,
            seed,
            ..TrainConfig::default()
        };
        let mut m = MotionModel::init(&cfg, 3, face.expression_dim()).unwrap();
        // E_a starts with a zero output layer; perturb it so every weight matters
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
        for p in m.params_mut(ParamGroup::AudioEncoder) {
            *p = 0.2 * rng.sample::<f64, _>(StandardNormal);
        }
        let r = check_model(&m, &face, seed, 1e-4, None).unwrap();
        checked += r.tensors.iter().map(|t| t.checked).sum::<usize>();
        if !r.passed {
            failures += 1;
        }
        for t in &r.tensors {
            if t.max_error > worst {
                worst = t.max_error;
                worst_tensor = t.name.clone();
            }
        }
    }
    let elapsed = start.elapsed();
    let pass = failures == 0 && elapsed < Duration::from_secs(60);
    report(
        1,
        "gradients",
        pass,
        &format!(
            "{instances} instances, {checked} coordinates, max rel err {worst:.2e} at {worst_tensor}, \
             {failures} failing, {:.1}s",
            elapsed.as_secs_f64()
        ),
    );
}

#[test]
fn criterion_2_motion_space() {
    let t = trained();
    let s = t.checkpoint.progress.summary(0).unwrap();
    let final_loss = s.final_loss.unwrap();
    let ratio = final_loss / s.initial;
    let classes = SynthConfig::default().classes.len();
    let steps = t.checkpoint.model.config.steps[0];
    let pass = corpus().clips.len() >= 200
        && classes >= 4
        && steps <= 10_000
        && ratio < 0.1
        && t.stage1_time < Duration::from_secs(300);
    report(
        2,
        "motion space",
        pass,
        &format!(
            "{} clips, {classes} classes, L_basis {:.4e} -> {final_loss:.4e} (ratio {ratio:.4}) in {steps} steps, \
             stage 1 {:.1}s, all stages {:.1}s",
            corpus().clips.len(),
            s.initial,
            t.stage1_time.as_secs_f64(),
            t.total_time.as_secs_f64()
        ),
    );
}

#[test]
fn criterion_3_alignment() {
    let t = trained();
    let s = t.checkpoint.progress.summary(1).unwrap();
    let final_loss = s.final_loss.unwrap();
    let ratio = final_loss / s.initial;
    let acc = alignment_accuracy(model(), corpus(), &t.held_out).unwrap();
    let train_acc = alignment_accuracy(model(), corpus(), &t.train).unwrap();
    let pass = ratio < 0.1 && acc >= 0.9;
    report(
        3,
        "alignment",
        pass,
        &format!(
            "KL {:.4e} -> {final_loss:.4e} (ratio {ratio:.2e}), held-out agreement {acc:.3} over {} clips, \
             train {train_acc:.3}",
            s.initial,
            t.held_out.len()
        ),
    );
}

#[test]
fn criterion_4_one_to_many() {
    let m = model();
    // every sampled feature lies inside the ball, compared exactly
    let mut features = 0usize;
    let mut outside = 0usize;
    for audio in held_out_audio(usize::MAX) {
        let center = m.center(&audio).unwrap();
        for (seed, eps) in [(0u64, 0.0), (1, 0.1), (2, 1.0), (3, 3.0)] {
            for f in sample_motion(&center, &SampleConfig::new(eps, seed, 20).unwrap()) {
                let d: Vec<f64> = f.values().iter().zip(center.values()).map(|(a, b)| a - b).collect();
                let d_finite = d.iter().all(|v| v.is_finite());
                if MotionFeature::new(d).unwrap().norm() > eps || !d_finite {
                    outside += 1;
                }
                features += 1;
            }
        }
    }

    let audio = held_out_audio(4);
    let zero = m
        .sample_trajectories(&audio, &SampleConfig::new(0.0, 11, 8).unwrap(), initial())
        .unwrap();
    let identical = zero.iter().all(|s| s == &zero[0]);

    let mean_diversity = |eps: f64| -> f64 {
        let total: f64 = (0..50u64)
            .map(|seed| {
                let s = m
                    .sample_trajectories(&audio, &SampleConfig::new(eps, seed, 1).unwrap(), initial())
                    .unwrap();
                diversity_metric(&s).unwrap()
            })
            .sum();
        total / 50.0
    };
    let d_small = mean_diversity(0.1);
    let d_large = mean_diversity(1.0);
    let d_zero = diversity_metric(&zero[..1]).unwrap();
    let pass = outside == 0 && identical && d_large > d_small;
    report(
        4,
        "one-to-many",
        pass,
        &format!(
            "{features} features, {outside} outside the ball; eps=0 samples identical: {identical}; \
             mean diversity over 50 seeds eps=1.0 {d_large:.5} vs eps=0.1 {d_small:.5} (eps=0 {d_zero:.5})"
        ),
    );
}

#[test]
fn criterion_5_stitching() {
    let m = model();
    let t = m.clip_len();
    let mut problems = Vec::new();
    let mut trajectories = 0usize;
    for n in 1..=6usize {
        let audio = held_out_audio(n);
        let cfg = SampleConfig::new(1.0, 40 + n as u64, 3).unwrap();
        let samples = m.sample_trajectories(&audio, &cfg, initial()).unwrap();
        for (j, traj) in samples.iter().enumerate() {
            trajectories += 1;
            if traj.len() != t + (n - 1) * (t - 1) {
                problems.push(format!("n={n} sample {j}: length {}", traj.len()));
            }
            if traj[0] != initial() {
                problems.push(format!("n={n} sample {j}: first frame moved"));
            }
            // rebuild each segment from its anchor and the decoded offsets
            let mut rng = sample_rng(cfg.seed, j as u64);
            for (k, a) in audio.iter().enumerate() {
                let clip = m.decode(&sample_ball(&m.center(a).unwrap(), cfg.epsilon, &mut rng)).unwrap();
                let anchor = traj[k * (t - 1)].to_vec6();
                for (i, off) in clip.offsets().iter().enumerate() {
                    let v: [f64; 6] = std::array::from_fn(|c| anchor[c] + off[c]);
                    if traj[k * (t - 1) + i] != PoseFrame::from_vec6_wrapped(v).unwrap() {
                        problems.push(format!("n={n} sample {j}: clip {k} frame {i} off its anchor"));
                    }
                }
            }
        }
    }
    // hand-sized offsets: the boundary frame is the initial pose plus the
    // first clip's final offset
    let a = OffsetClip::new(vec![[0.0; 6], [0.1, 0.0, 0.0, 0.0, 0.0, 0.0], [0.25, 0.0, 0.0, 0.0, 0.5, 0.0]]).unwrap();
    let b = OffsetClip::new(vec![[0.0; 6], [0.0, 0.2, 0.0, 0.0, 0.0, 0.0], [0.0, 0.5, 0.0, 0.0, 0.0, 1.0]]).unwrap();
    let s = stitch_clips(&[a, b], initial()).unwrap();
    let hand_ok = s.len() == 5
        && s[2] == PoseFrame::new([0.25, 0.0, 0.0], [0.0, 0.5, 5.0]).unwrap()
        && s[4] == PoseFrame::new([0.25, 0.5, 0.0], [0.0, 0.5, 6.0]).unwrap();
    if !hand_ok {
        problems.push("hand case mismatch".into());
    }
    report(
        5,
        "stitching",
        problems.is_empty(),
        &if problems.is_empty() {
            format!("{trajectories} sampled trajectories with n = 1..6 clips exactly anchored, lengths t+(n-1)(t-1); hand case exact")
        } else {
            problems.join("; ")
        },
    );
}

#[test]
fn criterion_6_expression() {
    let face = FaceModel::builtin();
    let c = corpus();
    let cfg = TrainConfig::default();
    let mut m = MotionModel::init(&cfg, c.subjects(), c.expression_dim()).unwrap();
    let clip = &c.clips[0];
    let frame = 2;
    let sample = FrameSample::new(
        &face,
        cfg.focal,
        clip.audio.frame(frame),
        clip.subject,
        clip.expressions[frame].clone(),
        c.identities[clip.subject].clone(),
        clip.pose.frames[frame],
    )
    .unwrap();
    let schedule = LrSchedule {
        lr: 0.005,
        decay: 0.25,
        decay_every: 200,
        min_lr: 0.0,
    };
    let groups = stage_groups(2);
    let mut velocity: Vec<Momentum> = groups.iter().map(|&g| Momentum::new(m.params(g).len())).collect();
    let steps = 2000;
    let start = Instant::now();
    let mut initial_loss = None;
    for step in 0..steps {
        let mut grads = ModelGrads::default();
        let loss = expression_sample_loss(&m, &face, &sample, &mut grads).unwrap();
        initial_loss.get_or_insert(loss);
        let lr = schedule.rate(step);
        for (v, &g) in velocity.iter_mut().zip(groups) {
            let grad = grads.get(g).unwrap().to_vec();
            v.step(m.params_mut(g), &grad, lr, cfg.momentum);
        }
    }
    let predicted = m.expression(&sample.audio_frame, sample.subject).unwrap();
    let target = ExpressionTarget {
        beta: &sample.beta,
        alpha: &sample.alpha,
        pose: &sample.pose,
        landmarks: &sample.landmarks,
    };
    let l_exp = expression_loss(&predicted, &target, &face, cfg.lambda_ldmk, cfg.focal).unwrap();

    // N=2, omega=(1,20), squared offsets 1 and 0.25
    let hand = landmark_loss(
        &[[1.0, 0.0], [0.0, 0.5]],
        &[[0.0, 0.0], [0.0, 0.0]],
        &[WEIGHT_REGULAR, WEIGHT_EMPHASIS],
    )
    .unwrap()
    .value;
    let zero = ExpressionCoeff(vec![0.0; face.expression_dim()]);
    let at_zero = expression_loss(&zero, &target, &face, cfg.lambda_ldmk, cfg.focal).unwrap();
    // the same through the trainer on a one-clip corpus (t frame samples)
    let single = synth_dataset(&SynthConfig {
        classes: vec![MotionClass::Nod],
        subjects: 1,
        clips_per_class: 1,
        seed: SYNTH_SEED,
        ..SynthConfig::default()
    })
    .unwrap();
    let mut stage3 = TrainConfig {
        steps: [0, 0, steps],
        train_fraction: 1.0,
        ..TrainConfig::default()
    };
    stage3.schedules[2] = schedule;
    let mut trainer = Trainer::new(&single, &stage3).unwrap();
    trainer.run().unwrap();
    let corpus_loss = trainer.evaluate(2).unwrap();

    let pass = l_exp.value < 1e-4 && corpus_loss < 1e-4 && hand == 3.0 && at_zero.value > 0.0;
    report(
        6,
        "expression",
        pass,
        &format!(
            "one sample, {steps} steps: L_exp {:.4e} -> {:.3e} (l2 {:.2e}, ldmk {:.2e}), {:.2}s; \
             one-clip corpus via trainer: mean L_exp {corpus_loss:.3e}; weighted N=2 landmark case = {hand}",
            initial_loss.unwrap(),
            l_exp.value,
            l_exp.l2,
            l_exp.landmark,
            start.elapsed().as_secs_f64()
        ),
    );
}

#[test]
fn criterion_7_decodability() {
    let t = trained();
    let mae = autoencode_mae(model(), corpus(), &t.held_out).unwrap();
    let train_mae = autoencode_mae(model(), corpus(), &t.train).unwrap();
    report(
        7,
        "decodability",
        mae < 0.05,
        &format!(
            "held-out autoencode MAE {mae:.5} rad over {} clips (train {train_mae:.5})",
            t.held_out.len()
        ),
    );
}

fn all_params(m: &MotionModel) -> Vec<Vec<f64>> {
    ParamGroup::ALL.iter().map(|&g| m.params(g).to_vec()).collect()
}

#[test]
fn criterion_8_determinism() {
    let t = trained();
    let reference = format_checkpoint(&t.checkpoint);

    // a second full run from the same seeds
    let mut again = Trainer::new(corpus(), &TrainConfig::default()).unwrap();
    again.run().unwrap();
    let same_checkpoint = format_checkpoint(again.checkpoint()) == reference;

    // samples from the in-memory and the reloaded model
    let reloaded = parse_checkpoint(&reference, "reference").unwrap();
    let same_text = format_checkpoint(&reloaded) == reference;
    let audio = held_out_audio(3);
    let cfg = SampleConfig::new(1.0, 123, 6).unwrap();
    let a = model().sample_trajectories(&audio, &cfg, initial()).unwrap();
    let b = reloaded.model.sample_trajectories(&audio, &cfg, initial()).unwrap();
    let c = model().sample_trajectories(&audio, &cfg, initial()).unwrap();
    let same_samples = a == b && a == c;

    // resume matches step for step across every stage boundary
    let small = TrainConfig {
        steps: [60, 40, 30],
        ..TrainConfig::default()
    };
    let total: usize = small.steps.iter().sum();
    let mut diverging = Vec::new();
    for cut in [1usize, 37, 60, 61, 99, 100, 115] {
        let mut straight = Trainer::new(corpus(), &small).unwrap();
        let mut first = Trainer::new(corpus(), &small).unwrap();
        first.run_steps(cut).unwrap();
        straight.run_steps(cut).unwrap();
        let text = format_checkpoint(first.checkpoint());
        let mut resumed = Trainer::resume(corpus(), parse_checkpoint(&text, "cut").unwrap(), None).unwrap();
        for step in cut..total {
            straight.run_steps(1).unwrap();
            resumed.run_steps(1).unwrap();
            if all_params(straight.model()) != all_params(resumed.model()) {
                diverging.push(format!("cut {cut} step {step}"));
                break;
            }
        }
        if format_checkpoint(straight.checkpoint()) != format_checkpoint(resumed.checkpoint()) {
            diverging.push(format!("cut {cut} final checkpoint"));
        }
    }
    let pass = same_checkpoint && same_text && same_samples && diverging.is_empty();
    report(
        8,
        "determinism",
        pass,
        &format!(
            "rerun checkpoint identical: {same_checkpoint}; reload round trip identical: {same_text}; \
             samples identical: {same_samples}; resume at 7 cuts step-for-step: {}",
            if diverging.is_empty() { "identical".to_string() } else { diverging.join(", ") }
        ),
    );
}

#[test]
fn criterion_9_interpretability() {
    let m = model();
    let c = corpus();
    let names = ["roll", "pitch", "yaw"];
    let mut matches = 0usize;
    let mut details = Vec::new();
    for class in [MotionClass::Still, MotionClass::Nod, MotionClass::Shake, MotionClass::Tilt] {
        let mut mean = vec![0.0; m.bank.size()];
        let mut count = 0usize;
        for clip in c.clips.iter().filter(|x| x.class == class) {
            let w = m.visual_weights(&clip_to_offsets(&clip.pose)).unwrap();
            mean.iter_mut().zip(w.values()).for_each(|(a, b)| *a += b);
            count += 1;
        }
        mean.iter_mut().for_each(|v| *v /= count as f64);
        let basis = (0..mean.len()).fold(0, |best, i| if mean[i] > mean[best] { i } else { best });
        let probe = m.probe(basis, initial(), 4).unwrap();
        let std = channel_std(&probe);
        let dominant = (0..3).fold(0, |best, i| if std[i] > std[best] { i } else { best });
        let hit = class.channels() == [dominant];
        if hit {
            matches += 1;
        }
        details.push(format!(
            "{class}: basis {basis} -> {} ({})",
            names[dominant],
            if hit { "match" } else { "no match" }
        ));
    }
    report(
        9,
        "interpretability",
        matches >= 3,
        &format!("{matches}/4 classes match; {}", details.join(", ")),
    );
}
