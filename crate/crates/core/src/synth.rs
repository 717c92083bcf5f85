//! Synthetic paired corpus: sinusoidal head-motion clips, class-correlated
//! audio proxies and smooth expression sequences, plus its on-disk layout.

use std::fmt::{self, Write as _};
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::encoders::AudioClipFeature;
use crate::error::{Error, Result};
use crate::face::{ExpressionCoeff, IdentityCoeff};
use crate::pose::{self, PoseClip, PoseFrame};
use crate::AUDIO_FRAME_DIM;

/// Amplitude of every synthetic sinusoid, radians.
pub const MOTION_AMPLITUDE: f64 = 0.2;
/// Period of every synthetic sinusoid, frames.
pub const MOTION_PERIOD: f64 = 20.0;
/// Depth of the synthetic head from the camera.
pub const BASE_DEPTH: f64 = 5.0;

// keep the derived streams distinct from each other
const SPLIT_SALT: u64 = 0x9e37_79b9_7f4a_7c15;
const PATTERN_SALT: u64 = 0x243f_6a88_85a3_08d3;
const MIXING_SALT: u64 = 0x1319_8a2e_0370_7344;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MotionClass {
    Still,
    Nod,
    Shake,
    Tilt,
    NodShake,
}

impl MotionClass {
    pub const ALL: [MotionClass; 5] = [
        MotionClass::Still,
        MotionClass::Nod,
        MotionClass::Shake,
        MotionClass::Tilt,
        MotionClass::NodShake,
    ];

    /// Euler channels (0 roll, 1 pitch, 2 yaw) driven by the class.
    pub fn channels(self) -> &'static [usize] {
        match self {
            MotionClass::Still => &[],
            MotionClass::Nod => &[1],
            MotionClass::Shake => &[2],
            MotionClass::Tilt => &[0],
            MotionClass::NodShake => &[1, 2],
        }
    }

    fn id(self) -> u64 {
        match self {
            MotionClass::Still => 0,
            MotionClass::Nod => 1,
            MotionClass::Shake => 2,
            MotionClass::Tilt => 3,
            MotionClass::NodShake => 4,
        }
    }
}

impl fmt::Display for MotionClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MotionClass::Still => "still",
            MotionClass::Nod => "nod",
            MotionClass::Shake => "shake",
            MotionClass::Tilt => "tilt",
            MotionClass::NodShake => "nod+shake",
        })
    }
}

impl FromStr for MotionClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        MotionClass::ALL
            .into_iter()
            .find(|c| c.to_string() == s.trim())
            .ok_or_else(|| Error::Config(format!("unknown motion class `{s}`")))
    }
}

pub fn parse_class_list(list: &str) -> Result<Vec<MotionClass>> {
    let classes = list
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(str::parse)
        .collect::<Result<Vec<_>>>()?;
    if classes.is_empty() {
        return Err(Error::Config("class list is empty".into()));
    }
    Ok(classes)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub classes: Vec<MotionClass>,
    pub subjects: usize,
    pub clips_per_class: usize,
    pub noise_std: f64,
    pub audio_noise_std: f64,
    pub clip_len: usize,
    pub fps: f64,
    pub identity_dim: usize,
    pub expression_dim: usize,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            classes: vec![
                MotionClass::Still,
                MotionClass::Nod,
                MotionClass::Shake,
                MotionClass::Tilt,
            ],
            subjects: 4,
            clips_per_class: 50,
            noise_std: 0.01,
            audio_noise_std: 0.3,
            clip_len: pose::DEFAULT_CLIP_LEN,
            fps: pose::DEFAULT_FPS,
            identity_dim: 8,
            expression_dim: 16,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.classes.is_empty() || self.subjects == 0 || self.clips_per_class == 0 {
            return Err(Error::Config("classes, subjects and clips must all be >= 1".into()));
        }
        if !(self.noise_std >= 0.0) || !(self.audio_noise_std >= 0.0) {
            return Err(Error::Config("noise std must be >= 0".into()));
        }
        if self.clip_len < 2 {
            return Err(Error::Config("clip length must be >= 2".into()));
        }
        if !(self.fps > 0.0) {
            return Err(Error::Config("fps must be positive".into()));
        }
        Ok(())
    }
}

/// One paired training example.
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusClip {
    pub pose: PoseClip,
    pub audio: AudioClipFeature,
    pub class: MotionClass,
    pub subject: usize,
    pub expressions: Vec<ExpressionCoeff>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub clips: Vec<CorpusClip>,
    /// Identity coefficients per subject.
    pub identities: Vec<IdentityCoeff>,
    pub clip_len: usize,
    pub fps: f64,
}

impl Corpus {
    pub fn subjects(&self) -> usize {
        self.identities.len()
    }

    pub fn expression_dim(&self) -> usize {
        self.clips
            .first()
            .and_then(|c| c.expressions.first())
            .map_or(0, |e| e.0.len())
    }

    /// Seeded shuffle split into (train, held-out) clip indices.
    pub fn split(&self, train_fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
        let mut idx: Vec<usize> = (0..self.clips.len()).collect();
        idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed ^ SPLIT_SALT));
        let n_train = ((self.clips.len() as f64) * train_fraction).round() as usize;
        let n_train = n_train.clamp(1.min(self.clips.len()), self.clips.len());
        let held = idx.split_off(n_train);
        (idx, held)
    }
}


fn class_pattern(seed: u64, class: MotionClass) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ PATTERN_SALT);
    rng.set_stream(class.id());
    (0..AUDIO_FRAME_DIM).map(|_| StandardNormal.sample(&mut rng)).collect()
}

/// `AUDIO_FRAME_DIM × expression_dim` matrix mixing expression into audio.
fn expression_mixing(seed: u64, expression_dim: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ MIXING_SALT);
    let scale = 1.0 / (expression_dim.max(1) as f64).sqrt();
    (0..AUDIO_FRAME_DIM * expression_dim)
        .map(|_| scale * Distribution::<f64>::sample(&StandardNormal, &mut rng))
        .collect::<Vec<f64>>()
}

fn gaussian(rng: &mut ChaCha8Rng, std: f64) -> f64 {
    if std == 0.0 {
        0.0
    } else {
        Normal::new(0.0, std).expect("finite std").sample(rng)
    }
}

/// Generates the paired corpus. Every clip starts its sinusoid at phase
/// zero from a random base pose; audio frames are the class pattern plus a
/// linear image of the frame's expression plus noise.
pub fn synth_dataset(cfg: &SynthConfig) -> Result<Corpus> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let identities: Vec<IdentityCoeff> = (0..cfg.subjects)
        .map(|_| IdentityCoeff((0..cfg.identity_dim).map(|_| gaussian(&mut rng, 0.5)).collect()))
        .collect();
    let patterns: Vec<Vec<f64>> = cfg.classes.iter().map(|c| class_pattern(cfg.seed, *c)).collect();
    let mixing = expression_mixing(cfg.seed, cfg.expression_dim);

    let mut clips = Vec::with_capacity(cfg.classes.len() * cfg.clips_per_class);
    for (ci, &class) in cfg.classes.iter().enumerate() {
        for _ in 0..cfg.clips_per_class {
            let subject = rng.random_range(0..cfg.subjects);
            let base = [
                rng.random_range(-0.3..0.3),
                rng.random_range(-0.3..0.3),
                rng.random_range(-0.3..0.3),
                rng.random_range(-0.1..0.1),
                rng.random_range(-0.1..0.1),
                BASE_DEPTH + rng.random_range(-0.2..0.2),
            ];
            let mut frames = Vec::with_capacity(cfg.clip_len);
            for i in 0..cfg.clip_len {
                let wave = MOTION_AMPLITUDE * (2.0 * std::f64::consts::PI * i as f64 / MOTION_PERIOD).sin();
                let mut v = base;
                for &ch in class.channels() {
                    v[ch] += wave;
                }
                for x in v.iter_mut() {
                    *x += gaussian(&mut rng, cfg.noise_std);
                }
                frames.push(PoseFrame::from_vec6_wrapped(v)?);
            }

            let mut beta: Vec<f64> = (0..cfg.expression_dim).map(|_| gaussian(&mut rng, 0.5)).collect();
            let mut expressions = Vec::with_capacity(cfg.clip_len);
            let mut audio = Vec::with_capacity(cfg.clip_len * AUDIO_FRAME_DIM);
            for i in 0..cfg.clip_len {
                if i > 0 {
                    beta.iter_mut().for_each(|b| *b += gaussian(&mut rng, 0.1));
                }
                for (r, p) in patterns[ci].iter().enumerate() {
                    let row = &mixing[r * cfg.expression_dim..(r + 1) * cfg.expression_dim];
                    let mix: f64 = row.iter().zip(&beta).map(|(m, b)| m * b).sum();
                    audio.push(p + mix + gaussian(&mut rng, cfg.audio_noise_std));
                }
                expressions.push(ExpressionCoeff(beta.clone()));
            }
            clips.push(CorpusClip {
                pose: PoseClip::new(frames, cfg.fps)?,
                audio: AudioClipFeature::new(audio, cfg.clip_len)?,
                class,
                subject,
                expressions,
            });
        }
    }
    Ok(Corpus {
        clips,
        identities,
        clip_len: cfg.clip_len,
        fps: cfg.fps,
    })
}

const MANIFEST: &str = "manifest.txt";
const LABELS: &str = "labels.csv";
const IDENTITIES: &str = "identities.csv";

fn join_numbers(v: &[f64]) -> String {
    v.iter().map(f64::to_string).collect::<Vec<_>>().join(",")
}

fn parse_number_row(line: &str, source: &str, lineno: usize) -> Result<Vec<f64>> {
    line.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| Error::parse(source, lineno, format!("bad number `{t}`")))
        })
        .collect()
}

/// Reads a file of comma-separated numeric rows (one frame per line).
pub fn read_rows(path: &Path) -> Result<Vec<Vec<f64>>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let name = path.display().to_string();
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| parse_number_row(l, &name, i + 1))
        .collect()
}

pub fn write_rows(path: &Path, rows: impl IntoIterator<Item = Vec<f64>>) -> Result<()> {
    let mut out = String::new();
    for row in rows {
        out.push_str(&join_numbers(&row));
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Reads an audio feature file (one 256-value frame per line) and groups
/// it into clips of `t` frames; a trailing partial clip is dropped.
pub fn read_audio_clips(path: &Path, t: usize) -> Result<Vec<AudioClipFeature>> {
    let rows = read_rows(path)?;
    if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != AUDIO_FRAME_DIM) {
        return Err(Error::parse(
            path.display().to_string(),
            i + 1,
            format!("expected {AUDIO_FRAME_DIM} values per frame, found {}", r.len()),
        ));
    }
    if rows.len() < t {
        return Err(Error::Empty(format!(
            "{} has {} audio frames, fewer than one clip of {t}",
            path.display(),
            rows.len()
        )));
    }
    rows.chunks_exact(t)
        .map(|chunk| AudioClipFeature::new(chunk.concat(), t))
        .collect()
}

fn clip_file(i: usize) -> String {
    format!("clip_{i:05}.csv")
}

/// Writes the corpus as `manifest.txt`, `labels.csv`, `identities.csv` and
/// per-clip files under `poses/`, `audio/` and `expression/`.
pub fn write_corpus(dir: &Path, corpus: &Corpus, cfg: &SynthConfig) -> Result<()> {
    for sub in ["poses", "audio", "expression"] {
        let p = dir.join(sub);
        std::fs::create_dir_all(&p).map_err(|e| Error::io(&p, e))?;
    }
    let classes: Vec<String> = cfg.classes.iter().map(ToString::to_string).collect();
    let mut manifest = String::new();
    let _ = writeln!(manifest, "format=synth-corpus v1");
    let _ = writeln!(manifest, "clips={}", corpus.clips.len());
    let _ = writeln!(manifest, "t={}", corpus.clip_len);
    let _ = writeln!(manifest, "fps={}", corpus.fps);
    let _ = writeln!(manifest, "classes={}", classes.join(","));
    let _ = writeln!(manifest, "clips_per_class={}", cfg.clips_per_class);
    let _ = writeln!(manifest, "subjects={}", cfg.subjects);
    let _ = writeln!(manifest, "noise={}", cfg.noise_std);
    let _ = writeln!(manifest, "audio_noise={}", cfg.audio_noise_std);
    let _ = writeln!(manifest, "seed={}", cfg.seed);
    let path = dir.join(MANIFEST);
    std::fs::write(&path, manifest).map_err(|e| Error::io(&path, e))?;

    let mut labels = String::from("clip,class,subject\n");
    for (i, c) in corpus.clips.iter().enumerate() {
        let _ = writeln!(labels, "{i},{},{}", c.class, c.subject);
        pose::write_trajectory(&dir.join("poses").join(clip_file(i)), &c.pose.frames)?;
        write_rows(
            &dir.join("audio").join(clip_file(i)),
            (0..c.audio.frames()).map(|f| c.audio.frame(f).to_vec()),
        )?;
        write_rows(
            &dir.join("expression").join(clip_file(i)),
            c.expressions.iter().map(|e| e.0.clone()),
        )?;
    }
    let path = dir.join(LABELS);
    std::fs::write(&path, labels).map_err(|e| Error::io(&path, e))?;
    write_rows(&dir.join(IDENTITIES), corpus.identities.iter().map(|a| a.0.clone()))
}

fn manifest_value<'a>(manifest: &'a str, key: &str, source: &str) -> Result<&'a str> {
    manifest
        .lines()
        .find_map(|l| l.strip_prefix(key).and_then(|r| r.strip_prefix('=')))
        .map(str::trim)
        .ok_or_else(|| Error::parse(source, 0, format!("manifest is missing `{key}`")))
}

pub fn read_corpus(dir: &Path) -> Result<Corpus> {
    let mpath = dir.join(MANIFEST);
    let manifest = std::fs::read_to_string(&mpath).map_err(|e| Error::io(&mpath, e))?;
    let src = mpath.display().to_string();
    if manifest_value(&manifest, "format", &src)? != "synth-corpus v1" {
        return Err(Error::parse(&src, 1, "unsupported corpus format"));
    }
    let num = |key: &str| -> Result<f64> {
        manifest_value(&manifest, key, &src)?
            .parse()
            .map_err(|_| Error::parse(&src, 0, format!("bad value for `{key}`")))
    };
    let count = num("clips")? as usize;
    let t = num("t")? as usize;
    let fps = num("fps")?;

    let identities = read_rows(&dir.join(IDENTITIES))?
        .into_iter()
        .map(IdentityCoeff)
        .collect::<Vec<_>>();
    let lpath = dir.join(LABELS);
    let labels = std::fs::read_to_string(&lpath).map_err(|e| Error::io(&lpath, e))?;
    let lsrc = lpath.display().to_string();
    let mut clips = Vec::with_capacity(count);
    for (lineno, line) in labels.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 3 {
            return Err(Error::parse(&lsrc, lineno + 1, "expected clip,class,subject"));
        }
        let i: usize = fields[0]
            .parse()
            .map_err(|_| Error::parse(&lsrc, lineno + 1, "bad clip index"))?;
        if i != clips.len() {
            return Err(Error::parse(&lsrc, lineno + 1, "clip indices must be consecutive"));
        }
        let class: MotionClass = fields[1].parse()?;
        let subject: usize = fields[2]
            .parse()
            .map_err(|_| Error::parse(&lsrc, lineno + 1, "bad subject"))?;
        if subject >= identities.len() {
            return Err(Error::parse(&lsrc, lineno + 1, "subject has no identity row"));
        }
        let frames = pose::read_trajectory(&dir.join("poses").join(clip_file(i)))?;
        if frames.len() != t {
            return Err(Error::shape("frames per clip", t, frames.len()));
        }
        let audio = read_audio_clips(&dir.join("audio").join(clip_file(i)), t)?;
        let expressions: Vec<ExpressionCoeff> = read_rows(&dir.join("expression").join(clip_file(i)))?
            .into_iter()
            .map(ExpressionCoeff)
            .collect();
        if expressions.len() != t {
            return Err(Error::shape("expression frames per clip", t, expressions.len()));
        }
        clips.push(CorpusClip {
            pose: PoseClip::new(frames, fps)?,
            audio: audio.into_iter().next().expect("one clip"),
            class,
            subject,
            expressions,
        });
    }
    if clips.len() != count {
        return Err(Error::shape("clips listed in labels.csv", count, clips.len()));
    }
    Ok(Corpus {
        clips,
        identities,
        clip_len: t,
        fps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pose::clip_to_offsets;

    fn cfg(classes: &str, noise: f64) -> SynthConfig {
        SynthConfig {
            classes: parse_class_list(classes).unwrap(),
            clips_per_class: 10,
            noise_std: noise,
            seed: 5,
            ..SynthConfig::default()
        }
    }

    #[test]
    fn noiseless_still_has_zero_offsets() {
        let corpus = synth_dataset(&cfg("still", 0.0)).unwrap();
        for c in &corpus.clips {
            assert!(clip_to_offsets(&c.pose).flatten().iter().all(|v| *v == 0.0));
        }
    }

    #[test]
    fn same_seed_same_corpus() {
        let a = synth_dataset(&cfg("nod,shake", 0.01)).unwrap();
        let b = synth_dataset(&cfg("nod,shake", 0.01)).unwrap();
        assert_eq!(a, b);
        let mut other = cfg("nod,shake", 0.01);
        other.seed = 6;
        assert_ne!(a, synth_dataset(&other).unwrap());
    }

    #[test]
    fn nod_is_pitch_dominated() {
        let corpus = synth_dataset(&cfg("nod", 0.002)).unwrap();
        let offsets: Vec<[f64; 6]> = corpus
            .clips
            .iter()
            .flat_map(|c| clip_to_offsets(&c.pose).offsets().to_vec())
            .collect();
        let std = |ch: usize| {
            let n = offsets.len() as f64;
            let m = offsets.iter().map(|o| o[ch]).sum::<f64>() / n;
            (offsets.iter().map(|o| (o[ch] - m).powi(2)).sum::<f64>() / n).sqrt()
        };
        assert!(std(1) > 5.0 * std(2), "pitch {} yaw {}", std(1), std(2));
    }

    #[test]
    fn class_names_round_trip() {
        for c in MotionClass::ALL {
            assert_eq!(c.to_string().parse::<MotionClass>().unwrap(), c);
        }
        assert!(parse_class_list("nod,wobble").is_err());
        assert!(parse_class_list("").is_err());
    }

    #[test]
    fn split_is_seeded_and_disjoint() {
        let corpus = synth_dataset(&cfg("nod,tilt", 0.01)).unwrap();
        let (a, b) = corpus.split(0.8, 1);
        assert_eq!(a.len(), 16);
        assert_eq!(b.len(), 4);
        assert_eq!(corpus.split(0.8, 1), (a.clone(), b.clone()));
        assert!(a.iter().all(|i| !b.contains(i)));
    }

    #[test]
    fn corpus_directory_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let c = cfg("still,nod+shake", 0.02);
        let corpus = synth_dataset(&c).unwrap();
        write_corpus(dir.path(), &corpus, &c).unwrap();
        assert_eq!(read_corpus(dir.path()).unwrap(), corpus);
    }
}
