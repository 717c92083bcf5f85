//! Training hyperparameters and their flat `key=value` text form.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

/// Step-decayed learning rate:
/// `max(lr · decay^⌊step / decay_every⌋, min_lr)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LrSchedule {
    pub lr: f64,
    pub decay: f64,
    pub decay_every: usize,
    pub min_lr: f64,
}

impl Default for LrSchedule {
    /// 1e-2, dropping by 5× every 5000 steps down to 2e-5.
    fn default() -> Self {
        LrSchedule {
            lr: 1e-2,
            decay: 0.2,
            decay_every: 5000,
            min_lr: 2e-5,
        }
    }
}

impl LrSchedule {
    pub fn rate(&self, step: usize) -> f64 {
        let drops = (step / self.decay_every.max(1)) as i32;
        (self.lr * self.decay.powi(drops)).max(self.min_lr)
    }
}

pub const STAGES: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    /// number of motion bases (S)
    pub basis_count: usize,
    /// clip-level feature dimension (C)
    pub feature_dim: usize,
    /// frames per clip (t)
    pub clip_len: usize,
    /// feature window half-width (k)
    pub window_half: usize,
    pub kappa: f64,
    pub epsilon: f64,
    pub lambda_ldmk: f64,
    /// weight of the pose-decoder reconstruction term in stage 1
    pub lambda_decode: f64,
    pub focal: f64,
    pub hidden: usize,
    pub identity_dim: usize,
    pub momentum: f64,
    pub batch_size: usize,
    pub seed: u64,
    pub train_fraction: f64,
    pub log_every: usize,
    pub steps: [usize; STAGES],
    pub schedules: [LrSchedule; STAGES],
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            basis_count: 8,
            feature_dim: 32,
            clip_len: crate::pose::DEFAULT_CLIP_LEN,
            window_half: crate::sampler::DEFAULT_WINDOW_HALF,
            kappa: crate::motion_space::DEFAULT_KAPPA,
            epsilon: crate::sampler::DEFAULT_EPSILON,
            lambda_ldmk: crate::face::DEFAULT_LAMBDA_LDMK,
            lambda_decode: 1.0,
            focal: crate::face::DEFAULT_FOCAL,
            hidden: 64,
            identity_dim: 8,
            momentum: 0.9,
            batch_size: 16,
            seed: 0,
            train_fraction: 0.8,
            log_every: 100,
            steps: [10_000, 2_000, 2_000],
            schedules: [LrSchedule::default(); STAGES],
        }
    }
}

fn parse_value<T: std::str::FromStr>(key: &str, value: &str, source: &str, line: usize) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::parse(source, line, format!("bad value `{value}` for `{key}`")))
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("S", self.basis_count >= 2),
            ("C", self.feature_dim >= 2),
            ("t", self.clip_len >= 2),
            ("kappa", self.kappa > 0.0 && self.kappa.is_finite()),
            ("epsilon", self.epsilon >= 0.0 && self.epsilon.is_finite()),
            ("lambda_ldmk", self.lambda_ldmk >= 0.0),
            ("lambda_decode", self.lambda_decode >= 0.0),
            ("focal", self.focal > 0.0),
            ("hidden", self.hidden >= 1),
            ("momentum", (0.0..1.0).contains(&self.momentum)),
            ("batch_size", self.batch_size >= 1),
            ("train_fraction", self.train_fraction > 0.0 && self.train_fraction <= 1.0),
            ("log_every", self.log_every >= 1),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, ok)| !ok) {
            return Err(Error::Config(format!("`{name}` is out of range")));
        }
        for (i, s) in self.schedules.iter().enumerate() {
            if !(s.lr > 0.0) || !(s.decay > 0.0) || s.decay_every == 0 || !(s.min_lr >= 0.0) {
                return Err(Error::Config(format!("learning-rate schedule of stage {} is invalid", i + 1)));
            }
        }
        Ok(())
    }

    /// Parses `key=value` lines; `#` starts a comment. Stage-wide keys
    /// (`lr`, `lr_decay`, `lr_decay_every`, `lr_min`) apply to every stage
    /// and are overridden by `stageN_`-prefixed keys regardless of order.
    pub fn parse(text: &str, source: &str) -> Result<Self> {
        let mut cfg = TrainConfig::default();
        let mut staged: Vec<(usize, String, String, usize)> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let lineno = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::parse(source, lineno, "expected key=value"))?;
            let (key, value) = (key.trim(), value.trim());
            if let Some(rest) = key.strip_prefix("stage") {
                if let Some((n, field)) = rest.split_once('_') {
                    let n: usize = parse_value(key, n, source, lineno)?;
                    if !(1..=STAGES).contains(&n) {
                        return Err(Error::parse(source, lineno, format!("no stage {n}")));
                    }
                    staged.push((n - 1, field.to_string(), value.to_string(), lineno));
                    continue;
                }
            }
            match key {
                "S" => cfg.basis_count = parse_value(key, value, source, lineno)?,
                "C" => cfg.feature_dim = parse_value(key, value, source, lineno)?,
                "t" => cfg.clip_len = parse_value(key, value, source, lineno)?,
                "k" => cfg.window_half = parse_value(key, value, source, lineno)?,
                "kappa" => cfg.kappa = parse_value(key, value, source, lineno)?,
                "epsilon" => cfg.epsilon = parse_value(key, value, source, lineno)?,
                "lambda_ldmk" => cfg.lambda_ldmk = parse_value(key, value, source, lineno)?,
                "lambda_decode" => cfg.lambda_decode = parse_value(key, value, source, lineno)?,
                "focal" => cfg.focal = parse_value(key, value, source, lineno)?,
                "hidden" => cfg.hidden = parse_value(key, value, source, lineno)?,
                "identity_dim" => cfg.identity_dim = parse_value(key, value, source, lineno)?,
                "momentum" => cfg.momentum = parse_value(key, value, source, lineno)?,
                "batch_size" => cfg.batch_size = parse_value(key, value, source, lineno)?,
                "seed" => cfg.seed = parse_value(key, value, source, lineno)?,
                "train_fraction" => cfg.train_fraction = parse_value(key, value, source, lineno)?,
                "log_every" => cfg.log_every = parse_value(key, value, source, lineno)?,
                "lr" | "lr_decay" | "lr_decay_every" | "lr_min" => {
                    for s in 0..STAGES {
                        cfg.set_schedule_field(s, key, value, source, lineno)?;
                    }
                }
                other => {
                    return Err(Error::parse(source, lineno, format!("unknown key `{other}`")));
                }
            }
        }
        for (stage, field, value, lineno) in staged {
            if field == "steps" {
                cfg.steps[stage] = parse_value("steps", &value, source, lineno)?;
            } else {
                cfg.set_schedule_field(stage, &field, &value, source, lineno)?;
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn set_schedule_field(&mut self, stage: usize, field: &str, value: &str, source: &str, line: usize) -> Result<()> {
        let s = &mut self.schedules[stage];
        match field {
            "lr" => s.lr = parse_value(field, value, source, line)?,
            "lr_decay" => s.decay = parse_value(field, value, source, line)?,
            "lr_decay_every" => s.decay_every = parse_value(field, value, source, line)?,
            "lr_min" => s.min_lr = parse_value(field, value, source, line)?,
            other => return Err(Error::parse(source, line, format!("unknown stage key `{other}`"))),
        }
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }

    /// Canonical text form; parses back to an identical config.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "S={}", self.basis_count);
        let _ = writeln!(out, "C={}", self.feature_dim);
        let _ = writeln!(out, "t={}", self.clip_len);
        let _ = writeln!(out, "k={}", self.window_half);
        let _ = writeln!(out, "kappa={}", self.kappa);
        let _ = writeln!(out, "epsilon={}", self.epsilon);
        let _ = writeln!(out, "lambda_ldmk={}", self.lambda_ldmk);
        let _ = writeln!(out, "lambda_decode={}", self.lambda_decode);
        let _ = writeln!(out, "focal={}", self.focal);
        let _ = writeln!(out, "hidden={}", self.hidden);
        let _ = writeln!(out, "identity_dim={}", self.identity_dim);
        let _ = writeln!(out, "momentum={}", self.momentum);
        let _ = writeln!(out, "batch_size={}", self.batch_size);
        let _ = writeln!(out, "seed={}", self.seed);
        let _ = writeln!(out, "train_fraction={}", self.train_fraction);
        let _ = writeln!(out, "log_every={}", self.log_every);
        for (i, (steps, s)) in self.steps.iter().zip(&self.schedules).enumerate() {
            let n = i + 1;
            let _ = writeln!(out, "stage{n}_steps={steps}");
            let _ = writeln!(out, "stage{n}_lr={}", s.lr);
            let _ = writeln!(out, "stage{n}_lr_decay={}", s.decay);
            let _ = writeln!(out, "stage{n}_lr_decay_every={}", s.decay_every);
            let _ = writeln!(out, "stage{n}_lr_min={}", s.min_lr);
        }
        out
    }

    /// True when `other` describes the same model architecture and data
    /// split, so a checkpoint made under one can resume under the other.
    pub fn compatible_with(&self, other: &TrainConfig) -> bool {
        self.basis_count == other.basis_count
            && self.feature_dim == other.feature_dim
            && self.clip_len == other.clip_len
            && self.hidden == other.hidden
            && self.identity_dim == other.identity_dim
            && self.seed == other.seed
            && self.train_fraction == other.train_fraction
            && self.batch_size == other.batch_size
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_steps_and_floor() {
        let s = LrSchedule::default();
        assert_eq!(s.rate(0), 1e-2);
        assert_eq!(s.rate(4999), 1e-2);
        assert!((s.rate(5000) - 2e-3).abs() < 1e-18);
        assert_eq!(s.rate(50_000), 2e-5);
        let paper = LrSchedule { lr: 1e-4, decay: 0.2, decay_every: 300_000, min_lr: 0.0 };
        assert_eq!(paper.rate(299_999), 1e-4);
        assert!((paper.rate(300_000) - 2e-5).abs() < 1e-20);
    }

    #[test]
    fn defaults() {
        let c = TrainConfig::default();
        assert_eq!((c.basis_count, c.feature_dim, c.clip_len, c.window_half), (8, 32, 5, 8));
        assert_eq!((c.kappa, c.epsilon, c.lambda_ldmk), (10.0, 1.0, 0.02));
    }

    #[test]
    fn parse_with_overrides() {
        let text = "# comment\nS=48\nC = 512\nstage2_lr=0.5\nlr=0.01\nstage3_steps=7\n";
        let c = TrainConfig::parse(text, "mem").unwrap();
        assert_eq!(c.basis_count, 48);
        assert_eq!(c.feature_dim, 512);
        assert_eq!(c.schedules[0].lr, 0.01);
        assert_eq!(c.schedules[1].lr, 0.5);
        assert_eq!(c.steps[2], 7);
        assert_eq!(TrainConfig::parse(&c.to_text(), "echo").unwrap(), c);
    }

    #[test]
    fn parse_errors() {
        assert!(TrainConfig::parse("S\n", "mem").is_err());
        assert!(TrainConfig::parse("bogus=1\n", "mem").is_err());
        assert!(TrainConfig::parse("S=1\n", "mem").is_err());
        assert!(TrainConfig::parse("stage4_lr=1\n", "mem").is_err());
        assert!(TrainConfig::parse("kappa=abc\n", "mem").is_err());
    }
}
