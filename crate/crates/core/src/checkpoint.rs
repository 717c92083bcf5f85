//! Versioned decimal-text checkpoints. Numbers are written in shortest
//! round-trip form, so save → load reproduces every parameter bit-exactly.

use std::fmt::Write as _;
use std::path::Path;

use crate::config::{TrainConfig, STAGES};
use crate::error::{Error, Result};
use crate::model::{IdentityTable, MotionModel, ParamGroup};
use crate::motion_space::MotionBasisBank;
use crate::nn::{Activation, LayerSpec, Momentum, SmallNet};
use crate::train::{LossRecord, Progress, StageSummary, Velocities};

pub const CHECKPOINT_MAGIC: &str = "motionspace-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;
const VALUES_PER_LINE: usize = 8;

/// A model together with the training state needed to resume it.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub model: MotionModel,
    pub progress: Progress,
}

fn write_values(out: &mut String, values: &[f64]) {
    let _ = writeln!(out, "{}", values.len());
    for chunk in values.chunks(VALUES_PER_LINE) {
        let line: Vec<String> = chunk.iter().map(f64::to_string).collect();
        let _ = writeln!(out, "{}", line.join(" "));
    }
}

fn write_net(out: &mut String, name: &str, net: &SmallNet) {
    let _ = writeln!(out, "[net {name}]");
    let _ = writeln!(out, "{}", net.layers().len());
    for l in net.layers() {
        let _ = writeln!(out, "{} {} {}", l.input, l.output, l.activation);
    }
    write_values(out, net.params());
}

/// Serializes a checkpoint.
pub fn format_checkpoint(ckpt: &Checkpoint) -> String {
    let m = &ckpt.model;
    let p = &ckpt.progress;
    let mut out = String::new();
    let _ = writeln!(out, "{CHECKPOINT_MAGIC} v{CHECKPOINT_VERSION}");
    let _ = writeln!(out, "[config]");
    out.push_str(&m.config.to_text());
    let _ = writeln!(out, "[motion_space]");
    let _ = writeln!(out, "{} {} {}", m.bank.size(), m.bank.dim(), m.bank.kappa());
    write_values(&mut out, m.bank.coefficients());
    write_net(&mut out, "E_m", &m.motion_encoder);
    write_net(&mut out, "decoder", &m.decoder);
    write_net(&mut out, "E_a", &m.audio_encoder);
    write_net(&mut out, "extractor", &m.extractor);
    let _ = writeln!(out, "[identity]");
    let _ = writeln!(out, "{} {}", m.identities.subjects(), m.identities.dim());
    write_values(&mut out, m.identities.values());
    let _ = writeln!(out, "[progress]");
    let _ = writeln!(out, "{} {}", p.stage, p.step);
    for group in ParamGroup::ALL {
        let _ = writeln!(out, "[velocity {group}]");
        write_values(&mut out, &p.velocities.get(group).velocity);
    }
    let _ = writeln!(out, "[summaries]");
    let _ = writeln!(out, "{}", p.summaries.len());
    for s in &p.summaries {
        let fin = s.final_loss.map_or_else(|| "-".to_string(), |v| v.to_string());
        let _ = writeln!(out, "{} {} {}", s.stage, s.initial, fin);
    }
    let _ = writeln!(out, "[history]");
    let _ = writeln!(out, "{}", p.history.len());
    for r in &p.history {
        let _ = writeln!(out, "{} {} {}", r.stage, r.step, r.loss);
    }
    let _ = writeln!(out, "[end]");
    out
}

struct Reader<'a> {
    lines: std::iter::Peekable<std::iter::Enumerate<std::str::Lines<'a>>>,
    source: &'a str,
    last_line: usize,
}

impl<'a> Reader<'a> {
    fn new(text: &'a str, source: &'a str) -> Self {
        Reader {
            lines: text.lines().enumerate().peekable(),
            source,
            last_line: 0,
        }
    }

    fn err(&self, message: impl Into<String>) -> Error {
        Error::parse(self.source, self.last_line, message)
    }

    fn line(&mut self) -> Result<&'a str> {
        match self.lines.next() {
            Some((i, l)) => {
                self.last_line = i + 1;
                Ok(l.trim())
            }
            None => Err(Error::parse(self.source, self.last_line + 1, "unexpected end of checkpoint (truncated)")),
        }
    }

    fn expect(&mut self, header: &str) -> Result<()> {
        let l = self.line()?;
        if l != header {
            return Err(self.err(format!("expected `{header}`, found `{l}`")));
        }
        Ok(())
    }

    fn tokens<const N: usize>(&mut self) -> Result<[&'a str; N]> {
        let l = self.line()?;
        let t: Vec<&str> = l.split_whitespace().collect();
        t.try_into()
            .map_err(|_| self.err(format!("expected {N} fields, found `{l}`")))
    }

    fn number<T: std::str::FromStr>(&self, token: &str) -> Result<T> {
        token.parse().map_err(|_| self.err(format!("bad number `{token}`")))
    }

    fn values(&mut self) -> Result<Vec<f64>> {
        let [count] = self.tokens::<1>()?;
        let count: usize = self.number(count)?;
        let mut out = Vec::with_capacity(count);
        while out.len() < count {
            let l = self.line()?;
            for t in l.split_whitespace() {
                let v: f64 = self.number(t)?;
                if !v.is_finite() {
                    return Err(self.err("non-finite value"));
                }
                out.push(v);
            }
            if out.len() > count {
                return Err(self.err(format!("expected {count} values, found more")));
            }
        }
        Ok(out)
    }

    fn net(&mut self, name: &str) -> Result<SmallNet> {
        self.expect(&format!("[net {name}]"))?;
        let [n] = self.tokens::<1>()?;
        let n: usize = self.number(n)?;
        let mut layers = Vec::with_capacity(n);
        for _ in 0..n {
            let [i, o, a] = self.tokens::<3>()?;
            let act: Activation = a.parse().map_err(|_| self.err(format!("unknown activation `{a}`")))?;
            layers.push(LayerSpec::new(self.number(i)?, self.number(o)?, act));
        }
        let params = self.values()?;
        SmallNet::from_parts(layers, params).map_err(|e| self.err(format!("net {name}: {e}")))
    }
}

/// Parses a checkpoint, validating the version and every dimension. No
/// partially-read model is ever returned.
pub fn parse_checkpoint(text: &str, source: &str) -> Result<Checkpoint> {
    let mut r = Reader::new(text, source);
    let header = r.line()?;
    let version = header
        .strip_prefix(CHECKPOINT_MAGIC)
        .and_then(|v| v.trim().strip_prefix('v'))
        .ok_or_else(|| r.err(format!("not a checkpoint header: `{header}`")))?;
    if version != CHECKPOINT_VERSION.to_string() {
        return Err(r.err(format!("unsupported checkpoint version `{version}`, expected {CHECKPOINT_VERSION}")));
    }

    r.expect("[config]")?;
    let start = r.last_line;
    let mut config_text = String::new();
    while r.lines.peek().is_some_and(|(_, l)| !l.trim_start().starts_with('[')) {
        config_text.push_str(r.line()?);
        config_text.push('\n');
    }
    let config = TrainConfig::parse(&config_text, source).map_err(|e| match e {
        Error::Parse { line, message, .. } => Error::parse(source, start + line, message),
        other => r.err(other.to_string()),
    })?;

    r.expect("[motion_space]")?;
    let [s, c, kappa] = r.tokens::<3>()?;
    let (s, c, kappa): (usize, usize, f64) = (r.number(s)?, r.number(c)?, r.number(kappa)?);
    let coefficients = r.values()?;
    let bank = MotionBasisBank::from_flat(coefficients, s, c, kappa).map_err(|e| r.err(format!("motion_space: {e}")))?;
    let motion_encoder = r.net("E_m")?;
    let decoder = r.net("decoder")?;
    let audio_encoder = r.net("E_a")?;
    let extractor = r.net("extractor")?;

    r.expect("[identity]")?;
    let [subjects, dim] = r.tokens::<2>()?;
    let (subjects, dim): (usize, usize) = (r.number(subjects)?, r.number(dim)?);
    let values = r.values()?;
    if values.len() != subjects * dim {
        return Err(r.err(format!("identity table: expected {} values, found {}", subjects * dim, values.len())));
    }
    let identities = IdentityTable::new(values, dim).map_err(|e| r.err(format!("identity: {e}")))?;

    let model = MotionModel {
        config,
        bank,
        motion_encoder,
        decoder,
        audio_encoder,
        extractor,
        identities,
    };
    model.check_consistency().map_err(|e| r.err(format!("inconsistent dimensions: {e}")))?;

    r.expect("[progress]")?;
    let [stage, step] = r.tokens::<2>()?;
    let (stage, step): (usize, usize) = (r.number(stage)?, r.number(step)?);
    if stage > STAGES {
        return Err(r.err(format!("stage {stage} out of range")));
    }
    let mut buffers = Vec::with_capacity(ParamGroup::ALL.len());
    for group in ParamGroup::ALL {
        r.expect(&format!("[velocity {group}]"))?;
        let velocity = r.values()?;
        if velocity.len() != model.params(group).len() {
            return Err(r.err(format!(
                "velocity {group}: expected {} values, found {}",
                model.params(group).len(),
                velocity.len()
            )));
        }
        buffers.push((group, Momentum { velocity }));
    }

    r.expect("[summaries]")?;
    let [n] = r.tokens::<1>()?;
    let n: usize = r.number(n)?;
    let mut summaries = Vec::with_capacity(n);
    for _ in 0..n {
        let [stage, initial, fin] = r.tokens::<3>()?;
        let final_loss = if fin == "-" { None } else { Some(r.number(fin)?) };
        summaries.push(StageSummary {
            stage: r.number(stage)?,
            initial: r.number(initial)?,
            final_loss,
        });
    }

    r.expect("[history]")?;
    let [n] = r.tokens::<1>()?;
    let n: usize = r.number(n)?;
    let mut history = Vec::with_capacity(n);
    for _ in 0..n {
        let [stage, step, loss] = r.tokens::<3>()?;
        history.push(LossRecord {
            stage: r.number(stage)?,
            step: r.number(step)?,
            loss: r.number(loss)?,
        });
    }
    r.expect("[end]")?;

    Ok(Checkpoint {
        model,
        progress: Progress {
            stage,
            step,
            velocities: Velocities { buffers },
            summaries,
            history,
        },
    })
}

pub fn save_checkpoint(path: &Path, ckpt: &Checkpoint) -> Result<()> {
    std::fs::write(path, format_checkpoint(ckpt)).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_checkpoint(&text, &path.display().to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Checkpoint {
        let cfg = TrainConfig {
            basis_count: 3,
            feature_dim: 4,
            clip_len: 3,
            hidden: 5,
            identity_dim: 2,
            ..TrainConfig::default()
        };
        let model = MotionModel::init(&cfg, 2, 16).unwrap();
        let mut progress = Progress::start(&model);
        progress.stage = 1;
        progress.step = 4;
        progress.velocities.buffers[0].1.velocity[0] = -1.0 / 3.0;
        progress.summaries.push(StageSummary {
            stage: 0,
            initial: 2.5,
            final_loss: Some(0.1 + 0.2),
        });
        progress.summaries.push(StageSummary {
            stage: 1,
            initial: 1.0e-300,
            final_loss: None,
        });
        progress.history.push(LossRecord {
            stage: 0,
            step: 0,
            loss: std::f64::consts::PI,
        });
        Checkpoint { model, progress }
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let c = sample();
        let text = format_checkpoint(&c);
        let back = parse_checkpoint(&text, "mem").unwrap();
        assert_eq!(back, c);
        assert_eq!(format_checkpoint(&back), text);
    }

    #[test]
    fn corrupted_header_is_rejected() {
        let text = format_checkpoint(&sample());
        let bad = text.replacen("motionspace-checkpoint", "motionspace-chekpoint", 1);
        assert!(matches!(parse_checkpoint(&bad, "mem"), Err(Error::Parse { line: 1, .. })));
        let v2 = text.replacen("v1", "v2", 1);
        assert!(matches!(parse_checkpoint(&v2, "mem"), Err(Error::Parse { .. })));
    }

    #[test]
    fn truncation_is_rejected() {
        let text = format_checkpoint(&sample());
        for cut in [text.len() / 3, text.len() / 2, text.len() - 7] {
            let cut = text[..cut].rfind('\n').unwrap() + 1;
            assert!(matches!(parse_checkpoint(&text[..cut], "mem"), Err(Error::Parse { .. })));
        }
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let text = format_checkpoint(&sample());
        let bad = text.replacen("\nC=4\n", "\nC=5\n", 1);
        let err = parse_checkpoint(&bad, "mem").unwrap_err();
        assert!(matches!(err, Error::Parse { .. }), "{err}");
    }
}
