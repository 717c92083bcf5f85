use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use motionspace::checkpoint::{load_checkpoint, save_checkpoint};
use motionspace::config::TrainConfig;
use motionspace::face::{project_landmarks, FaceModel, Point2, DEFAULT_FOCAL};
use motionspace::gradcheck::check_model;
use motionspace::metrics::{diversity_metric, lmd_metric};
use motionspace::pose::{clip_to_offsets, read_trajectory, write_trajectory, PoseClip, PoseFrame, DEFAULT_FPS};
use motionspace::sampler::{stitch_clips, SampleConfig};
use motionspace::synth::{parse_class_list, read_audio_clips, read_corpus, synth_dataset, write_corpus, SynthConfig};
use motionspace::train::Trainer;
use motionspace::{Error, Result};

const DEFAULT_INITIAL: &str = "0,0,0,0,0,5";

#[derive(Parser)]
#[command(name = "motionspace", version, about = "Audio-driven one-to-many head-motion synthesis at pose level")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic paired corpus.
    Synth {
        #[arg(long)]
        out: PathBuf,
        /// Comma-separated classes: still, nod, shake, tilt, nod+shake.
        #[arg(long, default_value = "still,nod,shake,tilt")]
        classes: String,
        /// Clips per class.
        #[arg(long, default_value_t = 50)]
        clips: usize,
        /// Pose noise standard deviation (radians).
        #[arg(long, default_value_t = 0.01)]
        noise: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 4)]
        subjects: usize,
    },
    /// Train (or resume training) on a corpus directory.
    Train {
        #[arg(long)]
        data: PathBuf,
        /// key=value config file; built-in defaults when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        resume: Option<PathBuf>,
        /// Stop after this many optimizer steps (the checkpoint can be resumed).
        #[arg(long)]
        max_steps: Option<usize>,
    },
    /// Sample diverse pose trajectories for an audio feature file.
    Sample {
        #[arg(long)]
        ckpt: PathBuf,
        /// 256 comma-separated values per line, one line per frame.
        #[arg(long)]
        audio: PathBuf,
        #[arg(long, default_value_t = motionspace::sampler::DEFAULT_EPSILON)]
        epsilon: f64,
        #[arg(long, default_value_t = 1)]
        num: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = DEFAULT_INITIAL, allow_hyphen_values = true)]
        initial: String,
    },
    /// Compose pose clips into one trajectory.
    Stitch {
        #[arg(long, num_args = 1.., required = true)]
        clips: Vec<PathBuf>,
        #[arg(long, allow_hyphen_values = true)]
        initial: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compute metrics over predicted (and reference) trajectories.
    Eval {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        r#ref: Option<PathBuf>,
        #[arg(long, default_value = "diversity,lmd")]
        metrics: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Decode one basis vector into its characteristic trajectory.
    Probe {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        basis: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 4)]
        clips: usize,
        #[arg(long, default_value = DEFAULT_INITIAL, allow_hyphen_values = true)]
        initial: String,
    },
    /// Finite-difference check of every gradient at a checkpoint.
    Gradcheck {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long, default_value_t = 1e-4)]
        tol: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Coordinates checked per tensor (0 checks all).
        #[arg(long, default_value_t = 32)]
        per_tensor: usize,
    },
}

fn parse_initial(text: &str) -> Result<PoseFrame> {
    let v: Vec<f64> = text
        .split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| Error::Config(format!("bad initial pose component `{t}`")))
        })
        .collect::<Result<_>>()?;
    let v: [f64; 6] = v
        .try_into()
        .map_err(|_| Error::Config("initial pose needs 6 values r,p,y,tx,ty,tz".into()))?;
    PoseFrame::new([v[0], v[1], v[2]], [v[3], v[4], v[5]])
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Trajectory files of a directory in sorted name order.
fn trajectory_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut files: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(Error::Empty(format!("no .csv trajectories in {}", dir.display())));
    }
    Ok(files)
}

fn mean_face_landmarks(face: &FaceModel, trajectory: &[PoseFrame]) -> Result<Vec<Vec<Point2>>> {
    trajectory
        .iter()
        .map(|p| project_landmarks(face.mean_shape(), face, p, DEFAULT_FOCAL))
        .collect()
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Synth {
            out,
            classes,
            clips,
            noise,
            seed,
            subjects,
        } => {
            let cfg = SynthConfig {
                classes: parse_class_list(&classes)?,
                clips_per_class: clips,
                noise_std: noise,
                seed,
                subjects,
                ..SynthConfig::default()
            };
            let corpus = synth_dataset(&cfg)?;
            write_corpus(&out, &corpus, &cfg)?;
            println!("wrote {} clips to {}", corpus.clips.len(), out.display());
        }
        Command::Train {
            data,
            config,
            out,
            resume,
            max_steps,
        } => {
            let corpus = read_corpus(&data)?;
            let cfg = config.as_deref().map(TrainConfig::read).transpose()?;
            let mut trainer = match resume {
                Some(path) => Trainer::resume(&corpus, load_checkpoint(&path)?, cfg.as_ref())?,
                None => Trainer::new(&corpus, &cfg.unwrap_or_default())?,
            };
            match max_steps {
                Some(n) => {
                    trainer.run_steps(n)?;
                }
                None => trainer.run()?,
            }
            let ckpt = trainer.checkpoint();
            for s in &ckpt.progress.summaries {
                match s.final_loss {
                    Some(f) => println!("stage{}: initial {} final {}", s.stage + 1, s.initial, f),
                    None => println!("stage{}: initial {} (in progress)", s.stage + 1, s.initial),
                }
            }
            save_checkpoint(&out, ckpt)?;
            let state = if trainer.finished() { "complete" } else { "partial" };
            println!("saved {state} checkpoint to {}", out.display());
        }
        Command::Sample {
            ckpt,
            audio,
            epsilon,
            num,
            seed,
            out,
            initial,
        } => {
            let model = load_checkpoint(&ckpt)?.model;
            let clips = read_audio_clips(&audio, model.clip_len())?;
            let cfg = SampleConfig::new(epsilon, seed, num)?;
            let trajectories = model.sample_trajectories(&clips, &cfg, parse_initial(&initial)?)?;
            create_dir(&out)?;
            let stem = audio
                .file_stem()
                .map_or_else(|| "audio".to_string(), |s| s.to_string_lossy().into_owned());
            for (j, t) in trajectories.iter().enumerate() {
                write_trajectory(&out.join(format!("{stem}.sample{j}.csv")), t)?;
            }
            println!("wrote {} trajectories of {} frames to {}", trajectories.len(), trajectories[0].len(), out.display());
        }
        Command::Stitch { clips, initial, out } => {
            let offsets = clips
                .iter()
                .map(|p| Ok(clip_to_offsets(&PoseClip::new(read_trajectory(p)?, DEFAULT_FPS)?)))
                .collect::<Result<Vec<_>>>()?;
            let frames = stitch_clips(&offsets, parse_initial(&initial)?)?;
            write_trajectory(&out, &frames)?;
            println!("wrote {} frames to {}", frames.len(), out.display());
        }
        Command::Eval {
            pred,
            r#ref,
            metrics,
            out,
        } => {
            let preds = trajectory_files(&pred)?
                .iter()
                .map(|p| read_trajectory(p))
                .collect::<Result<Vec<_>>>()?;
            let mut report = serde_json::Map::new();
            for metric in metrics.split(',').map(str::trim).filter(|m| !m.is_empty()) {
                let value = match metric {
                    "diversity" => diversity_metric(&preds)?,
                    "lmd" => {
                        let dir = r#ref
                            .as_deref()
                            .ok_or_else(|| Error::Config("lmd needs --ref".into()))?;
                        let refs = trajectory_files(dir)?
                            .iter()
                            .map(|p| read_trajectory(p))
                            .collect::<Result<Vec<_>>>()?;
                        if refs.len() != preds.len() {
                            return Err(Error::shape("reference trajectories", preds.len(), refs.len()));
                        }
                        let face = FaceModel::builtin();
                        let mut p_all = Vec::new();
                        let mut r_all = Vec::new();
                        for (p, r) in preds.iter().zip(&refs) {
                            if p.len() != r.len() {
                                return Err(Error::shape("reference trajectory length", p.len(), r.len()));
                            }
                            p_all.extend(mean_face_landmarks(&face, p)?);
                            r_all.extend(mean_face_landmarks(&face, r)?);
                        }
                        lmd_metric(&p_all, &r_all)?
                    }
                    other => return Err(Error::Config(format!("unknown metric `{other}`"))),
                };
                report.insert(metric.to_string(), value.into());
            }
            let text = serde_json::to_string_pretty(&serde_json::Value::Object(report))
                .map_err(|e| Error::Config(e.to_string()))?;
            std::fs::write(&out, text + "\n").map_err(|e| Error::io(&out, e))?;
            println!("wrote {}", out.display());
        }
        Command::Probe {
            ckpt,
            basis,
            out,
            clips,
            initial,
        } => {
            let model = load_checkpoint(&ckpt)?.model;
            let frames = model.probe(basis, parse_initial(&initial)?, clips)?;
            write_trajectory(&out, &frames)?;
            println!("wrote {} frames to {}", frames.len(), out.display());
        }
        Command::Gradcheck {
            ckpt,
            tol,
            seed,
            per_tensor,
        } => {
            let model = load_checkpoint(&ckpt)?.model;
            let limit = (per_tensor > 0).then_some(per_tensor);
            let report = check_model(&model, &FaceModel::builtin(), seed, tol, limit)?;
            for t in &report.tensors {
                let mark = if t.max_error <= tol { "ok" } else { "FAIL" };
                println!("{mark:4} {:28} max_rel_err {:.3e} ({} checked)", t.name, t.max_error, t.checked);
            }
            println!("max relative error {:.3e}, tolerance {tol:e}", report.max_error);
            if !report.passed {
                println!("failing: {}", report.failing().join(", "));
                return Ok(ExitCode::from(2));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
