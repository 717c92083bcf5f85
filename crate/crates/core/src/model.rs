//! All trainable parts of the system and the inference pipeline built on
//! them.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::config::TrainConfig;
use crate::encoders::{encode_audio_weights, encode_motion, extract_expression, AudioClipFeature};
use crate::error::{Error, Result};
use crate::face::ExpressionCoeff;
use crate::motion_space::{BasisWeights, MotionBasisBank, MotionFeature};
use crate::nn::SmallNet;
use crate::pose::{OffsetClip, PoseFrame};
use crate::sampler::{self, SampleConfig};

/// Standard deviation of the initial identity embeddings.
const IDENTITY_INIT_STD: f64 = 0.1;

/// Names one group of trainable parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ParamGroup {
    MotionSpace,
    MotionEncoder,
    Decoder,
    AudioEncoder,
    Extractor,
    Identity,
}

impl ParamGroup {
    pub const ALL: [ParamGroup; 6] = [
        ParamGroup::MotionSpace,
        ParamGroup::MotionEncoder,
        ParamGroup::Decoder,
        ParamGroup::AudioEncoder,
        ParamGroup::Extractor,
        ParamGroup::Identity,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ParamGroup::MotionSpace => "motion_space",
            ParamGroup::MotionEncoder => "E_m",
            ParamGroup::Decoder => "decoder",
            ParamGroup::AudioEncoder => "E_a",
            ParamGroup::Extractor => "extractor",
            ParamGroup::Identity => "identity",
        }
    }
}

impl fmt::Display for ParamGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Learned per-subject embeddings fed to the expression extractor.
#[derive(Debug, Clone, PartialEq)]
pub struct IdentityTable {
    values: Vec<f64>,
    dim: usize,
}

impl IdentityTable {
    pub fn new(values: Vec<f64>, dim: usize) -> Result<Self> {
        if dim == 0 || !values.len().is_multiple_of(dim) {
            return Err(Error::shape("identity table", dim.max(1) * (values.len() / dim.max(1)), values.len()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("identity table has non-finite entries".into()));
        }
        Ok(IdentityTable { values, dim })
    }

    pub fn subjects(&self) -> usize {
        self.values.len() / self.dim
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn embedding(&self, subject: usize) -> Result<&[f64]> {
        if subject >= self.subjects() {
            return Err(Error::OutOfRange {
                index: subject,
                len: self.subjects(),
            });
        }
        Ok(&self.values[subject * self.dim..(subject + 1) * self.dim])
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MotionModel {
    pub config: TrainConfig,
    pub bank: MotionBasisBank,
    pub motion_encoder: SmallNet,
    pub decoder: SmallNet,
    pub audio_encoder: SmallNet,
    pub extractor: SmallNet,
    pub identities: IdentityTable,
}

impl MotionModel {
    /// Seeded initialization of every part.
    pub fn init(config: &TrainConfig, subjects: usize, expression_dim: usize) -> Result<Self> {
        config.validate()?;
        if subjects == 0 || expression_dim == 0 {
            return Err(Error::Config("model needs at least one subject and expression dimension".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let t = config.clip_len;
        let bank = MotionBasisBank::random(config.basis_count, config.feature_dim, config.kappa, &mut rng)?;
        let motion_encoder = SmallNet::motion_encoder(t, config.hidden, config.feature_dim, &mut rng)?;
        let decoder = SmallNet::pose_decoder(config.feature_dim, config.hidden, t, &mut rng)?;
        let audio_encoder = SmallNet::audio_encoder(t, config.hidden, config.basis_count, &mut rng)?;
        let extractor = SmallNet::expression_extractor(config.identity_dim, config.hidden, expression_dim, &mut rng)?;
        let identities = IdentityTable::new(
            (0..subjects * config.identity_dim)
                .map(|_| IDENTITY_INIT_STD * rng.sample::<f64, _>(StandardNormal))
                .collect(),
            config.identity_dim,
        )?;
        let model = MotionModel {
            config: config.clone(),
            bank,
            motion_encoder,
            decoder,
            audio_encoder,
            extractor,
            identities,
        };
        model.check_consistency()?;
        Ok(model)
    }

    /// Verifies that every part agrees with the config dimensions.
    pub fn check_consistency(&self) -> Result<()> {
        let c = &self.config;
        let t = c.clip_len;
        let checks = [
            ("motion_space size", c.basis_count, self.bank.size()),
            ("motion_space dim", c.feature_dim, self.bank.dim()),
            ("E_m input", 6 * t, self.motion_encoder.input_dim()),
            ("E_m output", c.feature_dim, self.motion_encoder.output_dim()),
            ("decoder input", c.feature_dim, self.decoder.input_dim()),
            ("decoder output", 6 * t, self.decoder.output_dim()),
            ("E_a input", crate::AUDIO_FRAME_DIM * t, self.audio_encoder.input_dim()),
            ("E_a output", c.basis_count, self.audio_encoder.output_dim()),
            ("extractor input", crate::AUDIO_FRAME_DIM + c.identity_dim, self.extractor.input_dim()),
            ("identity dim", c.identity_dim, self.identities.dim()),
        ];
        for (what, expected, got) in checks {
            if expected != got {
                return Err(Error::shape(what, expected, got));
            }
        }
        if self.bank.kappa() != c.kappa {
            return Err(Error::Contract("motion_space kappa differs from config".into()));
        }
        Ok(())
    }

    pub fn clip_len(&self) -> usize {
        self.config.clip_len
    }

    pub fn expression_dim(&self) -> usize {
        self.extractor.output_dim()
    }

    pub fn params(&self, group: ParamGroup) -> &[f64] {
        match group {
            ParamGroup::MotionSpace => self.bank.coefficients(),
            ParamGroup::MotionEncoder => self.motion_encoder.params(),
            ParamGroup::Decoder => self.decoder.params(),
            ParamGroup::AudioEncoder => self.audio_encoder.params(),
            ParamGroup::Extractor => self.extractor.params(),
            ParamGroup::Identity => self.identities.values(),
        }
    }

    pub fn params_mut(&mut self, group: ParamGroup) -> &mut [f64] {
        match group {
            ParamGroup::MotionSpace => self.bank.coefficients_mut(),
            ParamGroup::MotionEncoder => self.motion_encoder.params_mut(),
            ParamGroup::Decoder => self.decoder.params_mut(),
            ParamGroup::AudioEncoder => self.audio_encoder.params_mut(),
            ParamGroup::Extractor => self.extractor.params_mut(),
            ParamGroup::Identity => self.identities.values_mut(),
        }
    }

    /// Human-readable name of parameter `i` of `group`.
    pub fn param_name(&self, group: ParamGroup, i: usize) -> String {
        let inner = match group {
            ParamGroup::MotionSpace => format!("basis{}", i / self.bank.dim()),
            ParamGroup::MotionEncoder => self.motion_encoder.param_name(i),
            ParamGroup::Decoder => self.decoder.param_name(i),
            ParamGroup::AudioEncoder => self.audio_encoder.param_name(i),
            ParamGroup::Extractor => self.extractor.param_name(i),
            ParamGroup::Identity => format!("subject{}", i / self.identities.dim()),
        };
        format!("{group}/{inner}")
    }

    pub fn encode(&self, clip: &OffsetClip) -> Result<MotionFeature> {
        encode_motion(&self.motion_encoder, clip)
    }

    /// Attention of a pose clip over the bases.
    pub fn visual_weights(&self, clip: &OffsetClip) -> Result<BasisWeights> {
        self.bank.attention(&self.encode(clip)?)
    }

    pub fn audio_weights(&self, audio: &AudioClipFeature) -> Result<BasisWeights> {
        encode_audio_weights(&self.audio_encoder, audio)
    }

    pub fn decode(&self, feature: &MotionFeature) -> Result<OffsetClip> {
        sampler::decode_pose(&self.decoder, feature)
    }

    /// Encodes and decodes a clip without passing through the bank.
    pub fn autoencode(&self, clip: &OffsetClip) -> Result<OffsetClip> {
        self.decode(&self.encode(clip)?)
    }

    /// Center of the reachable motion set for one audio clip.
    pub fn center(&self, audio: &AudioClipFeature) -> Result<MotionFeature> {
        sampler::center_feature(&self.bank, &self.audio_weights(audio)?)
    }

    pub fn expression(&self, audio_frame: &[f64], subject: usize) -> Result<ExpressionCoeff> {
        extract_expression(&self.extractor, audio_frame, self.identities.embedding(subject)?)
    }

    /// `cfg.num_samples` trajectories for consecutive audio clips. Sample
    /// `j` draws one feature per clip, in order, from its own stream; the
    /// decoded clips are stitched from `initial`.
    pub fn sample_trajectories(
        &self,
        audio: &[AudioClipFeature],
        cfg: &SampleConfig,
        initial: PoseFrame,
    ) -> Result<Vec<Vec<PoseFrame>>> {
        if audio.is_empty() {
            return Err(Error::Empty("no audio clips".into()));
        }
        for a in audio {
            if a.frames() != self.clip_len() {
                return Err(Error::shape("audio clip frames", self.clip_len(), a.frames()));
            }
        }
        let centers = audio.iter().map(|a| self.center(a)).collect::<Result<Vec<_>>>()?;
        std::thread::scope(|scope| {
            let handles: Vec<_> = (0..cfg.num_samples as u64)
                .map(|j| {
                    let centers = &centers;
                    scope.spawn(move || -> Result<Vec<PoseFrame>> {
                        let mut rng = sampler::sample_rng(cfg.seed, j);
                        let clips = centers
                            .iter()
                            .map(|c| self.decode(&sampler::sample_ball(c, cfg.epsilon, &mut rng)))
                            .collect::<Result<Vec<_>>>()?;
                        sampler::stitch_clips(&clips, initial)
                    })
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("sampling worker panicked"))
                .collect()
        })
    }

    /// The trajectory basis `index` stands for.
    pub fn probe(&self, index: usize, initial: PoseFrame, num_clips: usize) -> Result<Vec<PoseFrame>> {
        sampler::probe_basis(&self.bank, &self.decoder, index, initial, num_clips)
    }
}
