//! Desk-scale math of the XLSR-53 building blocks: encoder frame geometry,
//! Gumbel-Softmax quantization, span masking, and the contrastive and
//! diversity losses. Nothing here is trained.

mod check;
mod loss;
mod quantizer;

pub use check::{loss_check, CheckResult};
pub use loss::{
    apply_mask, batch_average, contrastive_loss, cosine_similarity, diversity_loss,
    ContrastiveBatch, ContrastiveOutput, MaskConfig, Masked, DEFAULT_DISTRACTORS,
};
pub use quantizer::{
    gumbel_noise, gumbel_softmax, gumbel_softmax_with_noise, GumbelSample, Quantized, Quantizer,
    QuantizerConfig,
};

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum XlsrError {
    #[error("{samples} samples is shorter than the receptive field of {minimum}")]
    TooShort { samples: usize, minimum: usize },
    #[error("invalid configuration: {0}")]
    BadConfig(String),
    #[error("temperature must be positive, got {0}")]
    BadTemperature(f64),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("cosine similarity of a zero-norm vector")]
    ZeroVector,
    #[error("group {group} does not sum to one (sum {sum})")]
    NotNormalized { group: usize, sum: f64 },
    #[error("at least one distractor is required")]
    NoDistractors,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EncoderConfig {
    pub channels: usize,
    pub strides: Vec<usize>,
    pub kernels: Vec<usize>,
    pub sample_rate_hz: u32,
    pub context_dim: usize,
    pub latent_dim: usize,
}

impl EncoderConfig {
    pub fn base() -> Self {
        Self {
            channels: 512,
            strides: vec![5, 2, 2, 2, 2, 2, 2],
            kernels: vec![10, 3, 3, 3, 3, 2, 2],
            sample_rate_hz: 16_000,
            context_dim: 768,
            latent_dim: 512,
        }
    }

    pub fn large() -> Self {
        Self {
            context_dim: 1024,
            ..Self::base()
        }
    }

    pub fn validate(&self) -> Result<(), XlsrError> {
        if self.strides.len() != self.kernels.len() || self.strides.is_empty() {
            return Err(XlsrError::BadConfig(
                "strides and kernels must be non-empty and of equal length".into(),
            ));
        }
        if self.strides.iter().chain(&self.kernels).any(|&x| x == 0) {
            return Err(XlsrError::BadConfig("zero stride or kernel".into()));
        }
        Ok(())
    }

    /// Input samples between consecutive output frames.
    pub fn hop(&self) -> usize {
        self.strides.iter().product()
    }

    /// Input samples seen by one output frame.
    pub fn receptive_field(&self) -> usize {
        let mut field = 1;
        let mut jump = 1;
        for (&k, &s) in self.kernels.iter().zip(&self.strides) {
            field += (k - 1) * jump;
            jump *= s;
        }
        field
    }

    pub fn hop_ms(&self) -> f64 {
        self.hop() as f64 * 1000.0 / self.sample_rate_hz as f64
    }

    pub fn receptive_field_ms(&self) -> f64 {
        self.receptive_field() as f64 * 1000.0 / self.sample_rate_hz as f64
    }
}

impl Default for EncoderConfig {
    fn default() -> Self {
        Self::large()
    }
}

/// Output frames for `samples` input samples, chaining
/// `floor((len - kernel) / stride) + 1` through every layer.
pub fn frame_count(samples: usize, cfg: &EncoderConfig) -> Result<usize, XlsrError> {
    cfg.validate()?;
    let minimum = cfg.receptive_field();
    if samples < minimum {
        return Err(XlsrError::TooShort { samples, minimum });
    }
    let mut len = samples;
    for (&k, &s) in cfg.kernels.iter().zip(&cfg.strides) {
        len = (len - k) / s + 1;
    }
    Ok(len)
}

/// Parameters of the waveform feature extractor placed in front of the
/// encoder.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeatureExtractorConfig {
    pub feature_size: usize,
    pub sampling_rate: u32,
    pub padding_value: f32,
    pub do_normalize: bool,
    pub return_attention_mask: bool,
}

impl Default for FeatureExtractorConfig {
    fn default() -> Self {
        Self {
            feature_size: 1,
            sampling_rate: 16_000,
            padding_value: 0.0,
            do_normalize: true,
            return_attention_mask: true,
        }
    }
}

/// A padded batch of waveforms.
#[derive(Debug, Clone, PartialEq)]
pub struct PaddedBatch {
    pub values: Vec<Vec<f32>>,
    pub attention_mask: Option<Vec<Vec<u8>>>,
}

impl FeatureExtractorConfig {
    pub fn validate(&self) -> Result<(), XlsrError> {
        if self.feature_size != 1 {
            return Err(XlsrError::BadConfig(format!(
                "raw waveform input has feature_size 1, got {}",
                self.feature_size
            )));
        }
        if self.sampling_rate != 16_000 {
            return Err(XlsrError::BadConfig(format!(
                "sampling_rate must be 16000, got {}",
                self.sampling_rate
            )));
        }
        if !self.return_attention_mask {
            return Err(XlsrError::BadConfig(
                "return_attention_mask must be enabled for batched inference".into(),
            ));
        }
        if !self.padding_value.is_finite() {
            return Err(XlsrError::BadConfig("padding_value must be finite".into()));
        }
        Ok(())
    }

    /// Normalizes each waveform (when enabled) and right-pads to the
    /// longest one.
    pub fn prepare(&self, waveforms: &[Vec<f32>]) -> Result<PaddedBatch, XlsrError> {
        self.validate()?;
        let longest = waveforms.iter().map(Vec::len).max().unwrap_or(0);
        let mut values = Vec::with_capacity(waveforms.len());
        let mut masks = Vec::with_capacity(waveforms.len());
        for w in waveforms {
            let mut row = if self.do_normalize {
                zero_mean_unit_var(w)
            } else {
                w.clone()
            };
            let mut mask = vec![1u8; row.len()];
            row.resize(longest, self.padding_value);
            mask.resize(longest, 0);
            values.push(row);
            masks.push(mask);
        }
        Ok(PaddedBatch {
            values,
            attention_mask: self.return_attention_mask.then_some(masks),
        })
    }
}

pub fn zero_mean_unit_var(samples: &[f32]) -> Vec<f32> {
    if samples.is_empty() {
        return Vec::new();
    }
    let n = samples.len() as f64;
    let mean = samples.iter().map(|&x| x as f64).sum::<f64>() / n;
    let var = samples
        .iter()
        .map(|&x| (x as f64 - mean).powi(2))
        .sum::<f64>()
        / n;
    let scale = (var + 1e-7).sqrt();
    samples
        .iter()
        .map(|&x| ((x as f64 - mean) / scale) as f32)
        .collect()
}
