use rand::distributions::Open01;
use rand::Rng;
use serde::Serialize;

use super::XlsrError;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuantizerConfig {
    pub groups: usize,
    pub entries_per_group: usize,
    pub temperature: f64,
    /// Length of the concatenated quantized vector; each group contributes
    /// `codeword_dim / groups`.
    pub codeword_dim: usize,
}

impl Default for QuantizerConfig {
    fn default() -> Self {
        Self {
            groups: 2,
            entries_per_group: 320,
            temperature: 2.0,
            codeword_dim: 256,
        }
    }
}

impl QuantizerConfig {
    pub fn validate(&self) -> Result<(), XlsrError> {
        if self.groups == 0 || self.entries_per_group == 0 {
            return Err(XlsrError::BadConfig(
                "groups and entries must be positive".into(),
            ));
        }
        if self.codeword_dim == 0 || !self.codeword_dim.is_multiple_of(self.groups) {
            return Err(XlsrError::BadConfig(format!(
                "codeword_dim {} is not a positive multiple of {} groups",
                self.codeword_dim, self.groups
            )));
        }
        if !(self.temperature > 0.0) {
            return Err(XlsrError::BadTemperature(self.temperature));
        }
        Ok(())
    }

    /// Distinct quantized vectors reachable: `V^G`.
    pub fn unit_count(&self) -> u128 {
        (self.entries_per_group as u128).pow(self.groups as u32)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GumbelSample {
    pub soft: Vec<f64>,
    pub index: usize,
    /// One-hot at `index`, present in hard mode.
    pub hard: Option<Vec<f64>>,
}

/// Standard Gumbel draws `-ln(-ln u)` with `u` in the open unit interval.
pub fn gumbel_noise<R: Rng + ?Sized>(len: usize, rng: &mut R) -> Vec<f64> {
    (0..len)
        .map(|_| {
            let u: f64 = rng.sample(Open01);
            -(-u.ln()).ln()
        })
        .collect()
}

/// Softmax of `(logits + noise) / tau`.
pub fn gumbel_softmax_with_noise(
    logits: &[f64],
    noise: &[f64],
    tau: f64,
    hard: bool,
) -> Result<GumbelSample, XlsrError> {
    if !(tau > 0.0) {
        return Err(XlsrError::BadTemperature(tau));
    }
    if noise.len() != logits.len() {
        return Err(XlsrError::DimensionMismatch {
            expected: logits.len(),
            found: noise.len(),
        });
    }
    if logits.is_empty() {
        return Err(XlsrError::DimensionMismatch {
            expected: 1,
            found: 0,
        });
    }
    let scaled: Vec<f64> = logits
        .iter()
        .zip(noise)
        .map(|(l, g)| (l + g) / tau)
        .collect();
    let mut index = 0;
    for (i, &x) in scaled.iter().enumerate() {
        if x > scaled[index] {
            index = i;
        }
    }
    let max = scaled[index];
    let exps: Vec<f64> = scaled.iter().map(|x| (x - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    let soft = exps.into_iter().map(|e| e / total).collect();
    let hard = hard.then(|| {
        let mut one_hot = vec![0.0; logits.len()];
        one_hot[index] = 1.0;
        one_hot
    });
    Ok(GumbelSample { soft, index, hard })
}

pub fn gumbel_softmax<R: Rng + ?Sized>(
    logits: &[f64],
    tau: f64,
    hard: bool,
    rng: &mut R,
) -> Result<GumbelSample, XlsrError> {
    let noise = gumbel_noise(logits.len(), rng);
    gumbel_softmax_with_noise(logits, &noise, tau, hard)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Quantized {
    pub q: Vec<f64>,
    pub indices: Vec<usize>,
    /// Soft distribution per group.
    pub probs: Vec<Vec<f64>>,
}

/// Linear logit map plus per-group codebooks.
#[derive(Debug, Clone, PartialEq)]
pub struct Quantizer {
    cfg: QuantizerConfig,
    latent_dim: usize,
    /// `(G*V) x latent_dim`, row-major.
    weight: Vec<f64>,
    bias: Vec<f64>,
    /// `G x V x (codeword_dim / G)`.
    codebooks: Vec<f64>,
}

impl Quantizer {
    pub fn new(
        cfg: QuantizerConfig,
        latent_dim: usize,
        weight: Vec<f64>,
        bias: Vec<f64>,
        codebooks: Vec<f64>,
    ) -> Result<Self, XlsrError> {
        cfg.validate()?;
        let units = cfg.groups * cfg.entries_per_group;
        let check = |expected: usize, found: usize| {
            if expected == found {
                Ok(())
            } else {
                Err(XlsrError::DimensionMismatch { expected, found })
            }
        };
        check(units * latent_dim, weight.len())?;
        check(units, bias.len())?;
        check(units * cfg.codeword_dim / cfg.groups, codebooks.len())?;
        Ok(Self {
            cfg,
            latent_dim,
            weight,
            bias,
            codebooks,
        })
    }

    /// Weights and codewords drawn uniformly from [-1, 1); zero bias.
    pub fn random<R: Rng + ?Sized>(
        cfg: QuantizerConfig,
        latent_dim: usize,
        rng: &mut R,
    ) -> Result<Self, XlsrError> {
        cfg.validate()?;
        let units = cfg.groups * cfg.entries_per_group;
        let mut draw =
            |n: usize| -> Vec<f64> { (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect() };
        let weight = draw(units * latent_dim);
        let codebooks = draw(units * cfg.codeword_dim / cfg.groups);
        Self::new(cfg, latent_dim, weight, vec![0.0; units], codebooks)
    }

    pub fn config(&self) -> &QuantizerConfig {
        &self.cfg
    }

    fn sub_dim(&self) -> usize {
        self.cfg.codeword_dim / self.cfg.groups
    }

    pub fn codeword(&self, group: usize, entry: usize) -> &[f64] {
        let d = self.sub_dim();
        let start = (group * self.cfg.entries_per_group + entry) * d;
        &self.codebooks[start..start + d]
    }

    pub fn logits(&self, z: &[f64]) -> Result<Vec<f64>, XlsrError> {
        if z.len() != self.latent_dim {
            return Err(XlsrError::DimensionMismatch {
                expected: self.latent_dim,
                found: z.len(),
            });
        }
        Ok(self
            .weight
            .chunks_exact(self.latent_dim)
            .zip(&self.bias)
            .map(|(row, b)| b + row.iter().zip(z).map(|(w, x)| w * x).sum::<f64>())
            .collect())
    }

    /// Hard Gumbel-Softmax selection of one codeword per group, concatenated.
    pub fn quantize<R: Rng + ?Sized>(
        &self,
        z: &[f64],
        rng: &mut R,
    ) -> Result<Quantized, XlsrError> {
        let logits = self.logits(z)?;
        let v = self.cfg.entries_per_group;
        let mut q = Vec::with_capacity(self.cfg.codeword_dim);
        let mut indices = Vec::with_capacity(self.cfg.groups);
        let mut probs = Vec::with_capacity(self.cfg.groups);
        for (g, group_logits) in logits.chunks_exact(v).enumerate() {
            let sample = gumbel_softmax(group_logits, self.cfg.temperature, true, rng)?;
            q.extend_from_slice(self.codeword(g, sample.index));
            indices.push(sample.index);
            probs.push(sample.soft);
        }
        Ok(Quantized { q, indices, probs })
    }
}
