use rand::Rng;

use super::XlsrError;

pub const DEFAULT_DISTRACTORS: usize = 100;

/// Span masking: every frame starts a span of `span` frames with
/// probability `start_prob`; overlapping spans merge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaskConfig {
    pub start_prob: f64,
    pub span: usize,
}

impl MaskConfig {
    /// Start probability giving `coverage` for frames away from the edges:
    /// solves `1 - (1 - p)^span = coverage`.
    pub fn with_coverage(coverage: f64, span: usize) -> Self {
        Self {
            start_prob: 1.0 - (1.0 - coverage).powf(1.0 / span as f64),
            span,
        }
    }

    pub fn expected_coverage(&self) -> f64 {
        1.0 - (1.0 - self.start_prob).powi(self.span as i32)
    }

    fn validate(&self) -> Result<(), XlsrError> {
        if !(self.start_prob > 0.0 && self.start_prob < 1.0) || self.span == 0 {
            return Err(XlsrError::BadConfig(format!(
                "mask needs 0 < p < 1 and span >= 1, got p = {}, span = {}",
                self.start_prob, self.span
            )));
        }
        Ok(())
    }
}

impl Default for MaskConfig {
    fn default() -> Self {
        Self::with_coverage(0.5, 10)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Masked {
    pub latents: Vec<f64>,
    pub mask: Vec<bool>,
}

impl Masked {
    pub fn coverage(&self) -> f64 {
        self.mask.iter().filter(|&&m| m).count() as f64 / self.mask.len().max(1) as f64
    }
}

/// Replaces masked rows of the `T x dim` matrix `latents` with `fill`.
pub fn apply_mask<R: Rng + ?Sized>(
    latents: &[f64],
    dim: usize,
    cfg: &MaskConfig,
    fill: &[f64],
    rng: &mut R,
) -> Result<Masked, XlsrError> {
    cfg.validate()?;
    if fill.len() != dim {
        return Err(XlsrError::DimensionMismatch {
            expected: dim,
            found: fill.len(),
        });
    }
    if dim == 0 || !latents.len().is_multiple_of(dim) {
        return Err(XlsrError::DimensionMismatch {
            expected: dim,
            found: latents.len(),
        });
    }
    let frames = latents.len() / dim;
    let mut mask = vec![false; frames];
    for t in 0..frames {
        if rng.gen_bool(cfg.start_prob) {
            for m in &mut mask[t..(t + cfg.span).min(frames)] {
                *m = true;
            }
        }
    }
    let mut out = latents.to_vec();
    for (row, _) in out.chunks_exact_mut(dim).zip(&mask).filter(|(_, &m)| m) {
        row.copy_from_slice(fill);
    }
    Ok(Masked { latents: out, mask })
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn cosine_similarity(a: &[f64], b: &[f64]) -> Result<f64, XlsrError> {
    if a.len() != b.len() {
        return Err(XlsrError::DimensionMismatch {
            expected: a.len(),
            found: b.len(),
        });
    }
    let (na, nb) = (norm(a), norm(b));
    if na == 0.0 || nb == 0.0 {
        return Err(XlsrError::ZeroVector);
    }
    Ok(dot(a, b) / (na * nb))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContrastiveBatch {
    pub context: Vec<f64>,
    pub positive: Vec<f64>,
    pub distractors: Vec<Vec<f64>>,
    pub temperature: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContrastiveOutput {
    pub loss: f64,
    /// Gradient of the loss with respect to the context vector.
    pub grad: Vec<f64>,
}

/// Cross-entropy of the positive target under a softmax over temperature-
/// scaled cosine similarities.
pub fn contrastive_loss(batch: &ContrastiveBatch) -> Result<ContrastiveOutput, XlsrError> {
    if batch.distractors.is_empty() {
        return Err(XlsrError::NoDistractors);
    }
    if !(batch.temperature > 0.0) {
        return Err(XlsrError::BadTemperature(batch.temperature));
    }
    let c = &batch.context;
    let nc = norm(c);
    if nc == 0.0 {
        return Err(XlsrError::ZeroVector);
    }
    let targets: Vec<&[f64]> = std::iter::once(batch.positive.as_slice())
        .chain(batch.distractors.iter().map(Vec::as_slice))
        .collect();
    let sims = targets
        .iter()
        .map(|q| cosine_similarity(c, q))
        .collect::<Result<Vec<f64>, _>>()?;
    let logits: Vec<f64> = sims.iter().map(|s| s / batch.temperature).collect();
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    let loss = max + total.ln() - logits[0];

    // d cos(c, q) / dc = q / (|c||q|) - cos * c / |c|^2
    let mut grad = vec![0.0; c.len()];
    for (i, q) in targets.iter().enumerate() {
        let weight = (exps[i] / total - if i == 0 { 1.0 } else { 0.0 }) / batch.temperature;
        if weight == 0.0 {
            continue;
        }
        let nq = norm(q);
        for (g, (&ci, &qi)) in grad.iter_mut().zip(c.iter().zip(q.iter())) {
            *g += weight * (qi / (nc * nq) - sims[i] * ci / (nc * nc));
        }
    }
    Ok(ContrastiveOutput { loss, grad })
}

/// Element-wise mean of per-sample group distributions
/// (`samples[b][g][v]`).
pub fn batch_average(samples: &[Vec<Vec<f64>>]) -> Result<Vec<Vec<f64>>, XlsrError> {
    let first = samples.first().ok_or(XlsrError::DimensionMismatch {
        expected: 1,
        found: 0,
    })?;
    let mut acc: Vec<Vec<f64>> = first.iter().map(|g| vec![0.0; g.len()]).collect();
    for s in samples {
        if s.len() != acc.len() {
            return Err(XlsrError::DimensionMismatch {
                expected: acc.len(),
                found: s.len(),
            });
        }
        for (a, g) in acc.iter_mut().zip(s) {
            if g.len() != a.len() {
                return Err(XlsrError::DimensionMismatch {
                    expected: a.len(),
                    found: g.len(),
                });
            }
            for (x, y) in a.iter_mut().zip(g) {
                *x += y;
            }
        }
    }
    let n = samples.len() as f64;
    for a in &mut acc {
        for x in a.iter_mut() {
            *x /= n;
        }
    }
    Ok(acc)
}

/// `sum_g (1 - H(p_g) / ln V)` over batch-averaged group distributions.
pub fn diversity_loss(groups: &[Vec<f64>]) -> Result<f64, XlsrError> {
    let mut loss = 0.0;
    for (g, p) in groups.iter().enumerate() {
        if p.len() < 2 {
            return Err(XlsrError::DimensionMismatch {
                expected: 2,
                found: p.len(),
            });
        }
        let sum: f64 = p.iter().sum();
        if (sum - 1.0).abs() > 1e-6 || p.iter().any(|&x| x < 0.0 || x.is_nan()) {
            return Err(XlsrError::NotNormalized { group: g, sum });
        }
        let entropy: f64 = -p
            .iter()
            .filter(|&&x| x > 0.0)
            .map(|&x| x * x.ln())
            .sum::<f64>();
        loss += 1.0 - entropy / (p.len() as f64).ln();
    }
    Ok(loss)
}
