use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::loss::{apply_mask, contrastive_loss, diversity_loss, ContrastiveBatch, MaskConfig};
use super::quantizer::gumbel_softmax;
use super::{frame_count, EncoderConfig};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn result(name: &'static str, passed: bool, detail: String) -> CheckResult {
    CheckResult {
        name,
        passed,
        detail,
    }
}

fn random_vec(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

/// Unit vector with cosine `cos` to `c`, rotated toward a random direction.
fn at_angle(rng: &mut ChaCha8Rng, c: &[f64], cos: f64) -> Vec<f64> {
    let nc = c.iter().map(|x| x * x).sum::<f64>().sqrt();
    let c_hat: Vec<f64> = c.iter().map(|x| x / nc).collect();
    let mut u = random_vec(rng, c.len());
    let proj: f64 = u.iter().zip(&c_hat).map(|(a, b)| a * b).sum();
    for (x, h) in u.iter_mut().zip(&c_hat) {
        *x -= proj * h;
    }
    let nu = u.iter().map(|x| x * x).sum::<f64>().sqrt();
    let sin = (1.0 - cos * cos).sqrt();
    c_hat
        .iter()
        .zip(&u)
        .map(|(h, x)| cos * h + sin * x / nu)
        .collect()
}

fn random_batch(rng: &mut ChaCha8Rng, dim: usize, k: usize, temperature: f64) -> ContrastiveBatch {
    ContrastiveBatch {
        context: random_vec(rng, dim),
        positive: random_vec(rng, dim),
        distractors: (0..k).map(|_| random_vec(rng, dim)).collect(),
        temperature,
    }
}

/// Runs the frame-geometry, quantizer and loss invariants with one seed.
pub fn loss_check(seed: u64) -> Vec<CheckResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();

    let cfg = EncoderConfig::default();
    let f400 = frame_count(400, &cfg);
    let f16k = frame_count(16_000, &cfg);
    out.push(result(
        "frame_count",
        f400 == Ok(1) && f16k == Ok(49) && frame_count(399, &cfg).is_err(),
        format!("400 -> {f400:?}, 16000 -> {f16k:?}"),
    ));

    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let v = rng.gen_range(2..64);
        let logits = random_vec(&mut rng, v)
            .iter()
            .map(|x| x * 20.0)
            .collect::<Vec<_>>();
        let tau = rng.gen_range(0.05..5.0);
        let s = gumbel_softmax(&logits, tau, false, &mut rng).expect("positive tau");
        worst = worst.max((s.soft.iter().sum::<f64>() - 1.0).abs());
    }
    out.push(result(
        "gumbel_normalization",
        worst <= 1e-9,
        format!("max |sum - 1| = {worst:.2e}"),
    ));

    let hits = (0..1000)
        .filter(|_| {
            let s = gumbel_softmax(&[10.0, 0.0, 0.0], 0.01, true, &mut rng).expect("positive tau");
            s.index == 0 && s.soft[0] > 1.0 - 1e-9
        })
        .count();
    out.push(result(
        "gumbel_low_temperature",
        hits >= 999,
        format!("{hits}/1000 one-hot at index 0"),
    ));

    let c = random_vec(&mut rng, 8);
    let positive = at_angle(&mut rng, &c, 0.3);
    let distractors = (0..100).map(|_| at_angle(&mut rng, &c, 0.3)).collect();
    let equal = contrastive_loss(&ContrastiveBatch {
        context: c,
        positive,
        distractors,
        temperature: 0.1,
    })
    .map(|o| o.loss);
    let err = equal
        .as_ref()
        .map_or(f64::INFINITY, |l| (l - 101f64.ln()).abs());
    out.push(result(
        "contrastive_equal_similarity",
        err <= 1e-9,
        format!("|loss - ln 101| = {err:.2e}"),
    ));

    let mut worst = 0.0f64;
    for _ in 0..50 {
        let batch = random_batch(&mut rng, 8, 100, 0.1);
        let analytic = contrastive_loss(&batch).expect("nonzero vectors").grad;
        let h = 1e-5;
        let numeric: Vec<f64> = (0..8)
            .map(|i| {
                let mut plus = batch.clone();
                plus.context[i] += h;
                let mut minus = batch.clone();
                minus.context[i] -= h;
                let lp = contrastive_loss(&plus).expect("nonzero vectors").loss;
                let lm = contrastive_loss(&minus).expect("nonzero vectors").loss;
                (lp - lm) / (2.0 * h)
            })
            .collect();
        let scale = analytic.iter().map(|x| x.abs()).fold(1e-8, f64::max);
        let diff = analytic
            .iter()
            .zip(&numeric)
            .map(|(a, n)| (a - n).abs())
            .fold(0.0, f64::max);
        worst = worst.max(diff / scale);
    }
    out.push(result(
        "contrastive_gradient",
        worst < 1e-4,
        format!("max relative error = {worst:.2e}"),
    ));

    let c = random_vec(&mut rng, 8);
    let distractors: Vec<Vec<f64>> = (0..10).map(|_| at_angle(&mut rng, &c, 0.2)).collect();
    let loss_at = |pos_cos: f64, neg_cos: f64, rng: &mut ChaCha8Rng| {
        let mut ds = distractors.clone();
        ds[0] = at_angle(rng, &c, neg_cos);
        contrastive_loss(&ContrastiveBatch {
            context: c.clone(),
            positive: at_angle(rng, &c, pos_cos),
            distractors: ds,
            temperature: 0.5,
        })
        .expect("nonzero vectors")
        .loss
    };
    let mut monotone = true;
    for step in 0..10 {
        let lo = -0.9 + 0.18 * step as f64;
        let hi = lo + 0.18;
        monotone &= loss_at(hi, 0.2, &mut rng) < loss_at(lo, 0.2, &mut rng);
        monotone &= loss_at(0.2, hi, &mut rng) > loss_at(0.2, lo, &mut rng);
    }
    out.push(result(
        "contrastive_monotone",
        monotone,
        "decreasing in positive, increasing in negative similarity".into(),
    ));

    let uniform = diversity_loss(&[vec![1.0 / 320.0; 320], vec![1.0 / 320.0; 320]]);
    let mut one_hot = vec![0.0; 320];
    one_hot[17] = 1.0;
    let collapsed = diversity_loss(&[one_hot.clone(), one_hot]);
    let mut in_bounds = true;
    for _ in 0..200 {
        let raw: Vec<f64> = (0..16).map(|_| rng.gen::<f64>().powi(4)).collect();
        let s: f64 = raw.iter().sum();
        let p: Vec<f64> = raw.iter().map(|x| x / s).collect();
        let l = diversity_loss(&[p.clone(), p]).expect("normalized");
        in_bounds &= (0.0..=2.0).contains(&l);
    }
    out.push(result(
        "diversity_bounds",
        matches!(uniform, Ok(u) if u.abs() < 1e-12)
            && matches!(collapsed, Ok(c) if (c - 2.0).abs() < 1e-12)
            && in_bounds,
        format!("uniform {uniform:?}, collapsed {collapsed:?}"),
    ));

    let mask = MaskConfig::default();
    let latents = vec![0.0; 1000];
    let mean = (0..200)
        .map(|_| {
            apply_mask(&latents, 1, &mask, &[1.0], &mut rng)
                .expect("valid mask")
                .coverage()
        })
        .sum::<f64>()
        / 200.0;
    out.push(result(
        "mask_coverage",
        (0.45..=0.55).contains(&mean),
        format!("mean coverage {mean:.4}"),
    ));

    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_checks_pass() {
        for seed in [0, 53, 1234] {
            for r in loss_check(seed) {
                assert!(r.passed, "seed {seed}: {} ({})", r.name, r.detail);
            }
        }
    }

    #[test]
    fn deterministic() {
        assert_eq!(loss_check(7), loss_check(7));
    }
}
