use std::collections::HashMap;

use super::counts::NGramCounts;
use super::model::{NGramModel, OrderTable};
use super::{LmError, LOG10_ZERO};

/// Discount used when counts-of-counts cannot support the closed-form
/// estimates.
pub const FALLBACK_DISCOUNT: f64 = 0.75;

const MASS_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Smoothing {
    /// Interpolated modified Kneser-Ney with three discounts per order.
    ModifiedKneserNey,
    /// Add-k on observed events, leftover mass routed through backoff.
    AddK(f64),
}

#[derive(Debug, Clone)]
pub struct Estimate {
    pub model: NGramModel,
    /// Per-order discounts `[D1, D2, D3+]`; empty for add-k.
    pub discounts: Vec<[f64; 3]>,
    pub warnings: Vec<String>,
}

fn to_log10(p: f64) -> f32 {
    if p <= 0.0 {
        LOG10_ZERO
    } else {
        (p.log10() as f32).clamp(LOG10_ZERO, 0.0)
    }
}

fn backoff_log10(weight: f64) -> f32 {
    if weight <= MASS_EPS {
        LOG10_ZERO
    } else {
        weight.log10() as f32
    }
}

pub fn estimate(counts: &NGramCounts, smoothing: Smoothing) -> Result<Estimate, LmError> {
    match smoothing {
        Smoothing::ModifiedKneserNey => Ok(kneser_ney(counts)),
        Smoothing::AddK(k) if k >= 0.0 && k.is_finite() => Ok(add_k(counts, k)),
        Smoothing::AddK(k) => Err(LmError::BadSmoothing(format!("k = {k}"))),
    }
}

/// Counts used for discounting: raw counts at the top order and for n-grams
/// starting with `<s>`, otherwise the number of distinct left extensions.
fn adjusted_counts(counts: &NGramCounts) -> Vec<HashMap<Vec<u32>, u64>> {
    let order = counts.order;
    let mut adjusted = vec![HashMap::new(); order];
    adjusted[order - 1] = counts.counts[order - 1].clone();
    for n in (1..order).rev() {
        let mut continuation: HashMap<&[u32], u64> = HashMap::new();
        for gram in counts.counts[n].keys() {
            let suffix = &gram[1..];
            if suffix[0] != NGramCounts::BOS_ID {
                *continuation.entry(suffix).or_insert(0) += 1;
            }
        }
        adjusted[n - 1] = counts.counts[n - 1]
            .iter()
            .map(|(gram, &raw)| {
                let a = if gram[0] == NGramCounts::BOS_ID {
                    raw
                } else {
                    continuation.get(gram.as_slice()).copied().unwrap_or(0)
                };
                (gram.clone(), a)
            })
            .collect();
    }
    adjusted
}

fn discounts_for(adjusted: &HashMap<Vec<u32>, u64>, n: usize) -> Result<[f64; 3], String> {
    let mut t = [0u64; 5];
    for (gram, &a) in adjusted {
        if n == 1 && gram[0] == NGramCounts::BOS_ID {
            continue;
        }
        if (1..=4).contains(&a) {
            t[a as usize] += 1;
        }
    }
    if let Some(k) = (1..=4).find(|&k| t[k] == 0) {
        return Err(format!(
            "order {n}: no n-grams with adjusted count {k}; using fixed discount {FALLBACK_DISCOUNT}"
        ));
    }
    let tf = t.map(|x| x as f64);
    let y = tf[1] / (tf[1] + 2.0 * tf[2]);
    let mut d = [0.0; 3];
    for k in 1..=3 {
        let kf = k as f64;
        d[k - 1] = kf - (kf + 1.0) * y * tf[k + 1] / tf[k];
        if !(d[k - 1] > 0.0 && d[k - 1] < kf) {
            return Err(format!(
                "order {n}: discount D{k} = {:.4} out of range; using fixed discount {FALLBACK_DISCOUNT}",
                d[k - 1]
            ));
        }
    }
    Ok(d)
}

fn discount(d: &[f64; 3], a: u64) -> f64 {
    match a {
        0 => 0.0,
        1 => d[0],
        2 => d[1],
        _ => d[2],
    }
}

/// Groups n-gram keys by their history (all but the last word).
fn by_history<V: Copy>(grams: &HashMap<Vec<u32>, V>) -> HashMap<&[u32], Vec<(u32, V)>> {
    let mut groups: HashMap<&[u32], Vec<(u32, V)>> = HashMap::new();
    for (gram, &v) in grams {
        let (last, hist) = gram.split_last().expect("n-grams are non-empty");
        groups.entry(hist).or_default().push((*last, v));
    }
    groups
}

fn kneser_ney(counts: &NGramCounts) -> Estimate {
    let order = counts.order;
    let vocab_size = (counts.vocab.len() - 1) as f64;
    let adjusted = adjusted_counts(counts);
    let mut warnings = Vec::new();
    let discounts: Vec<[f64; 3]> = (1..=order)
        .map(|n| {
            discounts_for(&adjusted[n - 1], n).unwrap_or_else(|w| {
                warnings.push(w);
                [FALLBACK_DISCOUNT; 3]
            })
        })
        .collect();

    // Interpolated probabilities per order, plus the interpolation weight of
    // every history that has continuations.
    let mut probs: Vec<HashMap<Vec<u32>, f64>> = Vec::with_capacity(order);
    let mut gammas: Vec<HashMap<Vec<u32>, f64>> = Vec::with_capacity(order);

    let d = &discounts[0];
    let uni = &adjusted[0];
    let mut total = 0.0;
    let mut mass = 0.0;
    for (gram, &a) in uni {
        if gram[0] != NGramCounts::BOS_ID {
            total += a as f64;
            mass += discount(d, a);
        }
    }
    let gamma0 = mass / total;
    let mut p1 = HashMap::with_capacity(counts.vocab.len());
    for id in 0..counts.vocab.len() as u32 {
        if id == NGramCounts::BOS_ID {
            continue;
        }
        let a = uni.get(&vec![id]).copied().unwrap_or(0);
        let p = (a as f64 - discount(d, a)) / total + gamma0 / vocab_size;
        p1.insert(vec![id], p);
    }
    probs.push(p1);
    gammas.push(HashMap::from([(Vec::new(), gamma0)]));

    for n in 2..=order {
        let d = &discounts[n - 1];
        let mut pn = HashMap::with_capacity(adjusted[n - 1].len());
        let mut gn = HashMap::new();
        for (hist, conts) in by_history(&adjusted[n - 1]) {
            let total: f64 = conts.iter().map(|&(_, a)| a as f64).sum();
            let mass: f64 = conts.iter().map(|&(_, a)| discount(d, a)).sum();
            let gamma = mass / total;
            for &(w, a) in &conts {
                let mut lower = hist[1..].to_vec();
                lower.push(w);
                let p_lower = probs[n - 2][&lower];
                let mut gram = hist.to_vec();
                gram.push(w);
                pn.insert(gram, (a as f64 - discount(d, a)) / total + gamma * p_lower);
            }
            gn.insert(hist.to_vec(), gamma);
        }
        probs.push(pn);
        gammas.push(gn);
    }

    let tables = (1..=order)
        .map(|n| {
            let mut entries: Vec<(Vec<u32>, f32, f32)> = probs[n - 1]
                .iter()
                .map(|(gram, &p)| {
                    let backoff = gammas
                        .get(n)
                        .and_then(|g| g.get(gram))
                        .map_or(0.0, |&w| backoff_log10(w));
                    (gram.clone(), to_log10(p), backoff)
                })
                .collect();
            if n == 1 {
                let backoff = gammas
                    .get(1)
                    .and_then(|g| g.get(&vec![NGramCounts::BOS_ID]))
                    .map_or(0.0, |&w| backoff_log10(w));
                entries.push((vec![NGramCounts::BOS_ID], LOG10_ZERO, backoff));
            }
            OrderTable::new(n, entries)
        })
        .collect();

    Estimate {
        model: NGramModel::from_tables(counts.vocab.clone(), tables),
        discounts,
        warnings,
    }
}

fn add_k(counts: &NGramCounts, k: f64) -> Estimate {
    let order = counts.order;
    let vocab_size = (counts.vocab.len() - 1) as f64;
    let mut tables = Vec::with_capacity(order);

    let uni = &counts.counts[0];
    let total: f64 = uni
        .iter()
        .filter(|(g, _)| g[0] != NGramCounts::BOS_ID)
        .map(|(_, &c)| c as f64)
        .sum::<f64>()
        + k * vocab_size;
    let mut entries = vec![(vec![NGramCounts::BOS_ID], LOG10_ZERO, 0.0)];
    for id in 0..counts.vocab.len() as u32 {
        if id == NGramCounts::BOS_ID {
            continue;
        }
        let c = uni.get(&vec![id]).copied().unwrap_or(0) as f64;
        let p = (c + k) / total;
        if p > 0.0 {
            entries.push((vec![id], to_log10(p), 0.0));
        }
    }
    tables.push(OrderTable::new(1, entries));

    for n in 2..=order {
        let mut entries = Vec::with_capacity(counts.counts[n - 1].len());
        for (hist, conts) in by_history(&counts.counts[n - 1]) {
            let total: f64 = conts.iter().map(|&(_, c)| c as f64).sum::<f64>() + k * vocab_size;
            for &(w, c) in &conts {
                let mut gram = hist.to_vec();
                gram.push(w);
                entries.push((gram, to_log10((c as f64 + k) / total), 0.0));
            }
        }
        tables.push(OrderTable::new(n, entries));
    }

    let mut model = NGramModel::from_tables(counts.vocab.clone(), tables);
    let warnings = renormalize_backoffs(&mut model);
    Estimate {
        model,
        discounts: Vec::new(),
        warnings,
    }
}

/// Sets every backoff weight so that each history's conditional distribution
/// sums to one given the stored probabilities. Processes orders bottom-up.
pub(crate) fn renormalize_backoffs(model: &mut NGramModel) -> Vec<String> {
    let mut warnings = Vec::new();
    for n in 2..=model.order() {
        let updates: Vec<f32> = {
            let hist_table = &model.tables()[n - 2];
            let table = &model.tables()[n - 1];
            (0..hist_table.len())
                .map(|i| {
                    let hist = hist_table.key(i);
                    let range = table.prefix_range(hist);
                    if range.is_empty() {
                        return 0.0;
                    }
                    let mut seen = 0.0f64;
                    let mut lower = 0.0f64;
                    for j in range {
                        let w = table.key(j)[n - 1];
                        seen += 10f64.powf(table.prob(j) as f64);
                        lower += 10f64.powf(model.score_ids(&hist[1..], w));
                    }
                    let num = 1.0 - seen;
                    let den = 1.0 - lower;
                    if num <= MASS_EPS {
                        LOG10_ZERO
                    } else if den <= MASS_EPS {
                        warnings.push(format!(
                            "history {:?} has {num:.3e} unassigned mass but no lower-order room",
                            hist.iter().map(|&id| model.word(id)).collect::<Vec<_>>()
                        ));
                        LOG10_ZERO
                    } else {
                        backoff_log10(num / den)
                    }
                })
                .collect()
        };
        let hist_table = &mut model.tables_mut()[n - 2];
        for (i, b) in updates.into_iter().enumerate() {
            hist_table.set_backoff(i, b);
        }
    }
    warnings
}

/// Drops n-grams of order two and above whose raw count is at most
/// `threshold`, keeping any that serve as a history for a surviving
/// higher-order entry, then renormalizes backoffs.
pub fn prune(
    model: &NGramModel,
    counts: &NGramCounts,
    threshold: u64,
) -> (NGramModel, Vec<String>) {
    let order = model.order();
    let mut kept: Vec<Vec<(Vec<u32>, f32, f32)>> = vec![Vec::new(); order];
    kept[0] = model.tables()[0]
        .iter()
        .map(|(k, p, b)| (k.to_vec(), p, b))
        .collect();
    let mut needed: std::collections::HashSet<Vec<u32>> = Default::default();
    for n in (2..=order).rev() {
        let mut next_needed = std::collections::HashSet::new();
        for (key, p, b) in model.tables()[n - 1].iter() {
            let raw = counts.counts[n - 1].get(key).copied().unwrap_or(0);
            if raw > threshold || needed.contains(key) {
                kept[n - 1].push((key.to_vec(), p, b));
                next_needed.insert(key[..n - 1].to_vec());
            }
        }
        needed = next_needed;
    }
    let tables = kept
        .into_iter()
        .enumerate()
        .map(|(i, e)| OrderTable::new(i + 1, e))
        .collect();
    let mut pruned = NGramModel::from_tables(model.words().to_vec(), tables);
    let warnings = renormalize_backoffs(&mut pruned);
    (pruned, warnings)
}
