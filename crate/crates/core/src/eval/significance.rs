use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::SeededRng;

/// Largest number of languages for which every flip pattern is enumerated.
pub const MAX_EXACT_LANGUAGES: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignificanceResult {
    /// |mean(a) − mean(b)|
    pub observed: f64,
    pub p_value: f64,
    /// Samples drawn, or flip patterns enumerated when exact.
    pub iters: u64,
    pub seed: Option<u64>,
}

fn differences(a: &[f64], b: &[f64]) -> Result<Vec<f64>> {
    if a.len() != b.len() {
        return Err(Error::Input(format!(
            "{} scores against {}",
            a.len(),
            b.len()
        )));
    }
    if a.is_empty() {
        return Err(Error::Input("no scores to compare".into()));
    }
    Ok(a.iter().zip(b).map(|(x, y)| x - y).collect())
}

/// A sample counts as extreme when it is at least the observed statistic,
/// allowing for rounding in the summation.
fn at_least(sample: f64, observed: f64) -> bool {
    sample >= observed - 1e-12 * observed.max(1.0)
}

/// Two-sided paired randomization test: each iteration swaps the two
/// systems' scores for each language with probability 1/2, and the p-value
/// is the share of samples whose |mean difference| reaches the observed one.
pub fn mc_significance(a: &[f64], b: &[f64], iters: u64, seed: u64) -> Result<SignificanceResult> {
    let d = differences(a, b)?;
    if iters == 0 {
        return Err(Error::Input("iters must be at least 1".into()));
    }
    let n = d.len() as f64;
    let observed = (d.iter().sum::<f64>() / n).abs();
    let mut rng = SeededRng::new(seed);
    let mut hits = 0u64;
    for _ in 0..iters {
        let mut total = 0.0;
        for &x in &d {
            total += if rng.coin(0.5) { -x } else { x };
        }
        if at_least((total / n).abs(), observed) {
            hits += 1;
        }
    }
    Ok(SignificanceResult {
        observed,
        p_value: hits as f64 / iters as f64,
        iters,
        seed: Some(seed),
    })
}

/// The same test with every one of the 2^n swap patterns enumerated.
pub fn exact_significance(a: &[f64], b: &[f64]) -> Result<SignificanceResult> {
    let d = differences(a, b)?;
    if d.len() > MAX_EXACT_LANGUAGES {
        return Err(Error::Input(format!(
            "exact test supports at most {MAX_EXACT_LANGUAGES} languages"
        )));
    }
    let n = d.len() as f64;
    let observed = (d.iter().sum::<f64>() / n).abs();
    let patterns = 1u64 << d.len();
    let mut hits = 0u64;
    for mask in 0..patterns {
        let total: f64 = d
            .iter()
            .enumerate()
            .map(|(i, &x)| if mask >> i & 1 == 1 { -x } else { x })
            .sum();
        if at_least((total / n).abs(), observed) {
            hits += 1;
        }
    }
    Ok(SignificanceResult {
        observed,
        p_value: hits as f64 / patterns as f64,
        iters: patterns,
        seed: None,
    })
}

/// One score per non-empty line; with tab-separated columns the last one is
/// the score.
pub fn parse_scores(text: &str) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let field = line.rsplit('\t').next().unwrap_or(line).trim();
        let v: f64 = field
            .parse()
            .map_err(|_| Error::parse(i + 1, format!("not a number: {field:?}")))?;
        if !v.is_finite() {
            return Err(Error::parse(i + 1, "score must be finite"));
        }
        out.push(v);
    }
    Ok(out)
}
