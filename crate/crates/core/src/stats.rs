//! Two-sample comparison: Mann-Whitney U and Cliff's delta.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

/// Both samples at or below this size use the exact null distribution.
pub const EXACT_LIMIT: usize = 7;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MannWhitney {
    /// U of the first sample: wins over the second, ties counting one half.
    pub u: f64,
    /// Two-sided p-value.
    pub p: f64,
    pub exact: bool,
}

fn check(a: &[f64], b: &[f64]) -> Result<()> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Contract("both samples must be non-empty".into()));
    }
    if a.iter().chain(b).any(|x| x.is_nan()) {
        return Err(Error::Contract("samples contain NaN".into()));
    }
    Ok(())
}

/// Twice the U statistic, kept integral so ties stay exact.
fn u2(a: &[f64], b: &[f64]) -> i64 {
    a.iter()
        .flat_map(|x| b.iter().map(move |y| (x, y)))
        .map(|(x, y)| match x.partial_cmp(y) {
            Some(std::cmp::Ordering::Greater) => 2,
            Some(std::cmp::Ordering::Equal) => 1,
            _ => 0,
        })
        .sum()
}

/// Walks every way of choosing `n` of the pooled values as the first
/// sample, calling `f` with twice its U statistic.
fn for_each_split(pooled: &[f64], n: usize, f: &mut impl FnMut(i64)) {
    fn rec(pooled: &[f64], n: usize, start: usize, picked: &mut Vec<usize>, f: &mut impl FnMut(i64)) {
        if picked.len() == n {
            let mut rest = Vec::with_capacity(pooled.len() - n);
            let mut first = Vec::with_capacity(n);
            for (i, &v) in pooled.iter().enumerate() {
                if picked.contains(&i) {
                    first.push(v);
                } else {
                    rest.push(v);
                }
            }
            f(u2(&first, &rest));
            return;
        }
        for i in start..=pooled.len() - (n - picked.len()) {
            picked.push(i);
            rec(pooled, n, i + 1, picked, f);
            picked.pop();
        }
    }
    rec(pooled, n, 0, &mut Vec::with_capacity(n), f);
}

fn exact_p(a: &[f64], b: &[f64], u2_obs: i64) -> f64 {
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let mid2 = (a.len() * b.len()) as i64;
    let dev = (u2_obs - mid2).abs();
    let (mut hits, mut total) = (0u64, 0u64);
    for_each_split(&pooled, a.len(), &mut |u| {
        total += 1;
        if (u - mid2).abs() >= dev {
            hits += 1;
        }
    });
    hits as f64 / total as f64
}

fn normal_p(a: &[f64], b: &[f64], u: f64) -> f64 {
    let (n, m) = (a.len() as f64, b.len() as f64);
    let total = n + m;
    let mut pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    pooled.sort_by(f64::total_cmp);
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < pooled.len() {
        let j = pooled[i..].iter().take_while(|&&v| v == pooled[i]).count();
        let t = j as f64;
        tie_term += t * t * t - t;
        i += j;
    }
    let var = n * m / 12.0 * ((total + 1.0) - tie_term / (total * (total - 1.0)));
    if var <= 0.0 {
        return 1.0;
    }
    let z = ((u - n * m / 2.0).abs() - 0.5).max(0.0) / var.sqrt();
    let std = Normal::new(0.0, 1.0).expect("unit normal");
    (2.0 * (1.0 - std.cdf(z))).clamp(0.0, 1.0)
}

/// Two-sided Mann-Whitney U test. Exact when both samples have at most
/// [`EXACT_LIMIT`] values, otherwise the tie-corrected normal
/// approximation with continuity correction.
pub fn mann_whitney_u(a: &[f64], b: &[f64]) -> Result<MannWhitney> {
    check(a, b)?;
    let twice = u2(a, b);
    let u = twice as f64 / 2.0;
    let exact = a.len() <= EXACT_LIMIT && b.len() <= EXACT_LIMIT;
    let p = if exact { exact_p(a, b, twice) } else { normal_p(a, b, u) };
    Ok(MannWhitney { u, p, exact })
}

/// `(#{a > b} - #{a < b}) / (n m)` over all pairs.
pub fn cliffs_delta(a: &[f64], b: &[f64]) -> Result<f64> {
    check(a, b)?;
    let mut score = 0i64;
    for x in a {
        for y in b {
            score += match x.partial_cmp(y) {
                Some(std::cmp::Ordering::Greater) => 1,
                Some(std::cmp::Ordering::Less) => -1,
                _ => 0,
            };
        }
    }
    Ok(score as f64 / (a.len() * b.len()) as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EffectSize {
    Negligible,
    Small,
    Medium,
    Large,
}

impl EffectSize {
    pub fn of(delta: f64) -> Self {
        match delta.abs() {
            d if d < 0.147 => EffectSize::Negligible,
            d if d < 0.33 => EffectSize::Small,
            d if d < 0.474 => EffectSize::Medium,
            _ => EffectSize::Large,
        }
    }

    pub fn marker(self) -> &'static str {
        match self {
            EffectSize::Large => "..",
            EffectSize::Medium => ".",
            _ => "",
        }
    }
}

pub fn significance_marker(p: f64) -> &'static str {
    if p < 0.01 {
        "**"
    } else if p < 0.05 {
        "*"
    } else {
        ""
    }
}

/// Comparison of two methods on one metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairComparison {
    pub a: String,
    pub b: String,
    pub metric: String,
    pub u: f64,
    pub p: f64,
    pub delta: f64,
    pub effect: EffectSize,
    pub significance: String,
    pub effect_marker: String,
}

pub fn compare(a: &str, b: &str, metric: &str, xs: &[f64], ys: &[f64]) -> Result<PairComparison> {
    let mw = mann_whitney_u(xs, ys)?;
    let delta = cliffs_delta(xs, ys)?;
    let effect = EffectSize::of(delta);
    Ok(PairComparison {
        a: a.to_string(),
        b: b.to_string(),
        metric: metric.to_string(),
        u: mw.u,
        p: mw.p,
        delta,
        effect,
        significance: significance_marker(mw.p).to_string(),
        effect_marker: effect.marker().to_string(),
    })
}

/// Median and interquartile range with linear interpolation between order
/// statistics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub n: usize,
    pub mean: f64,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

pub fn summarize(xs: &[f64]) -> Result<Summary> {
    if xs.is_empty() {
        return Err(Error::Contract("cannot summarize an empty sample".into()));
    }
    let mut s = xs.to_vec();
    s.sort_by(f64::total_cmp);
    Ok(Summary {
        n: s.len(),
        mean: s.iter().sum::<f64>() / s.len() as f64,
        median: quantile(&s, 0.5),
        q1: quantile(&s, 0.25),
        q3: quantile(&s, 0.75),
    })
}
