//! Two-sample Mann-Whitney U and Brown-Forsythe (median-centered Levene)
//! tests.

use serde::{Deserialize, Serialize};
use statrs::function::beta::beta_reg;
use statrs::function::erf::erfc;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub statistic: f64,
    pub p: f64,
}

/// Above this size (in either sample) the normal approximation is used.
const EXACT_MAX: usize = 8;

/// Ascending midranks (1-based) of `xs`, plus the tie group sizes.
fn midranks(xs: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&i, &j| xs[i].total_cmp(&xs[j]));
    let mut ranks = vec![0.0; xs.len()];
    let mut ties = Vec::new();
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && xs[order[j]] == xs[order[i]] {
            j += 1;
        }
        let rank = (i + j + 1) as f64 / 2.0;
        for &k in &order[i..j] {
            ranks[k] = rank;
        }
        ties.push(j - i);
        i = j;
    }
    (ranks, ties)
}

/// `U` of a sample whose ranks sum to `rank_sum`.
fn u_from_ranks(rank_sum: f64, n: usize) -> f64 {
    rank_sum - (n * (n + 1)) as f64 / 2.0
}

/// Two-sided p-value from every assignment of the pooled midranks to the
/// first sample.
fn exact_p(ranks: &[f64], na: usize, u_obs: f64, mean: f64) -> f64 {
    let n = ranks.len();
    let dev = (u_obs - mean).abs();
    let (mut extreme, mut total) = (0u64, 0u64);
    let mut chosen: Vec<usize> = (0..na).collect();
    loop {
        let sum: f64 = chosen.iter().map(|&i| ranks[i]).sum();
        total += 1;
        // U takes half-integer values, so a small slack only absorbs rounding
        if (u_from_ranks(sum, na) - mean).abs() >= dev - 1e-9 {
            extreme += 1;
        }
        // next combination in lexicographic order
        let mut i = na;
        loop {
            if i == 0 {
                return extreme as f64 / total as f64;
            }
            i -= 1;
            if chosen[i] < n - na + i {
                break;
            }
        }
        chosen[i] += 1;
        for j in i + 1..na {
            chosen[j] = chosen[j - 1] + 1;
        }
    }
}

/// Two-sided Mann-Whitney U test; the statistic is `U` of `a`. Uses exact
/// enumeration when both samples have at most 8 values and a tie- and
/// continuity-corrected normal approximation otherwise.
pub fn mann_whitney_u(a: &[f64], b: &[f64]) -> Result<TestResult> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Empty("Mann-Whitney U needs two non-empty samples".into()));
    }
    if a.iter().chain(b).any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("Mann-Whitney U input".into()));
    }
    let (na, nb) = (a.len(), b.len());
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let (ranks, ties) = midranks(&pooled);
    let u = u_from_ranks(ranks[..na].iter().sum(), na);
    let mean = (na * nb) as f64 / 2.0;
    let p = if na <= EXACT_MAX && nb <= EXACT_MAX {
        exact_p(&ranks, na, u, mean)
    } else {
        let n = (na + nb) as f64;
        let tie_term: f64 = ties.iter().map(|&t| (t * t * t - t) as f64).sum::<f64>() / (n * (n - 1.0));
        let var = (na * nb) as f64 / 12.0 * ((n + 1.0) - tie_term);
        if var <= 0.0 {
            1.0
        } else {
            let z = ((u - mean).abs() - 0.5) / var.sqrt();
            erfc(z / std::f64::consts::SQRT_2)
        }
    };
    Ok(TestResult { statistic: u, p: p.clamp(0.0, 1.0) })
}

fn median(xs: &[f64]) -> f64 {
    let mut s = xs.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        (s[n / 2 - 1] + s[n / 2]) / 2.0
    }
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Brown-Forsythe test for equal variances of two samples: one-way ANOVA on
/// absolute deviations from each sample's median, `F(1, n - 2)`.
pub fn levene_test(a: &[f64], b: &[f64]) -> Result<TestResult> {
    if a.len() < 3 || b.len() < 3 {
        return Err(Error::InsufficientData("Levene's test needs at least 3 values per sample".into()));
    }
    if a.iter().chain(b).any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("Levene input".into()));
    }
    let dev = |xs: &[f64]| {
        let m = median(xs);
        xs.iter().map(|x| (x - m).abs()).collect::<Vec<_>>()
    };
    let (za, zb) = (dev(a), dev(b));
    let (ma, mb) = (mean(&za), mean(&zb));
    let n = (a.len() + b.len()) as f64;
    let grand = (za.iter().sum::<f64>() + zb.iter().sum::<f64>()) / n;
    let between = a.len() as f64 * (ma - grand).powi(2) + b.len() as f64 * (mb - grand).powi(2);
    let within: f64 = za.iter().map(|z| (z - ma).powi(2)).sum::<f64>() + zb.iter().map(|z| (z - mb).powi(2)).sum::<f64>();
    let d2 = n - 2.0;
    let w = if between == 0.0 {
        0.0
    } else if within == 0.0 {
        f64::INFINITY
    } else {
        d2 * between / within
    };
    let p = if w == 0.0 {
        1.0
    } else if w.is_infinite() {
        0.0
    } else {
        beta_reg(d2 / 2.0, 0.5, d2 / (d2 + w))
    };
    Ok(TestResult { statistic: w, p: p.clamp(0.0, 1.0) })
}
