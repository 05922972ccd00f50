//! Agreement and rank-correlation metrics, and CSAT subset rules.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};

fn check_pair(x: &[f64], y: &[f64], min_len: usize) -> Result<()> {
    Error::check_dim("paired series", x.len(), y.len())?;
    if x.len() < min_len {
        return Err(Error::InvalidArgument(format!(
            "need at least {min_len} pairs, got {}",
            x.len()
        )));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("non-finite value in series".into()));
    }
    Ok(())
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Population (1/N) mean, variance and covariance.
fn moments(x: &[f64], y: &[f64]) -> (f64, f64, f64, f64, f64) {
    let n = x.len() as f64;
    let (mx, my) = (mean(x), mean(y));
    let mut vx = 0.0;
    let mut vy = 0.0;
    let mut cov = 0.0;
    for (a, b) in x.iter().zip(y) {
        let (da, db) = (a - mx, b - my);
        vx += da * da;
        vy += db * db;
        cov += da * db;
    }
    (mx, my, vx / n, vy / n, cov / n)
}

/// Lin's concordance correlation coefficient with population moments.
///
/// The only zero-denominator case is two identical constant series, which
/// counts as perfect agreement.
pub fn ccc(x: &[f64], y: &[f64]) -> Result<f64> {
    check_pair(x, y, 2)?;
    let (mx, my, vx, vy, cov) = moments(x, y);
    let denom = vx + vy + (mx - my) * (mx - my);
    if denom == 0.0 {
        return Ok(1.0);
    }
    Ok(2.0 * cov / denom)
}

pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    check_pair(x, y, 2)?;
    let (_, _, vx, vy, cov) = moments(x, y);
    if vx == 0.0 || vy == 0.0 {
        return Err(Error::Degenerate(format!(
            "correlation undefined: {} series is constant",
            if vx == 0.0 { "first" } else { "second" }
        )));
    }
    Ok((cov / (vx.sqrt() * vy.sqrt())).clamp(-1.0, 1.0))
}

/// 1-based ranks; tied values share the mean of the ranks they span.
pub fn average_ranks(x: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0.0; x.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && x[order[end]] == x[order[start]] {
            end += 1;
        }
        // positions start..end hold ranks start+1 ..= end
        let avg = (start + 1 + end) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = avg;
        }
        start = end;
    }
    ranks
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Correlation {
    pub rho: f64,
    /// Two-sided, from the t approximation. `None` below three pairs.
    pub p_value: Option<f64>,
    pub n: usize,
}

/// Two-sided p-value of a correlation coefficient via
/// `t = r * sqrt((n - 2) / (1 - r^2))` on `n - 2` degrees of freedom.
pub fn correlation_p_value(r: f64, n: usize) -> Option<f64> {
    if n < 3 {
        return None;
    }
    let df = (n - 2) as f64;
    let denom = 1.0 - r * r;
    if denom <= 0.0 {
        return Some(0.0);
    }
    let t = r.abs() * (df / denom).sqrt();
    let dist = StudentsT::new(0.0, 1.0, df).ok()?;
    Some((2.0 * dist.sf(t)).min(1.0))
}

/// Spearman's rho: Pearson correlation of average ranks.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<Correlation> {
    check_pair(x, y, 2)?;
    let rho = pearson(&average_ranks(x), &average_ranks(y)).map_err(|_| {
        Error::Degenerate("spearman correlation undefined: a series has all values tied".into())
    })?;
    Ok(Correlation {
        rho,
        p_value: correlation_p_value(rho, x.len()),
        n: x.len(),
    })
}

/// Evaluation subsets by true CSAT.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SubsetRule {
    All,
    /// `CSAT <= 2 or CSAT >= 3`.
    R1,
    /// `CSAT < 2 or CSAT > 4`.
    R2,
}

impl SubsetRule {
    pub fn admits(self, csat_true: f64) -> bool {
        match self {
            SubsetRule::All => true,
            SubsetRule::R1 => csat_true <= 2.0 || csat_true >= 3.0,
            SubsetRule::R2 => csat_true < 2.0 || csat_true > 4.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SubsetRule::All => "all",
            SubsetRule::R1 => "r1",
            SubsetRule::R2 => "r2",
        }
    }
}

impl std::str::FromStr for SubsetRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "all" => Ok(SubsetRule::All),
            "r1" => Ok(SubsetRule::R1),
            "r2" => Ok(SubsetRule::R2),
            other => Err(Error::InvalidArgument(format!("unknown subset `{other}`"))),
        }
    }
}

/// Keeps `(csat_true, csat_pred)` pairs whose true rating passes `rule`.
pub fn filter_subset(pairs: &[(f64, f64)], rule: SubsetRule) -> Vec<(f64, f64)> {
    pairs
        .iter()
        .copied()
        .filter(|(t, _)| rule.admits(*t))
        .collect()
}
