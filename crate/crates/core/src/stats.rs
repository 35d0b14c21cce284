//! Order-independent summary statistics.
//!
//! Sums are taken over values sorted by `f64::total_cmp`, so the result
//! depends only on the multiset of inputs and not on agent ordering.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn sorted(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

pub fn sum(values: &[f64]) -> f64 {
    sorted(values).iter().sum()
}

pub fn mean(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::Domain {
            what: "sample size",
            value: 0.0,
            expected: "non-empty",
        });
    }
    // Rounding can push the quotient just past the sample range.
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    let m = sum(values) / values.len() as f64;
    Ok(if lo <= hi { m.clamp(lo, hi) } else { m })
}

/// Population standard deviation.
pub fn pop_std(values: &[f64]) -> Result<f64> {
    let mu = mean(values)?;
    let sq: f64 = sorted(values).iter().map(|x| (x - mu) * (x - mu)).sum();
    Ok((sq / values.len() as f64).sqrt())
}

/// Mean and population standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    pub fn of(values: &[f64]) -> Result<Self> {
        Ok(MeanStd {
            mean: mean(values)?,
            std: pop_std(values)?,
        })
    }
}

/// Pearson correlation; `None` when either series is constant.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<Option<f64>> {
    if x.len() != y.len() {
        return Err(Error::Domain {
            what: "series length mismatch",
            value: y.len() as f64,
            expected: "equal lengths",
        });
    }
    if x.len() < 2 {
        return Err(Error::Domain {
            what: "series length",
            value: x.len() as f64,
            expected: "at least 2",
        });
    }
    if is_constant(x) || is_constant(y) {
        return Ok(None);
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (da, db) = (a - mx, b - my);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Ok(None);
    }
    Ok(Some((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0)))
}

fn is_constant(v: &[f64]) -> bool {
    v.iter().all(|x| *x == v[0])
}
