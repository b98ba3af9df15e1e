use serde::{Deserialize, Serialize};

use crate::scores::ForecastTriple;
use crate::{Error, Result};

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

/// Negative log predictive density, `mean(½ log 2πσ² + ε²/2σ²)`.
pub fn nlpd(triples: &[ForecastTriple]) -> Result<f64> {
    if triples.is_empty() {
        return Err(Error::domain("NLPD of an empty set"));
    }
    let mut s = 0.0;
    for t in triples {
        if !(t.sigma > 0.0) {
            return Err(Error::domain(format!("sigma must be positive, got {}", t.sigma)));
        }
        let z = t.eps() / t.sigma;
        s += HALF_LN_2PI + t.sigma.ln() + 0.5 * z * z;
    }
    Ok(s / triples.len() as f64)
}

/// Quantile by linear interpolation between order statistics at rank
/// `p·(n − 1)`.
pub fn quantile(values: &[f64], p: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::domain("quantile of an empty set"));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::domain(format!("quantile level {p} outside [0, 1]")));
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    Ok(quantile_sorted(&v, p))
}

fn quantile_sorted(v: &[f64], p: f64) -> f64 {
    let h = p * (v.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(v.len() - 1);
    v[lo] + (h - lo as f64) * (v[hi] - v[lo])
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Quartiles {
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
}

pub fn quartiles(values: &[f64]) -> Result<Quartiles> {
    if values.is_empty() {
        return Err(Error::domain("quartiles of an empty set"));
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    Ok(Quartiles { q1: quantile_sorted(&v, 0.25), median: quantile_sorted(&v, 0.5), q3: quantile_sorted(&v, 0.75) })
}

pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let m = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n;
    (m, var.sqrt())
}

pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let (ma, sa) = mean_std(a);
    let (mb, sb) = mean_std(b);
    let cov = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum::<f64>() / a.len() as f64;
    cov / (sa * sb)
}
