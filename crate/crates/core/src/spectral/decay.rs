//! Least-squares power-law fit of ordered singular values.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Allowance above the predicted slope `−1/n(g)`.
pub const SLOPE_ALLOWANCE: f64 = 0.2;
pub const MIN_VALUES: usize = 50;
pub const DEFAULT_WINDOW: (f64, f64) = (0.2, 0.7);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub slope: f64,
    pub intercept: f64,
    /// Two standard errors of the slope.
    pub band: f64,
    /// First and last fitted index (1-based).
    pub window: (usize, usize),
    pub n_g: f64,
    pub predicted: f64,
    pub pass: bool,
}

/// Fits `log μ_j = a + s log j` over the quantile window of `j` and compares
/// `s` with `−1/n_g`. `mu` must be the nonincreasing, kernel-free values.
pub fn decay_fit(mu: &[f64], window: (f64, f64), n_g: f64) -> Result<DecayFit> {
    if mu.len() < MIN_VALUES {
        return Err(Error::Invalid(format!(
            "decay fit needs at least {MIN_VALUES} values, got {}",
            mu.len()
        )));
    }
    let (lo_q, hi_q) = window;
    if !(0.0..1.0).contains(&lo_q) || !(lo_q < hi_q && hi_q <= 1.0) {
        return Err(Error::Invalid(format!("bad fit window [{lo_q}, {hi_q}]")));
    }
    if !(n_g > 0.0) {
        return Err(Error::Invalid(format!("n(g) must be positive, got {n_g}")));
    }
    let len = mu.len() as f64;
    let lo = ((lo_q * len).ceil() as usize).max(1);
    let hi = ((hi_q * len).floor() as usize).min(mu.len());
    if hi < lo + 2 {
        return Err(Error::Invalid(format!(
            "window [{lo}, {hi}] holds fewer than 3 points"
        )));
    }
    let pts: Vec<(f64, f64)> = (lo..=hi)
        .map(|j| {
            let m = mu[j - 1];
            if m > 0.0 {
                Ok(((j as f64).ln(), m.ln()))
            } else {
                Err(Error::Invalid(format!(
                    "nonpositive singular value at j={j}"
                )))
            }
        })
        .collect::<Result<_>>()?;
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = pts
        .iter()
        .map(|p| (p.1 - intercept - slope * p.0).powi(2))
        .sum();
    let se = (rss / (k - 2.0) / sxx).sqrt();
    let predicted = -1.0 / n_g;
    Ok(DecayFit {
        slope,
        intercept,
        band: 2.0 * se,
        window: (lo, hi),
        n_g,
        predicted,
        pass: slope <= predicted + SLOPE_ALLOWANCE,
    })
}
