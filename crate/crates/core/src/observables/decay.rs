//! Threshold-crossing times of correlator magnitudes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default crossing level.
pub const DEFAULT_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayTime {
    pub threshold: f64,
    /// First time the magnitude drops below `threshold`, linearly
    /// interpolated; `None` if it never does on the grid.
    pub t_cross: Option<f64>,
}

/// First crossing of `values` below `threshold`.
pub fn decay_time(times: &[f64], values: &[f64], threshold: f64) -> Result<DecayTime> {
    if times.is_empty() {
        return Err(Error::EmptySeries);
    }
    if times.len() != values.len() {
        return Err(Error::LengthMismatch {
            left: times.len(),
            right: values.len(),
        });
    }
    let t_cross = values.iter().position(|&v| v < threshold).map(|i| {
        if i == 0 {
            times[0]
        } else {
            let (v0, v1) = (values[i - 1], values[i]);
            times[i - 1] + (v0 - threshold) / (v0 - v1) * (times[i] - times[i - 1])
        }
    });
    Ok(DecayTime { threshold, t_cross })
}

/// Least-squares fit `t = a + b ln N`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogFit {
    pub intercept: f64,
    pub slope: f64,
    pub r_squared: f64,
}

pub fn log_fit(atoms: &[usize], t: &[f64]) -> Result<LogFit> {
    if atoms.len() != t.len() {
        return Err(Error::LengthMismatch {
            left: atoms.len(),
            right: t.len(),
        });
    }
    if atoms.len() < 2 {
        return Err(Error::EmptySeries);
    }
    let x: Vec<f64> = atoms.iter().map(|&n| (n as f64).ln()).collect();
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, t.iter().sum::<f64>() / n);
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(t).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = t.iter().map(|v| (v - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = x
        .iter()
        .zip(t)
        .map(|(a, b)| (b - intercept - slope * a).powi(2))
        .sum();
    let r_squared = if syy > 0.0 { 1.0 - ss_res / syy } else { 1.0 };
    Ok(LogFit {
        intercept,
        slope,
        r_squared,
    })
}
