//! Bubble start-time selection by window-size-penalized cost comparison.
//!
//! Raw mean squared residuals favour short fit windows. Regressing the cost
//! on window size gives a slope `lambda`; subtracting `lambda * (t2 - t1)`
//! detrends the comparison so windows of different sizes compete fairly, and
//! the start time is the argmin of the detrended cost.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lppls::FitFan;

#[derive(Debug, Error)]
pub enum LagrangeError {
    #[error("need at least two cost points, got {0}")]
    NotEnoughPoints(usize),
    #[error("all window sizes equal; slope is undefined")]
    DegenerateRegression,
    #[error("no admissible start time at or after index {earliest}")]
    NoAdmissibleStart { earliest: usize },
    #[error("fan contains no usable fits")]
    EmptyFan,
}

/// Ordinary least-squares slope of cost on window size.
pub fn estimate_lambda(costs: &[(usize, f64)]) -> Result<f64, LagrangeError> {
    if costs.len() < 2 {
        return Err(LagrangeError::NotEnoughPoints(costs.len()));
    }
    let n = costs.len() as f64;
    let mean_x = costs.iter().map(|&(x, _)| x as f64).sum::<f64>() / n;
    let mean_y = costs.iter().map(|&(_, y)| y).sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for &(x, y) in costs {
        let dx = x as f64 - mean_x;
        sxx += dx * dx;
        sxy += dx * (y - mean_y);
    }
    if sxx == 0.0 {
        return Err(LagrangeError::DegenerateRegression);
    }
    Ok(sxy / sxx)
}

/// One fan entry's contribution to the start-time selection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostPoint {
    pub t1: usize,
    /// Window span `t2 - t1`, the penalty coordinate.
    pub span: usize,
    /// Mean squared residual SSE / dt.
    pub chi2: f64,
}

impl CostPoint {
    pub fn modified(&self, lambda: f64) -> f64 {
        self.chi2 - lambda * self.span as f64
    }
}

/// Argmin of the detrended cost over start times at or after
/// `earliest_allowed`; ties break toward the later start.
pub fn select_t1_star(
    points: &[CostPoint],
    lambda: f64,
    earliest_allowed: usize,
) -> Result<usize, LagrangeError> {
    let mut best: Option<(f64, usize)> = None;
    for p in points {
        if p.t1 < earliest_allowed {
            continue;
        }
        let cost = p.modified(lambda);
        let take = match best {
            None => true,
            Some((c, t)) => cost < c || (cost == c && p.t1 > t),
        };
        if take {
            best = Some((cost, p.t1));
        }
    }
    best.map(|(_, t1)| t1).ok_or(LagrangeError::NoAdmissibleStart {
        earliest: earliest_allowed,
    })
}

/// Full start-time analysis of a fan: slope, detrended curve and selection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StartTimeAnalysis {
    pub t2: usize,
    pub lambda: f64,
    pub t1_star: usize,
    pub earliest_allowed: usize,
    pub curve: Vec<CostCurveRow>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostCurveRow {
    pub t1: usize,
    pub dt: usize,
    pub sse: f64,
    pub chi2: f64,
    pub chi2_modified: f64,
}

/// Runs the selection over every usable fit in a fan. Failed windows carry
/// no cost and are skipped; unqualified fits participate like any other,
/// since the penalty acts on raw calibration cost.
pub fn analyze_fan(fan: &FitFan, earliest_allowed: usize) -> Result<StartTimeAnalysis, LagrangeError> {
    let mut points = Vec::new();
    for entry in &fan.entries {
        if let Some(fit) = &entry.fit {
            points.push(CostPoint {
                t1: entry.t1,
                span: fan.t2 - entry.t1,
                chi2: fit.chi2(),
            });
        }
    }
    if points.is_empty() {
        return Err(LagrangeError::EmptyFan);
    }
    let sizes: Vec<(usize, f64)> = points.iter().map(|p| (p.span + 1, p.chi2)).collect();
    let lambda = estimate_lambda(&sizes)?;
    let t1_star = select_t1_star(&points, lambda, earliest_allowed)?;

    let curve = fan
        .entries
        .iter()
        .filter_map(|e| {
            e.fit.as_ref().map(|fit| CostCurveRow {
                t1: e.t1,
                dt: fit.n,
                sse: fit.sse,
                chi2: fit.chi2(),
                chi2_modified: fit.chi2() - lambda * (fan.t2 - e.t1) as f64,
            })
        })
        .collect();

    Ok(StartTimeAnalysis {
        t2: fan.t2,
        lambda,
        t1_star,
        earliest_allowed,
        curve,
    })
}
