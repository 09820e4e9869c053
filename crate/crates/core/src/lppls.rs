//! Log-periodic power law evaluation, calibration and fit qualification.
//!
//! The model for the expected log-price is
//!
//! ```text
//! A + (tc - t)^m * (B + C1*cos(w*ln(tc - t)) + C2*sin(w*ln(tc - t)))
//! ```
//!
//! with four linear parameters (A, B, C1, C2) and three nonlinear ones
//! (tc, m, w). Calibration slaves the linear block to the nonlinear triple
//! through the 4x4 normal equations, then minimizes the resulting profile
//! cost over the triple with a coarse grid followed by simplex refinement
//! from the best grid points.

use nalgebra::{Matrix4, Vector4};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::optim::nelder_mead;

#[derive(Debug, Error)]
pub enum LpplsError {
    #[error("evaluation at t={t} requires t < tc={tc}")]
    BeyondCriticalTime { t: f64, tc: f64 },
    #[error("critical time {tc} not beyond the last observation {last}")]
    CriticalTimeInsideWindow { tc: f64, last: f64 },
    #[error("window holds {n} points, need at least {min}")]
    WindowTooShort { n: usize, min: usize },
    #[error("window size {dt} outside the supported range [{min}, {max}]")]
    WindowSizeOutOfRange { dt: usize, min: usize, max: usize },
    #[error("window [{t1}, {t2}] does not fit a series of length {len}")]
    WindowOutOfBounds { t1: usize, t2: usize, len: usize },
    #[error("degenerate linear system (collinear basis or zero-variance data)")]
    Degenerate,
    #[error("no usable fit from any search start")]
    NoFit,
}

pub const MIN_WINDOW: usize = 30;
pub const MAX_WINDOW: usize = 720;

/// Model parameters. `tc` is in index units measured from the window
/// origin, i.e. the first observation of the fitted window sits at t = 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LpplsParams {
    pub a: f64,
    pub b: f64,
    pub c1: f64,
    pub c2: f64,
    pub m: f64,
    pub omega: f64,
    pub tc: f64,
}

impl LpplsParams {
    /// Oscillation amplitude |C| = sqrt(C1^2 + C2^2).
    pub fn amplitude(&self) -> f64 {
        self.c1.hypot(self.c2)
    }

    /// Expected log-price at time `t` (same clock as `tc`).
    pub fn evaluate(&self, t: f64) -> Result<f64, LpplsError> {
        if t >= self.tc {
            return Err(LpplsError::BeyondCriticalTime { t, tc: self.tc });
        }
        let dt = self.tc - t;
        let pow = dt.powf(self.m);
        let phase = self.omega * dt.ln();
        Ok(self.a + pow * (self.b + self.c1 * phase.cos() + self.c2 * phase.sin()))
    }
}

/// Inclusive fit window `[t1, t2]` in series indices; `dt = t2 - t1 + 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FitWindow {
    pub t1: usize,
    pub t2: usize,
}

impl FitWindow {
    pub fn new(t1: usize, t2: usize) -> Result<Self, LpplsError> {
        if t2 < t1 {
            return Err(LpplsError::WindowOutOfBounds { t1, t2, len: 0 });
        }
        let dt = t2 - t1 + 1;
        if !(MIN_WINDOW..=MAX_WINDOW).contains(&dt) {
            return Err(LpplsError::WindowSizeOutOfRange {
                dt,
                min: MIN_WINDOW,
                max: MAX_WINDOW,
            });
        }
        Ok(Self { t1, t2 })
    }

    pub fn dt(&self) -> usize {
        self.t2 - self.t1 + 1
    }
}

/// Result of slaving the linear parameters at a fixed (tc, m, w).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFit {
    pub a: f64,
    pub b: f64,
    pub c1: f64,
    pub c2: f64,
    pub sse: f64,
}

/// Solves the 4x4 normal equations for (A, B, C1, C2) at fixed (tc, m, w)
/// over `(times[i], log_prices[i])` pairs, and returns the minimizing
/// parameters with their sum of squared residuals.
///
/// The basis columns are equilibrated before the solve; an ill-conditioned
/// system (for instance when the log-time range is too small for the cosine
/// column to separate from the intercept) comes back as `Degenerate`.
pub fn slave_linear(
    tc: f64,
    m: f64,
    omega: f64,
    times: &[f64],
    log_prices: &[f64],
) -> Result<LinearFit, LpplsError> {
    let n = times.len();
    if n < 4 || log_prices.len() != n {
        return Err(LpplsError::WindowTooShort { n, min: 4 });
    }
    let last = times.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if tc.is_nan() || tc <= last {
        return Err(LpplsError::CriticalTimeInsideWindow { tc, last });
    }

    // basis columns
    let mut f = Vec::with_capacity(n);
    let mut g = Vec::with_capacity(n);
    let mut h = Vec::with_capacity(n);
    for &t in times {
        let d = tc - t;
        let pow = d.powf(m);
        let phase = omega * d.ln();
        if !pow.is_finite() {
            return Err(LpplsError::Degenerate);
        }
        f.push(pow);
        g.push(pow * phase.cos());
        h.push(pow * phase.sin());
    }

    let scale = |v: &[f64]| -> f64 {
        let s = v.iter().fold(0.0f64, |acc, x| acc.max(x.abs()));
        if s > 0.0 {
            s
        } else {
            1.0
        }
    };
    let (sf, sg, sh) = (scale(&f), scale(&g), scale(&h));

    let mut sums = [0.0f64; 13]; // fF gG hH ff fg fh gg gh hh y yf yg yh
    for i in 0..n {
        let (fi, gi, hi) = (f[i] / sf, g[i] / sg, h[i] / sh);
        let yi = log_prices[i];
        sums[0] += fi;
        sums[1] += gi;
        sums[2] += hi;
        sums[3] += fi * fi;
        sums[4] += fi * gi;
        sums[5] += fi * hi;
        sums[6] += gi * gi;
        sums[7] += gi * hi;
        sums[8] += hi * hi;
        sums[9] += yi;
        sums[10] += yi * fi;
        sums[11] += yi * gi;
        sums[12] += yi * hi;
    }

    let nn = n as f64;
    let gram = Matrix4::new(
        nn, sums[0], sums[1], sums[2], //
        sums[0], sums[3], sums[4], sums[5], //
        sums[1], sums[4], sums[6], sums[7], //
        sums[2], sums[5], sums[7], sums[8],
    );
    let rhs = Vector4::new(sums[9], sums[10], sums[11], sums[12]);

    let lu = gram.lu();
    let mut sol = lu.solve(&rhs).ok_or(LpplsError::Degenerate)?;
    // one step of iterative refinement tightens the factorization roundoff
    if let Some(corr) = lu.solve(&(rhs - gram * sol)) {
        sol += corr;
    }
    if !sol.iter().all(|x| x.is_finite()) {
        return Err(LpplsError::Degenerate);
    }
    let (a, b, c1, c2) = (sol[0], sol[1] / sf, sol[2] / sg, sol[3] / sh);

    let mut sse = 0.0;
    for i in 0..n {
        let r = log_prices[i] - a - b * f[i] - c1 * g[i] - c2 * h[i];
        sse += r * r;
    }
    if !sse.is_finite() {
        return Err(LpplsError::Degenerate);
    }
    Ok(LinearFit { a, b, c1, c2, sse })
}

/// Grid density and refinement budget for the nonlinear search.
///
/// The triple (tc, m, w) is searched inside the box m in (0,1),
/// w in (omega_min, omega_max), tc - t2 in (0, t2 - t1). Grid nodes sit at
/// cell midpoints so open bounds are never touched.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchConfig {
    pub m_grid: usize,
    pub omega_grid: usize,
    pub tc_grid: usize,
    /// Number of best grid points refined with the simplex.
    pub n_starts: usize,
    /// Function-evaluation budget per refinement.
    pub refine_budget: usize,
    /// Search box for the log-frequency; wider than the filter bounds.
    pub omega_min: f64,
    pub omega_max: f64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            m_grid: 20,
            omega_grid: 20,
            tc_grid: 20,
            n_starts: 10,
            refine_budget: 500,
            omega_min: 1.0,
            omega_max: 50.0,
        }
    }
}

impl SearchConfig {
    /// Lighter density for scans where thousands of windows are fitted.
    pub fn coarse() -> Self {
        Self {
            m_grid: 10,
            omega_grid: 10,
            tc_grid: 10,
            n_starts: 4,
            refine_budget: 250,
            ..Self::default()
        }
    }
}

/// Qualification bounds on a calibrated fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FilterConfig {
    /// B must be strictly below this (negative power-law amplitude).
    pub b_max: f64,
    /// Exclusive bounds on the exponent.
    pub m_min: f64,
    pub m_max: f64,
    /// Inclusive bounds on the log-frequency.
    pub omega_min: f64,
    pub omega_max: f64,
    /// tc - t2 must be strictly above this ...
    pub tc_gap_min: f64,
    /// ... and strictly below this multiple of the window size.
    pub tc_gap_max_dt_multiple: f64,
    /// Damping D = m|B| / (w|C|), inclusive lower bound.
    pub damping_min: f64,
    /// Oscillation count, inclusive lower bound; only checked when
    /// |C/B| >= cb_ratio_threshold.
    pub oscillations_min: f64,
    pub cb_ratio_threshold: f64,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            b_max: 0.0,
            m_min: 0.0,
            m_max: 1.0,
            omega_min: 4.0,
            omega_max: 25.0,
            tc_gap_min: 0.0,
            tc_gap_max_dt_multiple: 1.0,
            damping_min: 0.5,
            oscillations_min: 2.5,
            cb_ratio_threshold: 0.05,
        }
    }
}

/// One calibrated window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpplsFit {
    pub window: FitWindow,
    pub params: LpplsParams,
    pub sse: f64,
    pub n: usize,
    pub damping: f64,
    pub oscillations: f64,
    pub qualified: bool,
}

impl LpplsFit {
    /// Predicted horizon: critical time minus the window end, in index units.
    pub fn tc_minus_t2(&self) -> f64 {
        self.params.tc - (self.n as f64 - 1.0)
    }

    /// Mean squared residual, the cost used for start-time selection.
    pub fn chi2(&self) -> f64 {
        self.sse / self.n as f64
    }
}

/// Damping factor D = m|B| / (w|C|); infinite when the oscillation
/// amplitude vanishes.
pub fn damping(m: f64, b: f64, omega: f64, c_amplitude: f64) -> f64 {
    m * b.abs() / (omega * c_amplitude)
}

/// Number of log-periodic oscillations inside the window,
/// O = (w / 2pi) * ln((tc - t1) / (tc - t2)), with tc measured from the
/// window origin t1 = 0 and t2 at `n - 1`.
pub fn oscillation_count(omega: f64, tc_local: f64, window_len: usize) -> f64 {
    let t_end = window_len as f64 - 1.0;
    omega / (2.0 * std::f64::consts::PI) * (tc_local / (tc_local - t_end)).ln()
}

/// The qualification predicate: all bounds must hold, and the oscillation
/// bound only applies when the relative oscillation amplitude is material.
pub fn qualify(fit: &LpplsFit, cfg: &FilterConfig) -> bool {
    let p = &fit.params;
    let dt = fit.n as f64;
    let gap = fit.tc_minus_t2();
    let c = p.amplitude();
    let cb_ratio = if p.b != 0.0 { (c / p.b).abs() } else { f64::INFINITY };

    p.b < cfg.b_max
        && p.m > cfg.m_min
        && p.m < cfg.m_max
        && p.omega >= cfg.omega_min
        && p.omega <= cfg.omega_max
        && gap > cfg.tc_gap_min
        && gap < cfg.tc_gap_max_dt_multiple * dt
        && fit.damping >= cfg.damping_min
        && (cb_ratio < cfg.cb_ratio_threshold || fit.oscillations >= cfg.oscillations_min)
}

/// Midpoints of `count` equal cells spanning `(lo, hi)`; never touches the
/// open bounds.
fn cell_midpoints(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    let step = (hi - lo) / count as f64;
    (0..count).map(|i| lo + (i as f64 + 0.5) * step).collect()
}

/// Calibrates one window of log-prices.
///
/// `log_prices` is the full series; the window selects the slice fitted.
/// The profile cost over (tc, m, w) is scanned on the configured grid, the
/// best `n_starts` nodes are refined with the simplex, and the lowest
/// refined cost wins. The search is fully deterministic.
pub fn fit_window(
    log_prices: &[f64],
    window: FitWindow,
    search: &SearchConfig,
    filter: &FilterConfig,
) -> Result<LpplsFit, LpplsError> {
    if window.t2 >= log_prices.len() {
        return Err(LpplsError::WindowOutOfBounds {
            t1: window.t1,
            t2: window.t2,
            len: log_prices.len(),
        });
    }
    let y = &log_prices[window.t1..=window.t2];
    let n = y.len();
    let t_end = n as f64 - 1.0;

    let mean = y.iter().sum::<f64>() / n as f64;
    if y.iter().all(|v| (v - mean).abs() <= 1e-12 * (1.0 + mean.abs())) {
        return Err(LpplsError::Degenerate);
    }

    let times: Vec<f64> = (0..n).map(|i| i as f64).collect();

    let m_nodes = cell_midpoints(0.0, 1.0, search.m_grid);
    let w_nodes = cell_midpoints(search.omega_min, search.omega_max, search.omega_grid);
    let u_nodes = cell_midpoints(0.0, t_end, search.tc_grid);

    // grid pass: share the log-time and power vectors across inner loops
    let mut scored: Vec<(f64, usize, [f64; 3])> = Vec::with_capacity(search.tc_grid * search.m_grid * search.omega_grid);
    let mut node_idx = 0usize;
    let mut logd = vec![0.0f64; n];
    let mut powd = vec![0.0f64; n];
    for &u in &u_nodes {
        let tc = t_end + u;
        for (i, ld) in logd.iter_mut().enumerate() {
            *ld = (tc - i as f64).ln();
        }
        for &m in &m_nodes {
            for (i, p) in powd.iter_mut().enumerate() {
                *p = (m * logd[i]).exp();
            }
            for &omega in &w_nodes {
                let sse = grid_sse(y, &logd, &powd, omega);
                scored.push((sse, node_idx, [u, m, omega]));
                node_idx += 1;
            }
        }
    }
    scored.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

    let objective = |x: &[f64]| -> f64 {
        let (u, m, omega) = (x[0], x[1], x[2]);
        if !(u > 0.0 && u < t_end)
            || !(m > 0.0 && m < 1.0)
            || !(omega > search.omega_min && omega < search.omega_max)
        {
            return f64::INFINITY;
        }
        match slave_linear(t_end + u, m, omega, &times, y) {
            Ok(fit) => fit.sse,
            Err(_) => f64::INFINITY,
        }
    };

    let steps = [
        0.5 * t_end / search.tc_grid as f64,
        0.5 / search.m_grid as f64,
        0.5 * (search.omega_max - search.omega_min) / search.omega_grid as f64,
    ];

    let mut best: Option<(f64, [f64; 3])> = None;
    for (grid_sse, _, node) in scored.iter().take(search.n_starts) {
        if !grid_sse.is_finite() {
            continue;
        }
        // the simplex never discards its best vertex, so the refined cost is
        // at most the cost at the start node
        let r = nelder_mead(objective, node, &steps, search.refine_budget, 1e-12);
        if r.fx.is_finite() && best.is_none_or(|(b, _)| r.fx < b) {
            best = Some((r.fx, [r.x[0], r.x[1], r.x[2]]));
        }
    }

    let (_, x) = best.ok_or(LpplsError::NoFit)?;
    let (u, m, omega) = (x[0], x[1], x[2]);
    let tc = t_end + u;
    let lin = slave_linear(tc, m, omega, &times, y)?;

    let params = LpplsParams {
        a: lin.a,
        b: lin.b,
        c1: lin.c1,
        c2: lin.c2,
        m,
        omega,
        tc,
    };
    let d = damping(m, lin.b, omega, params.amplitude());
    let o = oscillation_count(omega, tc, n);
    let mut fit = LpplsFit {
        window,
        params,
        sse: lin.sse,
        n,
        damping: d,
        oscillations: o,
        qualified: false,
    };
    fit.qualified = qualify(&fit, filter);
    Ok(fit)
}

/// Profile cost at one grid node, reusing precomputed ln(tc - t) and
/// (tc - t)^m vectors. Same normal-equation route as [`slave_linear`].
fn grid_sse(y: &[f64], logd: &[f64], powd: &[f64], omega: f64) -> f64 {
    let n = y.len();
    let (mut sf, mut sg, mut sh) = (0.0f64, 0.0f64, 0.0f64);
    let (mut sff, mut sfg, mut sfh) = (0.0f64, 0.0f64, 0.0f64);
    let (mut sgg, mut sgh, mut shh) = (0.0f64, 0.0f64, 0.0f64);
    let (mut sy, mut syf, mut syg, mut syh) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);

    // column scales: powd is positive and monotone, max at an endpoint
    let smax = powd.iter().fold(0.0f64, |a, &x| a.max(x.abs()));
    let sc = if smax > 0.0 { smax } else { 1.0 };

    for i in 0..n {
        let f = powd[i] / sc;
        let phase = omega * logd[i];
        let (sin, cos) = phase.sin_cos();
        let g = f * cos;
        let h = f * sin;
        let yi = y[i];
        sf += f;
        sg += g;
        sh += h;
        sff += f * f;
        sfg += f * g;
        sfh += f * h;
        sgg += g * g;
        sgh += g * h;
        shh += h * h;
        sy += yi;
        syf += yi * f;
        syg += yi * g;
        syh += yi * h;
    }
    let nn = n as f64;
    let gram = Matrix4::new(
        nn, sf, sg, sh, //
        sf, sff, sfg, sfh, //
        sg, sfg, sgg, sgh, //
        sh, sfh, sgh, shh,
    );
    let rhs = Vector4::new(sy, syf, syg, syh);
    let sol = match gram.lu().solve(&rhs) {
        Some(s) if s.iter().all(|v| v.is_finite()) => s,
        _ => return f64::INFINITY,
    };
    let (a, b, c1, c2) = (sol[0], sol[1], sol[2], sol[3]);

    let mut sse = 0.0;
    for i in 0..n {
        let f = powd[i] / sc;
        let phase = omega * logd[i];
        let (sin, cos) = phase.sin_cos();
        let r = y[i] - a - b * f - c1 * (f * cos) - c2 * (f * sin);
        sse += r * r;
    }
    if sse.is_finite() {
        sse
    } else {
        f64::INFINITY
    }
}

/// One entry of a fan of fits sharing `t2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FanEntry {
    pub t1: usize,
    /// `None` when the window was degenerate or no search start survived.
    pub fit: Option<LpplsFit>,
}

/// Fits every window `[t1, t2]` for `t1` in the given list, independently
/// and in parallel; entries keep the input order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitFan {
    pub t2: usize,
    pub entries: Vec<FanEntry>,
}

pub fn fit_fan(
    log_prices: &[f64],
    t2: usize,
    t1_values: &[usize],
    search: &SearchConfig,
    filter: &FilterConfig,
) -> Result<FitFan, LpplsError> {
    if t2 >= log_prices.len() {
        return Err(LpplsError::WindowOutOfBounds {
            t1: 0,
            t2,
            len: log_prices.len(),
        });
    }
    let entries: Vec<FanEntry> = t1_values
        .par_iter()
        .map(|&t1| {
            let fit = FitWindow::new(t1, t2)
                .and_then(|w| fit_window(log_prices, w, search, filter))
                .ok();
            FanEntry { t1, fit }
        })
        .collect();
    Ok(FitFan { t2, entries })
}

impl FitFan {
    pub fn qualified_count(&self) -> usize {
        self.entries
            .iter()
            .filter(|e| e.fit.as_ref().is_some_and(|f| f.qualified))
            .count()
    }

    /// Fraction of fan entries whose fit qualified (degenerate windows
    /// count in the denominator).
    pub fn qualified_fraction(&self) -> f64 {
        if self.entries.is_empty() {
            return 0.0;
        }
        self.qualified_count() as f64 / self.entries.len() as f64
    }
}
