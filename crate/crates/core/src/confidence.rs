//! Multiscale confidence indicators: qualified-fit fractions per band.
//!
//! At an analysis date `t2` and a window-size band, the indicator is the
//! fraction of window sizes whose calibration passes the qualification
//! filter. Bands overlap deliberately; each is reported on its own.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lppls::{fit_fan, FilterConfig, LpplsError, SearchConfig, MAX_WINDOW, MIN_WINDOW};

#[derive(Debug, Error)]
pub enum ConfidenceError {
    #[error("band [{dt_min}, {dt_max}] outside supported window sizes [{min}, {max}]")]
    BadBand {
        dt_min: usize,
        dt_max: usize,
        min: usize,
        max: usize,
    },
    #[error("stride must be at least 1")]
    ZeroStride,
    #[error("t2 range [{from}, {to}] invalid for series of length {len}")]
    BadRange { from: usize, to: usize, len: usize },
    #[error(transparent)]
    Lppls(#[from] LpplsError),
}

/// Inclusive window-size band.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScaleBand {
    pub name: String,
    pub dt_min: usize,
    pub dt_max: usize,
}

impl ScaleBand {
    pub fn new(name: &str, dt_min: usize, dt_max: usize) -> Result<Self, ConfidenceError> {
        if dt_min < MIN_WINDOW || dt_max > MAX_WINDOW || dt_min > dt_max {
            return Err(ConfidenceError::BadBand {
                dt_min,
                dt_max,
                min: MIN_WINDOW,
                max: MAX_WINDOW,
            });
        }
        Ok(Self {
            name: name.to_string(),
            dt_min,
            dt_max,
        })
    }

    pub fn short() -> Self {
        Self::new("short", 30, 120).expect("valid band")
    }

    pub fn medium() -> Self {
        Self::new("medium", 100, 240).expect("valid band")
    }

    pub fn long() -> Self {
        Self::new("long", 200, 720).expect("valid band")
    }

    /// Number of window sizes in the band when the history is long enough.
    pub fn window_count(&self) -> usize {
        self.dt_max - self.dt_min + 1
    }
}

/// The three default bands: short `[30,120]`, medium `[100,240]`, long `[200,720]`.
pub fn default_bands() -> Vec<ScaleBand> {
    vec![ScaleBand::short(), ScaleBand::medium(), ScaleBand::long()]
}

/// Indicator value at one (t2, band) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceValue {
    pub t2: usize,
    pub value: f64,
    pub qualified: usize,
    /// Number of windows actually fitted; short histories truncate the band.
    pub attempted: usize,
    pub partial: bool,
}

/// Fits every window size in the band ending at `t2` and returns the
/// qualified fraction. Early dates that cannot host the full band are
/// truncated to the windows that fit, with the denominator adjusted and the
/// value flagged partial. Degenerate windows count as attempted, not
/// qualified.
pub fn confidence_at(
    log_prices: &[f64],
    t2: usize,
    band: &ScaleBand,
    search: &SearchConfig,
    filter: &FilterConfig,
) -> Result<ConfidenceValue, ConfidenceError> {
    let t1_values: Vec<usize> = (band.dt_min..=band.dt_max)
        .filter(|&dt| dt <= t2 + 1)
        .map(|dt| t2 + 1 - dt)
        .collect();
    let attempted = t1_values.len();
    if attempted == 0 {
        return Ok(ConfidenceValue {
            t2,
            value: 0.0,
            qualified: 0,
            attempted: 0,
            partial: true,
        });
    }
    let fan = fit_fan(log_prices, t2, &t1_values, search, filter)?;
    let qualified = fan.qualified_count();
    Ok(ConfidenceValue {
        t2,
        value: qualified as f64 / attempted as f64,
        qualified,
        attempted,
        partial: attempted < band.window_count(),
    })
}

/// One band's indicator sampled along the series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandSeries {
    pub band: ScaleBand,
    pub values: Vec<ConfidenceValue>,
}

/// Indicator series per band over `t2` in `[from, to]` stepping by `stride`.
pub fn confidence_series(
    log_prices: &[f64],
    from: usize,
    to: usize,
    stride: usize,
    bands: &[ScaleBand],
    search: &SearchConfig,
    filter: &FilterConfig,
) -> Result<Vec<BandSeries>, ConfidenceError> {
    if stride == 0 {
        return Err(ConfidenceError::ZeroStride);
    }
    if from > to || to >= log_prices.len() {
        return Err(ConfidenceError::BadRange {
            from,
            to,
            len: log_prices.len(),
        });
    }
    bands
        .iter()
        .map(|band| {
            let values = (from..=to)
                .step_by(stride)
                .map(|t2| confidence_at(log_prices, t2, band, search, filter))
                .collect::<Result<Vec<_>, _>>()?;
            Ok(BandSeries {
                band: band.clone(),
                values,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lppls::LpplsParams;
    use crate::synthetic::lppls_trajectory;

    #[test]
    fn default_band_window_counts() {
        assert_eq!(ScaleBand::short().window_count(), 91);
        assert_eq!(ScaleBand::medium().window_count(), 141);
        assert_eq!(ScaleBand::long().window_count(), 521);
    }

    #[test]
    fn band_bounds_validated() {
        assert!(ScaleBand::new("x", 10, 100).is_err());
        assert!(ScaleBand::new("x", 100, 800).is_err());
        assert!(ScaleBand::new("x", 200, 100).is_err());
    }

    #[test]
    fn full_short_band_attempts_91_windows() {
        let truth = LpplsParams {
            a: 6.0,
            b: -0.8,
            c1: 0.04,
            c2: 0.02,
            m: 0.7,
            omega: 13.0,
            tc: 210.0,
        };
        let y = lppls_trajectory(&truth, 200);
        let v = confidence_at(
            &y,
            150,
            &ScaleBand::short(),
            &SearchConfig::coarse(),
            &FilterConfig::default(),
        )
        .unwrap();
        assert_eq!(v.attempted, 91);
        assert!(!v.partial);
        assert!(v.value >= 0.0 && v.value <= 1.0);
        assert_eq!(v.value, v.qualified as f64 / 91.0);
    }

    #[test]
    fn early_t2_truncates_band() {
        let truth = LpplsParams {
            a: 6.0,
            b: -0.8,
            c1: 0.0,
            c2: 0.0,
            m: 0.7,
            omega: 13.0,
            tc: 210.0,
        };
        let y = lppls_trajectory(&truth, 200);
        // t2 = 59 hosts only dt in [30, 60]
        let v = confidence_at(
            &y,
            59,
            &ScaleBand::short(),
            &SearchConfig::coarse(),
            &FilterConfig::default(),
        )
        .unwrap();
        assert_eq!(v.attempted, 31);
        assert!(v.partial);
    }

    #[test]
    fn series_shape_and_stride() {
        let truth = LpplsParams {
            a: 6.0,
            b: -0.8,
            c1: 0.0,
            c2: 0.0,
            m: 0.7,
            omega: 13.0,
            tc: 260.0,
        };
        let y = lppls_trajectory(&truth, 250);
        let bands = vec![ScaleBand::short()];
        let out = confidence_series(
            &y,
            100,
            120,
            10,
            &bands,
            &SearchConfig::coarse(),
            &FilterConfig::default(),
        )
        .unwrap();
        assert_eq!(out.len(), 1);
        let ts: Vec<usize> = out[0].values.iter().map(|v| v.t2).collect();
        assert_eq!(ts, vec![100, 110, 120]);
    }

    #[test]
    fn loosening_the_filter_never_lowers_the_indicator() {
        let truth = LpplsParams {
            a: 6.0,
            b: -0.03,
            c1: 0.001,
            c2: 0.0015,
            m: 0.65,
            omega: 12.5,
            tc: 215.0,
        };
        let y = lppls_trajectory(&truth, 200);
        let tight = FilterConfig::default();
        let mut loose = tight.clone();
        loose.omega_min = 2.0;
        loose.omega_max = 35.0;
        loose.damping_min = 0.2;
        loose.oscillations_min = 1.0;
        let search = SearchConfig::coarse();
        for t2 in [140usize, 170, 199] {
            let a = confidence_at(&y, t2, &ScaleBand::short(), &search, &tight).unwrap();
            let b = confidence_at(&y, t2, &ScaleBand::short(), &search, &loose).unwrap();
            assert!(
                b.value >= a.value,
                "t2 {t2}: loose {} < tight {}",
                b.value,
                a.value
            );
        }
    }

    #[test]
    fn one_date_range_yields_single_value() {
        let truth = LpplsParams {
            a: 6.0,
            b: -0.8,
            c1: 0.0,
            c2: 0.0,
            m: 0.7,
            omega: 13.0,
            tc: 160.0,
        };
        let y = lppls_trajectory(&truth, 150);
        let out = confidence_series(
            &y,
            120,
            120,
            1,
            &[ScaleBand::short()],
            &SearchConfig::coarse(),
            &FilterConfig::default(),
        )
        .unwrap();
        assert_eq!(out[0].values.len(), 1);
    }
}
