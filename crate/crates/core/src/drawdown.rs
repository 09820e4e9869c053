//! Tolerance-based drawup/drawdown segmentation and bubble framing.
//!
//! A drawup (drawdown) is a run of mostly rising (falling) prices that ends
//! when the counter-movement away from the running extremum exceeds a
//! per-date tolerance. Scanning many tolerance settings and voting on the
//! resulting drawup end dates yields a per-date peak fraction, from which
//! long and short bubble peaks are classified and framed into records.

use chrono::NaiveDate;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::timeseries::{LogReturnSeries, PriceSeries, RollingVolatility, TimeSeriesError};

#[derive(Debug, Error)]
pub enum DrawdownError {
    #[error("empty return series")]
    EmptyReturns,
    #[error("epsilon series has {got} entries, need one per return ({need})")]
    EpsilonLength { got: usize, need: usize },
    #[error("negative epsilon at index {0}")]
    NegativeEpsilon(usize),
    #[error("tolerance multiplier must be positive, got {0}")]
    NonPositiveMultiplier(f64),
    #[error("series of {len} returns too short for volatility window {window}")]
    SeriesTooShort { len: usize, window: usize },
    #[error("frame {index}: start {start} not before peak {peak}")]
    StartNotBeforePeak { index: usize, start: usize, peak: usize },
    #[error("frame {index}: start {start} overlaps previous peak {prev_peak}")]
    OverlappingFrames { index: usize, start: usize, prev_peak: usize },
    #[error("frames not ordered by peak")]
    UnorderedPeaks,
    #[error(transparent)]
    TimeSeries(#[from] TimeSeriesError),
}

/// One point of the tolerance grid: multiplier and volatility window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpsilonConfig {
    pub eps0: f64,
    pub window: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SegmentKind {
    Drawup,
    Drawdown,
}

impl SegmentKind {
    fn opposite(self) -> Self {
        match self {
            SegmentKind::Drawup => SegmentKind::Drawdown,
            SegmentKind::Drawdown => SegmentKind::Drawup,
        }
    }
}

/// One phase of the segmentation, in price indices.
///
/// Consecutive segments share their boundary index: the extremum that ends a
/// phase is also the reference price starting the next one, so the return
/// intervals partition the series while the index intervals touch.
///
/// For a segment closed by the tolerance rule, `end` is the running extremum
/// (first index attaining it) and equals `extremum`. The final segment of a
/// series is usually still open when the data runs out; it is emitted with
/// `closed = false`, `end` at the last index, and `extremum` wherever the
/// running extremum was.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub kind: SegmentKind,
    pub start: usize,
    pub end: usize,
    pub extremum: usize,
    pub closed: bool,
}

/// Segments a return series under a per-date tolerance.
///
/// `epsilon[i]` is the tolerance in force on the date of return `i`. The
/// first phase direction is seeded by the sign of the first return (zero
/// seeds a drawup). A phase ends when the deviation from its running
/// extremum strictly exceeds the tolerance; the boundary is placed at the
/// extremum and scanning restarts just after it.
pub fn segment(returns: &LogReturnSeries, epsilon: &[f64]) -> Result<Vec<Segment>, DrawdownError> {
    let r = returns.returns();
    if r.is_empty() {
        return Err(DrawdownError::EmptyReturns);
    }
    if epsilon.len() != r.len() {
        return Err(DrawdownError::EpsilonLength {
            got: epsilon.len(),
            need: r.len(),
        });
    }
    if let Some(i) = epsilon.iter().position(|&e| e.is_nan() || e < 0.0) {
        return Err(DrawdownError::NegativeEpsilon(i));
    }

    let n_prices = r.len() + 1;
    let last = n_prices - 1;
    let mut out = Vec::new();

    let mut kind = if r[0] < 0.0 {
        SegmentKind::Drawdown
    } else {
        SegmentKind::Drawup
    };
    let mut start = 0usize;

    'phases: loop {
        // cumulative log-price change measured from the phase start
        let mut cum = 0.0f64;
        let mut best = 0.0f64;
        let mut best_idx = start;
        let mut i = start + 1;
        while i <= last {
            cum += r[i - 1];
            let improved = match kind {
                SegmentKind::Drawup => cum > best,
                SegmentKind::Drawdown => cum < best,
            };
            if improved {
                best = cum;
                best_idx = i;
            }
            let delta = match kind {
                SegmentKind::Drawup => best - cum,
                SegmentKind::Drawdown => cum - best,
            };
            if delta > epsilon[i - 1] {
                out.push(Segment {
                    kind,
                    start,
                    end: best_idx,
                    extremum: best_idx,
                    closed: true,
                });
                kind = kind.opposite();
                start = best_idx;
                if start == last {
                    break 'phases;
                }
                continue 'phases;
            }
            i += 1;
        }
        // data ran out mid-phase
        out.push(Segment {
            kind,
            start,
            end: last,
            extremum: best_idx,
            closed: false,
        });
        break;
    }
    Ok(out)
}

/// Per-date tolerance: elementwise `eps0 * sigma`, backfilled before the
/// volatility window fills so segmentation can start at index 0.
pub fn epsilon_series(vol: &RollingVolatility, eps0: f64) -> Result<Vec<f64>, DrawdownError> {
    if eps0.is_nan() || eps0 <= 0.0 {
        return Err(DrawdownError::NonPositiveMultiplier(eps0));
    }
    Ok(vol.backfilled().into_iter().map(|s| eps0 * s).collect())
}

/// Tolerance grid: multipliers crossed with volatility windows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridConfig {
    pub eps0_min: f64,
    pub eps0_max: f64,
    pub eps0_step: f64,
    pub w_min: usize,
    pub w_max: usize,
    pub w_step: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            eps0_min: 0.1,
            eps0_max: 5.0,
            eps0_step: 0.1,
            w_min: 10,
            w_max: 60,
            w_step: 5,
        }
    }
}

impl GridConfig {
    pub fn eps0_values(&self) -> Vec<f64> {
        let n = ((self.eps0_max - self.eps0_min) / self.eps0_step).round() as usize + 1;
        (0..n).map(|i| self.eps0_min + i as f64 * self.eps0_step).collect()
    }

    pub fn w_values(&self) -> Vec<usize> {
        (self.w_min..=self.w_max).step_by(self.w_step).collect()
    }

    pub fn pairs(&self) -> Vec<EpsilonConfig> {
        let ws = self.w_values();
        self.eps0_values()
            .iter()
            .flat_map(|&eps0| ws.iter().map(move |&window| EpsilonConfig { eps0, window }))
            .collect()
    }
}

/// Per-date fraction of grid pairs voting the date a drawup end.
///
/// Votes are stored as integers so fractions are exact multiples of
/// `1 / total_pairs` and serialization round-trips losslessly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeakFractionSeries {
    pub votes: Vec<u32>,
    pub total_pairs: u32,
}

impl PeakFractionSeries {
    pub fn fraction(&self, index: usize) -> f64 {
        self.votes[index] as f64 / self.total_pairs as f64
    }

    pub fn fractions(&self) -> Vec<f64> {
        self.votes.iter().map(|&v| v as f64 / self.total_pairs as f64).collect()
    }

    pub fn len(&self) -> usize {
        self.votes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.votes.is_empty()
    }
}

/// Runs the segmentation once per grid pair and tallies drawup-end votes.
///
/// A drawup closed by the tolerance rule votes for its end date. A drawup
/// still open when the data ends votes only if the series ends exactly on
/// its running maximum (the trajectory is at a phase-high at the horizon);
/// an open drawup with an interior maximum stays silent, since its true end
/// is not yet observable. Open drawdowns never vote.
pub fn grid_scan(series: &PriceSeries, grid: &GridConfig) -> Result<PeakFractionSeries, DrawdownError> {
    let returns = LogReturnSeries::from_prices(series);
    let pairs = grid.pairs();
    if returns.len() < grid.w_max {
        return Err(DrawdownError::SeriesTooShort {
            len: returns.len(),
            window: grid.w_max,
        });
    }
    let n = series.len();
    let last = n - 1;

    // volatility depends only on w; share across the eps0 sweep
    let vols: std::collections::HashMap<usize, RollingVolatility> = grid
        .w_values()
        .into_iter()
        .map(|w| Ok((w, RollingVolatility::of(&returns, w)?)))
        .collect::<Result<_, DrawdownError>>()?;

    let votes = pairs
        .par_iter()
        .map(|cfg| -> Result<Vec<u32>, DrawdownError> {
            let eps = epsilon_series(&vols[&cfg.window], cfg.eps0)?;
            let segs = segment(&returns, &eps)?;
            let mut local = vec![0u32; n];
            for seg in segs {
                if seg.kind != SegmentKind::Drawup {
                    continue;
                }
                if seg.closed {
                    local[seg.end] += 1;
                } else if seg.extremum == last {
                    local[last] += 1;
                }
            }
            Ok(local)
        })
        .try_reduce(
            || vec![0u32; n],
            |mut a, b| {
                for (x, y) in a.iter_mut().zip(b) {
                    *x += y;
                }
                Ok(a)
            },
        )?;

    Ok(PeakFractionSeries {
        votes,
        total_pairs: pairs.len() as u32,
    })
}

/// Vote-fraction thresholds splitting peaks into long and short classes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PeakThresholds {
    pub long_lo: f64,
    pub short_lo: f64,
}

impl Default for PeakThresholds {
    fn default() -> Self {
        Self {
            long_lo: 0.95,
            short_lo: 0.65,
        }
    }
}

/// Peak indices by class: `long` where `long_lo <= f <= 1`, `short` where
/// `short_lo <= f < long_lo`. Both lists ascend.
pub fn classify_peaks(fractions: &PeakFractionSeries, thresholds: &PeakThresholds) -> (Vec<usize>, Vec<usize>) {
    let mut long = Vec::new();
    let mut short = Vec::new();
    for i in 0..fractions.len() {
        let f = fractions.fraction(i);
        if f >= thresholds.long_lo {
            long.push(i);
        } else if f >= thresholds.short_lo {
            short.push(i);
        }
    }
    (long, short)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BubbleClass {
    Long,
    Short,
}

/// One cataloged bubble: start, peak, crash end, and derived statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BubbleRecord {
    pub class: BubbleClass,
    pub start_index: usize,
    pub peak_index: usize,
    pub crash_end_index: usize,
    pub start: NaiveDate,
    pub peak: NaiveDate,
    pub crash_end: NaiveDate,
    /// Index distance start -> peak.
    pub duration_days: usize,
    /// `100 * (P[peak] / P[start] - 1)`
    pub size_pct: f64,
    /// `100 * (P[crash_end] / P[peak] - 1)`
    pub crash_size_pct: f64,
    /// False when the peak is the last data point (or the next bubble starts
    /// immediately), so no crash could be observed.
    pub crash_observed: bool,
    pub qualified: bool,
}

/// Input to [`frame_bubbles`]: a matched (start, peak) pair with its class.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BubbleFrame {
    pub start_index: usize,
    pub peak_index: usize,
    pub class: BubbleClass,
}

/// Duration/size filter for short-bubble candidates.
pub fn qualify_short(record: &BubbleRecord, min_days: usize, min_size_pct: f64) -> bool {
    record.duration_days >= min_days && record.size_pct >= min_size_pct
}

/// Completes (start, peak) frames with crash ends and derived statistics.
///
/// The crash end of a bubble is the price minimum after its peak, searched
/// up to the start of the next bubble in the merged chronology (inclusive);
/// the last bubble searches to the end of the data. Long bubbles always
/// qualify; short candidates must pass the duration/size filter.
pub fn frame_bubbles(
    series: &PriceSeries,
    frames: &[BubbleFrame],
    min_days: usize,
    min_size_pct: f64,
) -> Result<Vec<BubbleRecord>, DrawdownError> {
    let prices = series.prices();
    let last = series.len() - 1;

    for (i, f) in frames.iter().enumerate() {
        if f.start_index >= f.peak_index {
            return Err(DrawdownError::StartNotBeforePeak {
                index: i,
                start: f.start_index,
                peak: f.peak_index,
            });
        }
        if i > 0 {
            if f.peak_index <= frames[i - 1].peak_index {
                return Err(DrawdownError::UnorderedPeaks);
            }
            if f.start_index < frames[i - 1].peak_index {
                return Err(DrawdownError::OverlappingFrames {
                    index: i,
                    start: f.start_index,
                    prev_peak: frames[i - 1].peak_index,
                });
            }
        }
    }

    let mut out = Vec::with_capacity(frames.len());
    for (i, f) in frames.iter().enumerate() {
        let search_end = if i + 1 < frames.len() {
            frames[i + 1].start_index
        } else {
            last
        };
        let (crash_end_index, crash_observed) = if f.peak_index < search_end {
            // first index attaining the minimum on (peak, search_end]
            let mut best = f.peak_index + 1;
            for j in f.peak_index + 1..=search_end {
                if prices[j] < prices[best] {
                    best = j;
                }
            }
            (best, true)
        } else {
            (f.peak_index, false)
        };

        let size_pct = 100.0 * (prices[f.peak_index] / prices[f.start_index] - 1.0);
        let crash_size_pct = 100.0 * (prices[crash_end_index] / prices[f.peak_index] - 1.0);
        let duration_days = f.peak_index - f.start_index;

        let mut record = BubbleRecord {
            class: f.class,
            start_index: f.start_index,
            peak_index: f.peak_index,
            crash_end_index,
            start: series.date_at(f.start_index),
            peak: series.date_at(f.peak_index),
            crash_end: series.date_at(crash_end_index),
            duration_days,
            size_pct,
            crash_size_pct,
            crash_observed,
            qualified: true,
        };
        if f.class == BubbleClass::Short {
            record.qualified = qualify_short(&record, min_days, min_size_pct);
        }
        out.push(record);
    }
    Ok(out)
}
