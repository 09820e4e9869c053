//! End-to-end orchestration: configuration, the catalog and forecast
//! pipelines, and every file artifact the command-line tool emits.
//!
//! Outputs are deterministic: identical config and input produce
//! byte-identical files. Intermediate artifacts (peak votes, fit dumps) can
//! be written alongside the final tables and re-loaded to resume a run;
//! floats are serialized in shortest round-trip form, so a resumed pipeline
//! reproduces the one-shot results exactly.

use std::io::Write;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::clustering::{optimal_k, scenario_report, ClusterConfig, ClusterError, FitPoint, Scenario};
use crate::confidence::{confidence_series, default_bands, BandSeries, ConfidenceError, ScaleBand};
use crate::drawdown::{
    classify_peaks, frame_bubbles, grid_scan, BubbleClass, BubbleFrame, BubbleRecord, DrawdownError,
    GridConfig, PeakFractionSeries, PeakThresholds,
};
use crate::lagrange::{analyze_fan, LagrangeError, StartTimeAnalysis};
use crate::lppls::{
    fit_fan, FanEntry, FilterConfig, FitFan, FitWindow, LpplsError, LpplsFit, LpplsParams,
    SearchConfig,
};
use crate::timeseries::{PriceSeries, TimeSeriesError};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    TimeSeries(#[from] TimeSeriesError),
    #[error(transparent)]
    Drawdown(#[from] DrawdownError),
    #[error(transparent)]
    Lppls(#[from] LpplsError),
    #[error(transparent)]
    Lagrange(#[from] LagrangeError),
    #[error(transparent)]
    Cluster(#[from] ClusterError),
    #[error(transparent)]
    Confidence(#[from] ConfidenceError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("config parse error: {0}")]
    ConfigParse(#[from] toml::de::Error),
    #[error("config write error: {0}")]
    ConfigWrite(#[from] toml::ser::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("artifact {path}: {msg}")]
    BadArtifact { path: PathBuf, msg: String },
    #[error("invalid config: {0}")]
    ConfigInvalid(String),
    #[error("date {0} not in the series")]
    DateNotFound(NaiveDate),
    #[error("analysis date at index {t2} leaves no fit window (need at least {min} prior points)")]
    AnalysisTooEarly { t2: usize, min: usize },
}

impl PipelineError {
    /// Distinguishes bad input (exit code 1) from numerical failure (2).
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            PipelineError::TimeSeries(_)
                | PipelineError::Io(_)
                | PipelineError::ConfigParse(_)
                | PipelineError::ConfigWrite(_)
                | PipelineError::BadArtifact { .. }
                | PipelineError::ConfigInvalid(_)
                | PipelineError::DateNotFound(_)
                | PipelineError::AnalysisTooEarly { .. }
        )
    }
}

/// Full pipeline configuration. Every field has the reference default and
/// round-trips through the TOML config file; the command line exposes each
/// key as a flag that overrides the file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    /// Input CSV path; commonly supplied on the command line instead.
    pub input: Option<PathBuf>,
    /// Reject calendar gaps in the input (strict daily datasets).
    pub reject_gaps: bool,
    /// Tolerance grid for the segmentation scan.
    pub grid: GridConfig,
    /// Peak-vote classification thresholds.
    pub thresholds: PeakThresholds,
    /// Short-bubble qualification: minimum growth duration in index days.
    pub min_days: usize,
    /// Short-bubble qualification: minimum size in percent.
    pub min_size_pct: f64,
    /// Nonlinear search density for model calibration.
    pub search: SearchConfig,
    /// Fit qualification bounds.
    pub filter: FilterConfig,
    /// Window-size bands for the confidence indicators.
    pub bands: Vec<ScaleBand>,
    /// Recomputation stride (index steps) for indicator series.
    pub stride: usize,
    /// Mock-forecast placement: analysis date this many index steps before
    /// a peak when only the peak is given.
    pub t2_offset: usize,
    /// Start-time fans scan t1 from `t2 - fan_back_max` to
    /// `t2 - fan_back_min` (window sizes 30..=720 by default).
    pub fan_back_max: usize,
    pub fan_back_min: usize,
    /// Scan every n-th start; 1 reproduces the full fan.
    pub fan_stride: usize,
    /// Merge long and short peaks into one chronology for floors and crash
    /// ends (the alternative handles each class separately).
    pub merge_peak_classes: bool,
    /// Cluster-count search range.
    pub k_min: usize,
    pub k_max: usize,
    /// Seeding and restarts for scenario clustering.
    pub cluster: ClusterConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            input: None,
            reject_gaps: false,
            grid: GridConfig::default(),
            thresholds: PeakThresholds::default(),
            min_days: 30,
            min_size_pct: 25.0,
            search: SearchConfig::default(),
            filter: FilterConfig::default(),
            bands: default_bands(),
            stride: 5,
            t2_offset: 10,
            fan_back_max: 719,
            fan_back_min: 29,
            fan_stride: 1,
            merge_peak_classes: true,
            k_min: 2,
            k_max: 10,
            cluster: ClusterConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn load<P: AsRef<Path>>(path: P) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path)?;
        Ok(toml::from_str(&text)?)
    }

    pub fn to_toml(&self) -> Result<String, PipelineError> {
        Ok(toml::to_string_pretty(self)?)
    }

    pub fn save<P: AsRef<Path>>(&self, path: P) -> Result<(), PipelineError> {
        std::fs::write(path, self.to_toml()?)?;
        Ok(())
    }

    /// Hash of the canonical serialized config, for provenance.
    pub fn hash(&self) -> Result<String, PipelineError> {
        let text = self.to_toml()?;
        let mut hasher = Sha256::new();
        hasher.update(text.as_bytes());
        Ok(format!("{:x}", hasher.finalize()))
    }

    /// Checks the cross-field preconditions the type system cannot express.
    /// Every pipeline runner validates before doing work.
    pub fn validate(&self) -> Result<(), PipelineError> {
        let fail = |msg: String| Err(PipelineError::ConfigInvalid(msg));
        let g = &self.grid;
        let positive = |x: f64| x.is_finite() && x > 0.0;
        if !positive(g.eps0_min) || !positive(g.eps0_step) || g.eps0_max < g.eps0_min {
            return fail(format!(
                "tolerance grid needs 0 < eps0_min <= eps0_max and a positive step, got [{}, {}] step {}",
                g.eps0_min, g.eps0_max, g.eps0_step
            ));
        }
        if g.w_min < 2 || g.w_step < 1 || g.w_max < g.w_min {
            return fail(format!(
                "volatility windows need 2 <= w_min <= w_max and step >= 1, got [{}, {}] step {}",
                g.w_min, g.w_max, g.w_step
            ));
        }
        let t = &self.thresholds;
        let thresholds_ok = t.short_lo > 0.0 && t.short_lo < t.long_lo && t.long_lo <= 1.0;
        if !thresholds_ok {
            return fail(format!(
                "peak thresholds need 0 < short_lo < long_lo <= 1, got {} and {}",
                t.short_lo, t.long_lo
            ));
        }
        let s = &self.search;
        if s.m_grid == 0 || s.omega_grid == 0 || s.tc_grid == 0 || s.n_starts == 0 || s.refine_budget == 0 {
            return fail("search grid dimensions, start count and budget must be positive".into());
        }
        let box_ok = s.omega_min > 0.0 && s.omega_min < s.omega_max;
        if !box_ok {
            return fail(format!(
                "search box needs 0 < omega_min < omega_max, got [{}, {}]",
                s.omega_min, s.omega_max
            ));
        }
        let f = &self.filter;
        let filter_ok = f.m_min < f.m_max && f.omega_min <= f.omega_max && f.cb_ratio_threshold >= 0.0;
        if !filter_ok {
            return fail("filter bounds are inconsistent".into());
        }
        for band in &self.bands {
            if band.dt_min < crate::lppls::MIN_WINDOW
                || band.dt_max > crate::lppls::MAX_WINDOW
                || band.dt_min > band.dt_max
            {
                return fail(format!(
                    "band `{}` [{}, {}] outside supported window sizes [{}, {}]",
                    band.name,
                    band.dt_min,
                    band.dt_max,
                    crate::lppls::MIN_WINDOW,
                    crate::lppls::MAX_WINDOW
                ));
            }
        }
        if self.stride == 0 || self.fan_stride == 0 {
            return fail("stride and fan_stride must be at least 1".into());
        }
        if self.fan_back_min + 1 < crate::lppls::MIN_WINDOW
            || self.fan_back_max + 1 > crate::lppls::MAX_WINDOW
            || self.fan_back_min > self.fan_back_max
        {
            return fail(format!(
                "fan bounds [{}, {}] must keep window sizes within [{}, {}]",
                self.fan_back_min,
                self.fan_back_max,
                crate::lppls::MIN_WINDOW,
                crate::lppls::MAX_WINDOW
            ));
        }
        if self.k_min < 2 || self.k_min > self.k_max {
            return fail(format!("cluster range needs 2 <= k_min <= k_max, got [{}, {}]", self.k_min, self.k_max));
        }
        if self.cluster.restarts == 0 || self.cluster.max_iter == 0 {
            return fail("cluster restarts and max_iter must be positive".into());
        }
        Ok(())
    }
}

/// Run metadata attached to catalog outputs. Contains no timestamps so
/// reruns stay byte-identical.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub library_version: String,
    pub config_hash: String,
    pub seed: u64,
    pub grid_pairs: u32,
    pub long_peaks: usize,
    pub short_peaks: usize,
}

/// One classified peak in the merged chronology.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeakSummary {
    pub index: usize,
    pub date: NaiveDate,
    pub fraction: f64,
    pub class: BubbleClass,
}

/// Start-time selection outcome for one peak.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeakStart {
    pub peak_index: usize,
    pub t2: usize,
    pub floor: usize,
    pub t1_star: usize,
    pub lambda: Option<f64>,
    /// True when no usable fan existed and the floor was used as the start.
    pub fallback: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CatalogResult {
    pub fractions: PeakFractionSeries,
    pub peaks: Vec<PeakSummary>,
    pub starts: Vec<PeakStart>,
    pub records: Vec<BubbleRecord>,
    pub provenance: Provenance,
}

/// Where and whether to write intermediate artifacts.
#[derive(Debug, Clone, Default)]
pub struct ArtifactOptions {
    pub out_dir: Option<PathBuf>,
    pub emit_intermediate: bool,
    /// Re-load intermediates present in `out_dir` instead of recomputing.
    pub resume: bool,
}

/// Segmentation output: votes, fractions and classified peaks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentOutput {
    pub total_pairs: u32,
    pub dates: Vec<NaiveDate>,
    pub votes: Vec<u32>,
    pub long_peaks: Vec<PeakSummary>,
    pub short_peaks: Vec<PeakSummary>,
}

impl SegmentOutput {
    pub fn fractions(&self) -> PeakFractionSeries {
        PeakFractionSeries {
            votes: self.votes.clone(),
            total_pairs: self.total_pairs,
        }
    }
}

/// Runs the tolerance-grid scan and classifies peaks.
pub fn run_segment(series: &PriceSeries, cfg: &PipelineConfig) -> Result<SegmentOutput, PipelineError> {
    cfg.validate()?;
    if cfg.reject_gaps {
        series.reject_calendar_gaps()?;
    }
    let fractions = grid_scan(series, &cfg.grid)?;
    let (long, short) = classify_peaks(&fractions, &cfg.thresholds);
    let summarize = |idx: &[usize], class: BubbleClass| -> Vec<PeakSummary> {
        idx.iter()
            .map(|&i| PeakSummary {
                index: i,
                date: series.date_at(i),
                fraction: fractions.fraction(i),
                class,
            })
            .collect()
    };
    Ok(SegmentOutput {
        total_pairs: fractions.total_pairs,
        dates: series.dates().to_vec(),
        votes: fractions.votes.clone(),
        long_peaks: summarize(&long, BubbleClass::Long),
        short_peaks: summarize(&short, BubbleClass::Short),
    })
}

/// Merged chronological peak list (or per-class lists when merging is off).
fn merged_peaks(out: &SegmentOutput) -> Vec<PeakSummary> {
    let mut all: Vec<PeakSummary> = out
        .long_peaks
        .iter()
        .chain(out.short_peaks.iter())
        .copied()
        .collect();
    all.sort_by_key(|p| p.index);
    all
}

/// The `t1` values of a start-time fan at `t2`, oldest first.
fn fan_t1_values(t2: usize, cfg: &PipelineConfig) -> Vec<usize> {
    if t2 < cfg.fan_back_min {
        return Vec::new();
    }
    let lo = t2.saturating_sub(cfg.fan_back_max);
    let hi = t2 - cfg.fan_back_min;
    (lo..=hi).step_by(cfg.fan_stride.max(1)).collect()
}

fn compute_or_load_fan(
    log_prices: &[f64],
    t2: usize,
    cfg: &PipelineConfig,
    opts: &ArtifactOptions,
    label: &str,
) -> Result<FitFan, PipelineError> {
    let path = opts
        .out_dir
        .as_ref()
        .map(|d| d.join(format!("fits_{label}.csv")));
    if opts.resume {
        if let Some(p) = &path {
            if p.exists() {
                return load_fit_dump(p);
            }
        }
    }
    let t1s = fan_t1_values(t2, cfg);
    let fan = fit_fan(log_prices, t2, &t1s, &cfg.search, &cfg.filter)?;
    if opts.emit_intermediate && !fan.entries.is_empty() {
        if let Some(p) = &path {
            write_fit_dump(&fan, p)?;
        }
    }
    Ok(fan)
}

/// Builds the full bubble catalog: peak votes, start times, framed records.
pub fn run_catalog(series: &PriceSeries, cfg: &PipelineConfig) -> Result<CatalogResult, PipelineError> {
    run_catalog_with_artifacts(series, cfg, &ArtifactOptions::default())
}

pub fn run_catalog_with_artifacts(
    series: &PriceSeries,
    cfg: &PipelineConfig,
    opts: &ArtifactOptions,
) -> Result<CatalogResult, PipelineError> {
    cfg.validate()?;
    if let Some(dir) = &opts.out_dir {
        std::fs::create_dir_all(dir)?;
    }

    // stage 1: peak votes
    let votes_path = opts.out_dir.as_ref().map(|d| d.join("votes.json"));
    let segment_out = match (&votes_path, opts.resume) {
        (Some(p), true) if p.exists() => load_segment_output(p)?,
        _ => {
            let out = run_segment(series, cfg)?;
            if opts.emit_intermediate {
                if let Some(p) = &votes_path {
                    write_segment_output(&out, p)?;
                }
            }
            out
        }
    };

    let peaks = merged_peaks(&segment_out);
    let log_prices = series.log_prices();

    // stage 2: start time per peak, floored at the previous peak
    let mut starts = Vec::with_capacity(peaks.len());
    let mut frames = Vec::with_capacity(peaks.len());
    for (i, peak) in peaks.iter().enumerate() {
        let floor = floor_for_peak(&peaks, i, cfg.merge_peak_classes);
        let t2 = peak.index;
        let fan = compute_or_load_fan(&log_prices, t2, cfg, opts, &format!("peak_{t2}"))?;
        let start = match analyze_fan(&fan, floor) {
            Ok(analysis) => {
                if opts.emit_intermediate {
                    if let Some(dir) = &opts.out_dir {
                        write_cost_curve(&analysis, &dir.join(format!("start_time_peak_{t2}.csv")))?;
                    }
                }
                PeakStart {
                    peak_index: t2,
                    t2,
                    floor,
                    t1_star: analysis.t1_star,
                    lambda: Some(analysis.lambda),
                    fallback: false,
                }
            }
            Err(_) => PeakStart {
                peak_index: t2,
                t2,
                floor,
                t1_star: floor,
                lambda: None,
                fallback: true,
            },
        };
        frames.push(BubbleFrame {
            start_index: start.t1_star,
            peak_index: t2,
            class: peak.class,
        });
        starts.push(start);
    }

    // stage 3: frame and qualify
    let records = if cfg.merge_peak_classes {
        frame_bubbles(series, &frames, cfg.min_days, cfg.min_size_pct)?
    } else {
        // frame each class against its own chronology
        let mut records = Vec::new();
        for class in [BubbleClass::Long, BubbleClass::Short] {
            let class_frames: Vec<BubbleFrame> =
                frames.iter().filter(|f| f.class == class).copied().collect();
            records.extend(frame_bubbles(series, &class_frames, cfg.min_days, cfg.min_size_pct)?);
        }
        records.sort_by_key(|r| r.peak_index);
        records
    };

    let provenance = Provenance {
        library_version: env!("CARGO_PKG_VERSION").to_string(),
        config_hash: cfg.hash()?,
        seed: cfg.cluster.seed,
        grid_pairs: segment_out.total_pairs,
        long_peaks: segment_out.long_peaks.len(),
        short_peaks: segment_out.short_peaks.len(),
    };

    let result = CatalogResult {
        fractions: segment_out.fractions(),
        peaks,
        starts,
        records,
        provenance,
    };

    if let Some(dir) = &opts.out_dir {
        write_catalog_csv(series, &result.records, &dir.join("catalog.csv"))?;
        write_start_summary_csv(series, &result.starts, &dir.join("start_times.csv"))?;
        serde_json::to_writer_pretty(
            std::io::BufWriter::new(std::fs::File::create(dir.join("provenance.json"))?),
            &result.provenance,
        )?;
    }
    Ok(result)
}

fn floor_for_peak(peaks: &[PeakSummary], i: usize, merged: bool) -> usize {
    if merged {
        if i > 0 {
            peaks[i - 1].index
        } else {
            0
        }
    } else {
        let class = peaks[i].class;
        peaks[..i]
            .iter()
            .rev()
            .find(|p| p.class == class)
            .map(|p| p.index)
            .unwrap_or(0)
    }
}

/// Start-time analysis at an arbitrary date.
pub fn run_start_time(
    series: &PriceSeries,
    cfg: &PipelineConfig,
    t2: usize,
    floor: usize,
) -> Result<StartTimeAnalysis, PipelineError> {
    cfg.validate()?;
    let t1s = fan_t1_values(t2, cfg);
    if t1s.is_empty() {
        return Err(PipelineError::AnalysisTooEarly {
            t2,
            min: cfg.fan_back_min,
        });
    }
    let log_prices = series.log_prices();
    let fan = fit_fan(&log_prices, t2, &t1s, &cfg.search, &cfg.filter)?;
    Ok(analyze_fan(&fan, floor)?)
}

/// Scenario clustering summary of a forecast.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterSummary {
    pub k: usize,
    pub mean_silhouette: f64,
    pub fallback_single: bool,
    pub scenarios: Vec<Scenario>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastResult {
    pub t2_index: usize,
    pub t2_date: NaiveDate,
    pub floor: usize,
    pub t1_star: usize,
    pub t1_star_date: NaiveDate,
    pub lambda: f64,
    /// Fits attempted over [t1_star, t2 - fan_back_min].
    pub total_fits: usize,
    pub qualified_fits: usize,
    pub qualified_pct: f64,
    /// Qualified fits in (window size, horizon) coordinates.
    pub points: Vec<FitPoint>,
    /// Absent when no fit qualified.
    pub clusters: Option<ClusterSummary>,
}

/// Mock forecast at `t2`: start time, qualified fan, scenario clusters.
///
/// `floor` bounds the start-time search from below; pass the previous peak
/// index, or `None` to derive it from a fresh segmentation scan.
pub fn run_forecast(
    series: &PriceSeries,
    cfg: &PipelineConfig,
    t2: usize,
    floor: Option<usize>,
) -> Result<ForecastResult, PipelineError> {
    run_forecast_with_artifacts(series, cfg, t2, floor, &ArtifactOptions::default())
}

pub fn run_forecast_with_artifacts(
    series: &PriceSeries,
    cfg: &PipelineConfig,
    t2: usize,
    floor: Option<usize>,
    opts: &ArtifactOptions,
) -> Result<ForecastResult, PipelineError> {
    cfg.validate()?;
    if t2 >= series.len() {
        return Err(PipelineError::DateNotFound(series.date_at(series.len() - 1)));
    }
    if fan_t1_values(t2, cfg).is_empty() {
        return Err(PipelineError::AnalysisTooEarly {
            t2,
            min: cfg.fan_back_min,
        });
    }
    if let Some(dir) = &opts.out_dir {
        std::fs::create_dir_all(dir)?;
    }

    let floor = match floor {
        Some(f) => f,
        None => {
            let seg = run_segment(series, cfg)?;
            merged_peaks(&seg)
                .iter()
                .rev()
                .find(|p| p.index < t2)
                .map(|p| p.index)
                .unwrap_or(0)
        }
    };

    let log_prices = series.log_prices();
    let fan = compute_or_load_fan(&log_prices, t2, cfg, opts, &format!("forecast_{t2}"))?;
    let analysis = analyze_fan(&fan, floor)?;
    let t1_star = analysis.t1_star;

    let in_frame: Vec<&FanEntry> = fan.entries.iter().filter(|e| e.t1 >= t1_star).collect();
    let total_fits = in_frame.len();
    let qualified: Vec<&LpplsFit> = in_frame
        .iter()
        .filter_map(|e| e.fit.as_ref())
        .filter(|f| f.qualified)
        .collect();
    let points: Vec<FitPoint> = qualified
        .iter()
        .map(|f| FitPoint {
            dt: f.n as f64,
            horizon: f.tc_minus_t2(),
        })
        .collect();

    let clusters = if points.is_empty() {
        None
    } else {
        let sel = optimal_k(&points, cfg.k_min, cfg.k_max, &cfg.cluster)?;
        let scenarios = scenario_report(&sel.result, &points);
        Some(ClusterSummary {
            k: sel.result.k,
            mean_silhouette: sel.result.mean_silhouette,
            fallback_single: sel.fallback_single,
            scenarios,
        })
    };

    let result = ForecastResult {
        t2_index: t2,
        t2_date: series.date_at(t2),
        floor,
        t1_star,
        t1_star_date: series.date_at(t1_star),
        lambda: analysis.lambda,
        total_fits,
        qualified_fits: qualified.len(),
        qualified_pct: if total_fits > 0 {
            100.0 * qualified.len() as f64 / total_fits as f64
        } else {
            0.0
        },
        points,
        clusters,
    };

    if let Some(dir) = &opts.out_dir {
        if opts.emit_intermediate {
            write_cost_curve(&analysis, &dir.join(format!("start_time_forecast_{t2}.csv")))?;
        }
    }
    Ok(result)
}

/// Indicator rows ready for CSV: one line per (date, band).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceRow {
    pub date: NaiveDate,
    pub band: String,
    pub value: f64,
    pub partial: bool,
}

pub fn run_confidence(
    series: &PriceSeries,
    cfg: &PipelineConfig,
    from: usize,
    to: usize,
) -> Result<Vec<ConfidenceRow>, PipelineError> {
    cfg.validate()?;
    let log_prices = series.log_prices();
    let bands: Vec<BandSeries> = confidence_series(
        &log_prices,
        from,
        to,
        cfg.stride,
        &cfg.bands,
        &cfg.search,
        &cfg.filter,
    )?;
    let mut rows = Vec::new();
    // emit grouped by date then band order, convenient for plotting
    let n_points = bands.first().map(|b| b.values.len()).unwrap_or(0);
    for i in 0..n_points {
        for band in &bands {
            let v = &band.values[i];
            rows.push(ConfidenceRow {
                date: series.date_at(v.t2),
                band: band.band.name.clone(),
                value: v.value,
                partial: v.partial,
            });
        }
    }
    Ok(rows)
}

// ---------------------------------------------------------------------------
// artifacts

pub fn write_segment_output(out: &SegmentOutput, path: &Path) -> Result<(), PipelineError> {
    let file = std::fs::File::create(path)?;
    serde_json::to_writer_pretty(std::io::BufWriter::new(file), out)?;
    Ok(())
}

pub fn load_segment_output(path: &Path) -> Result<SegmentOutput, PipelineError> {
    let file = std::fs::File::open(path)?;
    Ok(serde_json::from_reader(std::io::BufReader::new(file))?)
}

/// Fit dump schema: one row per fan entry, blanks for failed windows.
const FIT_DUMP_HEADER: [&str; 14] = [
    "t1", "t2", "dt", "A", "B", "C1", "C2", "m", "omega", "tc_minus_t2", "sse", "D", "O",
    "qualified",
];

pub fn write_fit_dump(fan: &FitFan, path: &Path) -> Result<(), PipelineError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(FIT_DUMP_HEADER)?;
    for e in &fan.entries {
        match &e.fit {
            Some(f) => {
                let p = &f.params;
                w.write_record([
                    e.t1.to_string(),
                    fan.t2.to_string(),
                    f.n.to_string(),
                    p.a.to_string(),
                    p.b.to_string(),
                    p.c1.to_string(),
                    p.c2.to_string(),
                    p.m.to_string(),
                    p.omega.to_string(),
                    f.tc_minus_t2().to_string(),
                    f.sse.to_string(),
                    f.damping.to_string(),
                    f.oscillations.to_string(),
                    (f.qualified as u8).to_string(),
                ])?;
            }
            None => {
                let mut rec = vec![e.t1.to_string(), fan.t2.to_string()];
                rec.extend(std::iter::repeat_n(String::new(), 12));
                w.write_record(rec)?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn load_fit_dump(path: &Path) -> Result<FitFan, PipelineError> {
    let bad = |msg: String| PipelineError::BadArtifact {
        path: path.to_path_buf(),
        msg,
    };
    let mut rdr = csv::Reader::from_path(path)?;
    {
        let headers = rdr.headers()?;
        if headers.iter().collect::<Vec<_>>() != FIT_DUMP_HEADER {
            return Err(bad("unexpected fit dump header".into()));
        }
    }
    let mut t2_seen: Option<usize> = None;
    let mut entries = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let t1: usize = rec[0].parse().map_err(|e| bad(format!("t1: {e}")))?;
        let t2: usize = rec[1].parse().map_err(|e| bad(format!("t2: {e}")))?;
        if *t2_seen.get_or_insert(t2) != t2 {
            return Err(bad("mixed t2 values in one dump".into()));
        }
        if rec[2].is_empty() {
            entries.push(FanEntry { t1, fit: None });
            continue;
        }
        let num = |i: usize| -> Result<f64, PipelineError> {
            rec[i].parse().map_err(|e| bad(format!("column {i}: {e}")))
        };
        let dt: usize = rec[2].parse().map_err(|e| bad(format!("dt: {e}")))?;
        let params = LpplsParams {
            a: num(3)?,
            b: num(4)?,
            c1: num(5)?,
            c2: num(6)?,
            m: num(7)?,
            omega: num(8)?,
            tc: num(9)? + (dt as f64 - 1.0),
        };
        let fit = LpplsFit {
            window: FitWindow { t1, t2 },
            params,
            sse: num(10)?,
            n: dt,
            damping: num(11)?,
            oscillations: num(12)?,
            qualified: &rec[13] == "1",
        };
        entries.push(FanEntry { t1, fit: Some(fit) });
    }
    let t2 = t2_seen.ok_or_else(|| bad("empty fit dump".into()))?;
    Ok(FitFan { t2, entries })
}

pub fn write_cost_curve(analysis: &StartTimeAnalysis, path: &Path) -> Result<(), PipelineError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["t1", "dt", "sse", "chi2", "chi2_modified"])?;
    for row in &analysis.curve {
        w.write_record([
            row.t1.to_string(),
            row.dt.to_string(),
            row.sse.to_string(),
            row.chi2.to_string(),
            row.chi2_modified.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Catalog CSV mirroring the bubble table: per-class numbering, dates,
/// prices at peak and crash end, duration, sizes, qualification.
pub fn render_catalog_csv(series: &PriceSeries, records: &[BubbleRecord]) -> String {
    let mut out = String::from(
        "nr,class,start,peak,crash_end,price_peak,price_crash_end,duration_days,size_pct,crash_size_pct,crash_observed,qualified\n",
    );
    let mut long_nr = 0usize;
    let mut short_nr = 0usize;
    for r in records {
        let nr = match r.class {
            BubbleClass::Long => {
                long_nr += 1;
                long_nr
            }
            BubbleClass::Short => {
                short_nr += 1;
                short_nr
            }
        };
        let class = match r.class {
            BubbleClass::Long => "long",
            BubbleClass::Short => "short",
        };
        out.push_str(&format!(
            "{nr},{class},{},{},{},{},{},{},{},{},{},{}\n",
            r.start,
            r.peak,
            r.crash_end,
            series.price_at(r.peak_index),
            series.price_at(r.crash_end_index),
            r.duration_days,
            r.size_pct,
            r.crash_size_pct,
            if r.crash_observed { "Y" } else { "N" },
            if r.qualified { "Y" } else { "N" },
        ));
    }
    out
}

pub fn write_catalog_csv(
    series: &PriceSeries,
    records: &[BubbleRecord],
    path: &Path,
) -> Result<(), PipelineError> {
    let mut f = std::fs::File::create(path)?;
    f.write_all(render_catalog_csv(series, records).as_bytes())?;
    Ok(())
}

pub fn write_start_summary_csv(
    series: &PriceSeries,
    starts: &[PeakStart],
    path: &Path,
) -> Result<(), PipelineError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["peak", "t2", "floor", "t1_star", "t1_star_date", "lambda", "fallback"])?;
    for s in starts {
        w.write_record([
            series.date_at(s.peak_index).to_string(),
            s.t2.to_string(),
            s.floor.to_string(),
            s.t1_star.to_string(),
            series.date_at(s.t1_star).to_string(),
            s.lambda.map(|l| l.to_string()).unwrap_or_default(),
            (s.fallback as u8).to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_confidence_csv(rows: &[ConfidenceRow], path: &Path) -> Result<(), PipelineError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["date", "band", "value", "partial"])?;
    for r in rows {
        w.write_record([
            r.date.to_string(),
            r.band.clone(),
            r.value.to_string(),
            (r.partial as u8).to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
