//! Command-line driver for the bubble analysis pipeline.
//!
//! Subcommands mirror the pipeline stages: `segment` votes bubble peaks,
//! `start-time` locates a bubble beginning, `catalog` builds the full bubble
//! table, `confidence` computes the multiscale indicators, `forecast`
//! clusters crash scenarios at a chosen date, and `selftest` runs quick
//! built-in numerical checks.
//!
//! Exit codes: 0 success, 1 input error, 2 numerical failure.

mod selftest;

use std::path::PathBuf;
use std::process::ExitCode;

use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand};

use bubblelab_core::pipeline::{
    run_catalog_with_artifacts, run_confidence, run_forecast_with_artifacts, run_segment,
    run_start_time, write_confidence_csv, write_cost_curve, ArtifactOptions, PipelineConfig,
    PipelineError,
};
use bubblelab_core::timeseries::{load_prices, PriceSeries};

#[derive(Parser)]
#[command(
    name = "bubblelab",
    version,
    about = "Drawup/drawdown bubble catalog, log-periodic calibration, confidence indicators and crash-scenario forecasts for daily price series"
)]
struct Cli {
    /// TOML config file; command-line flags override file values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(flatten)]
    overrides: Overrides,

    #[command(subcommand)]
    command: Command,
}

/// Every pipeline config key as a flag. Unset flags keep the config-file
/// value (or the built-in default).
#[derive(Args, Debug, Default)]
struct Overrides {
    /// Input CSV with header `date,close`.
    #[arg(long, global = true)]
    input: Option<PathBuf>,
    /// Reject calendar gaps in the input.
    #[arg(long, global = true)]
    reject_gaps: Option<bool>,

    // tolerance grid
    #[arg(long, global = true)]
    eps0_min: Option<f64>,
    #[arg(long, global = true)]
    eps0_max: Option<f64>,
    #[arg(long, global = true)]
    eps0_step: Option<f64>,
    #[arg(long, global = true)]
    w_min: Option<usize>,
    #[arg(long, global = true)]
    w_max: Option<usize>,
    #[arg(long, global = true)]
    w_step: Option<usize>,

    // peak classification
    #[arg(long, global = true)]
    long_threshold: Option<f64>,
    #[arg(long, global = true)]
    short_threshold: Option<f64>,

    // short-bubble qualification
    #[arg(long, global = true)]
    min_days: Option<usize>,
    #[arg(long, global = true)]
    min_size_pct: Option<f64>,

    // nonlinear search
    #[arg(long, global = true)]
    m_grid: Option<usize>,
    #[arg(long, global = true)]
    omega_grid: Option<usize>,
    #[arg(long, global = true)]
    tc_grid: Option<usize>,
    #[arg(long, global = true)]
    n_starts: Option<usize>,
    #[arg(long, global = true)]
    refine_budget: Option<usize>,
    #[arg(long, global = true)]
    omega_search_min: Option<f64>,
    #[arg(long, global = true)]
    omega_search_max: Option<f64>,

    // fit filter
    #[arg(long, global = true)]
    filter_b_max: Option<f64>,
    #[arg(long, global = true)]
    filter_m_min: Option<f64>,
    #[arg(long, global = true)]
    filter_m_max: Option<f64>,
    #[arg(long, global = true)]
    filter_omega_min: Option<f64>,
    #[arg(long, global = true)]
    filter_omega_max: Option<f64>,
    #[arg(long, global = true)]
    filter_tc_gap_min: Option<f64>,
    #[arg(long, global = true)]
    filter_tc_gap_max_mult: Option<f64>,
    #[arg(long, global = true)]
    filter_damping_min: Option<f64>,
    #[arg(long, global = true)]
    filter_oscillations_min: Option<f64>,
    #[arg(long, global = true)]
    filter_cb_ratio: Option<f64>,

    /// Comma-separated band names (short,medium,long).
    #[arg(long, global = true, value_delimiter = ',')]
    bands: Option<Vec<String>>,
    #[arg(long, global = true)]
    stride: Option<usize>,
    #[arg(long, global = true)]
    t2_offset: Option<usize>,
    #[arg(long, global = true)]
    fan_back_max: Option<usize>,
    #[arg(long, global = true)]
    fan_back_min: Option<usize>,
    #[arg(long, global = true)]
    fan_stride: Option<usize>,
    #[arg(long, global = true)]
    merge_peak_classes: Option<bool>,

    // scenario clustering
    #[arg(long, global = true)]
    k_min: Option<usize>,
    #[arg(long, global = true)]
    k_max: Option<usize>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    restarts: Option<usize>,
    #[arg(long, global = true)]
    zscore: Option<bool>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the tolerance-grid segmentation and emit peak votes as JSON.
    Segment {
        /// Output JSON path.
        #[arg(long)]
        out: PathBuf,
    },
    /// Locate a bubble start time for a given analysis date.
    StartTime {
        /// Analysis date (window end), ISO-8601.
        #[arg(long)]
        t2: NaiveDate,
        /// Earliest admissible start date; defaults to the series start.
        #[arg(long)]
        floor: Option<NaiveDate>,
        /// Output CSV with the raw and detrended cost curves.
        #[arg(long)]
        out: PathBuf,
    },
    /// Build the full bubble catalog (votes, starts, framed records).
    Catalog {
        /// Output directory for catalog.csv, start_times.csv, provenance.json.
        #[arg(long)]
        out_dir: PathBuf,
        /// Also write intermediate artifacts (votes, fit dumps, cost curves).
        #[arg(long)]
        emit_intermediate: bool,
        /// Re-use intermediate artifacts already present in the directory.
        #[arg(long)]
        resume: bool,
    },
    /// Compute the multiscale confidence indicators.
    Confidence {
        /// First analysis date; defaults to the series start.
        #[arg(long)]
        from: Option<NaiveDate>,
        /// Last analysis date; defaults to the series end.
        #[arg(long)]
        to: Option<NaiveDate>,
        /// Output CSV (date, band, value, partial).
        #[arg(long)]
        out: PathBuf,
    },
    /// Cluster crash-time scenarios at an analysis date.
    Forecast {
        /// Analysis date, ISO-8601. Exactly one of --t2/--peak is required.
        #[arg(long, conflicts_with = "peak")]
        t2: Option<NaiveDate>,
        /// Peak date; the analysis is placed `t2_offset` steps earlier.
        #[arg(long)]
        peak: Option<NaiveDate>,
        /// Earliest admissible start date; derived from a segmentation scan
        /// when omitted.
        #[arg(long)]
        floor: Option<NaiveDate>,
        /// Output JSON with scenarios and the full qualified point set.
        #[arg(long)]
        out: PathBuf,
        /// Also write the fit dump and cost curve next to the output.
        #[arg(long)]
        emit_intermediate: bool,
    },
    /// Run built-in numerical sanity checks.
    Selftest,
}

fn apply_overrides(cfg: &mut PipelineConfig, o: &Overrides) -> Result<(), String> {
    if let Some(v) = &o.input {
        cfg.input = Some(v.clone());
    }
    macro_rules! set {
        ($field:expr, $opt:expr) => {
            if let Some(v) = $opt {
                $field = v;
            }
        };
    }
    set!(cfg.reject_gaps, o.reject_gaps);
    set!(cfg.grid.eps0_min, o.eps0_min);
    set!(cfg.grid.eps0_max, o.eps0_max);
    set!(cfg.grid.eps0_step, o.eps0_step);
    set!(cfg.grid.w_min, o.w_min);
    set!(cfg.grid.w_max, o.w_max);
    set!(cfg.grid.w_step, o.w_step);
    set!(cfg.thresholds.long_lo, o.long_threshold);
    set!(cfg.thresholds.short_lo, o.short_threshold);
    set!(cfg.min_days, o.min_days);
    set!(cfg.min_size_pct, o.min_size_pct);
    set!(cfg.search.m_grid, o.m_grid);
    set!(cfg.search.omega_grid, o.omega_grid);
    set!(cfg.search.tc_grid, o.tc_grid);
    set!(cfg.search.n_starts, o.n_starts);
    set!(cfg.search.refine_budget, o.refine_budget);
    set!(cfg.search.omega_min, o.omega_search_min);
    set!(cfg.search.omega_max, o.omega_search_max);
    set!(cfg.filter.b_max, o.filter_b_max);
    set!(cfg.filter.m_min, o.filter_m_min);
    set!(cfg.filter.m_max, o.filter_m_max);
    set!(cfg.filter.omega_min, o.filter_omega_min);
    set!(cfg.filter.omega_max, o.filter_omega_max);
    set!(cfg.filter.tc_gap_min, o.filter_tc_gap_min);
    set!(cfg.filter.tc_gap_max_dt_multiple, o.filter_tc_gap_max_mult);
    set!(cfg.filter.damping_min, o.filter_damping_min);
    set!(cfg.filter.oscillations_min, o.filter_oscillations_min);
    set!(cfg.filter.cb_ratio_threshold, o.filter_cb_ratio);
    set!(cfg.stride, o.stride);
    set!(cfg.t2_offset, o.t2_offset);
    set!(cfg.fan_back_max, o.fan_back_max);
    set!(cfg.fan_back_min, o.fan_back_min);
    set!(cfg.fan_stride, o.fan_stride);
    set!(cfg.merge_peak_classes, o.merge_peak_classes);
    set!(cfg.k_min, o.k_min);
    set!(cfg.k_max, o.k_max);
    set!(cfg.cluster.seed, o.seed);
    set!(cfg.cluster.restarts, o.restarts);
    set!(cfg.cluster.zscore, o.zscore);

    if let Some(names) = &o.bands {
        let mut bands = Vec::new();
        for name in names {
            let band = match name.as_str() {
                "short" => bubblelab_core::confidence::ScaleBand::short(),
                "medium" => bubblelab_core::confidence::ScaleBand::medium(),
                "long" => bubblelab_core::confidence::ScaleBand::long(),
                other => return Err(format!("unknown band `{other}` (expected short, medium or long; custom bands go in the config file)")),
            };
            bands.push(band);
        }
        cfg.bands = bands;
    }
    Ok(())
}

fn load_input(cfg: &PipelineConfig) -> Result<PriceSeries, PipelineError> {
    let path = cfg.input.as_ref().ok_or_else(|| {
        PipelineError::Io(std::io::Error::new(
            std::io::ErrorKind::InvalidInput,
            "no input file; pass --input or set `input` in the config",
        ))
    })?;
    let series = load_prices(path)?;
    if cfg.reject_gaps {
        series.reject_calendar_gaps()?;
    }
    Ok(series)
}

fn index_of(series: &PriceSeries, date: NaiveDate) -> Result<usize, PipelineError> {
    series.index_of(date).ok_or(PipelineError::DateNotFound(date))
}

fn run(cli: Cli) -> Result<(), PipelineError> {
    let mut cfg = match &cli.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    apply_overrides(&mut cfg, &cli.overrides).map_err(|msg| {
        PipelineError::Io(std::io::Error::new(std::io::ErrorKind::InvalidInput, msg))
    })?;

    match cli.command {
        Command::Segment { out } => {
            let series = load_input(&cfg)?;
            let result = run_segment(&series, &cfg)?;
            bubblelab_core::pipeline::write_segment_output(&result, &out)?;
            if result.long_peaks.is_empty() && result.short_peaks.is_empty() {
                eprintln!("warning: no peaks reached the vote thresholds");
            }
            println!(
                "{} long and {} short peaks over {} grid pairs -> {}",
                result.long_peaks.len(),
                result.short_peaks.len(),
                result.total_pairs,
                out.display()
            );
        }
        Command::StartTime { t2, floor, out } => {
            let series = load_input(&cfg)?;
            let t2_idx = index_of(&series, t2)?;
            let floor_idx = match floor {
                Some(d) => index_of(&series, d)?,
                None => 0,
            };
            let analysis = run_start_time(&series, &cfg, t2_idx, floor_idx)?;
            write_cost_curve(&analysis, &out)?;
            println!(
                "t1* = {} (index {}), lambda = {}, {} windows -> {}",
                series.date_at(analysis.t1_star),
                analysis.t1_star,
                analysis.lambda,
                analysis.curve.len(),
                out.display()
            );
        }
        Command::Catalog {
            out_dir,
            emit_intermediate,
            resume,
        } => {
            let series = load_input(&cfg)?;
            let opts = ArtifactOptions {
                out_dir: Some(out_dir.clone()),
                emit_intermediate,
                resume,
            };
            let result = run_catalog_with_artifacts(&series, &cfg, &opts)?;
            if result.records.is_empty() {
                eprintln!("warning: empty catalog (no peaks reached the vote thresholds)");
            }
            let qualified = result.records.iter().filter(|r| r.qualified).count();
            println!(
                "{} records ({} qualified) -> {}",
                result.records.len(),
                qualified,
                out_dir.join("catalog.csv").display()
            );
        }
        Command::Confidence { from, to, out } => {
            let series = load_input(&cfg)?;
            let from_idx = match from {
                Some(d) => index_of(&series, d)?,
                None => 0,
            };
            let to_idx = match to {
                Some(d) => index_of(&series, d)?,
                None => series.len() - 1,
            };
            let rows = run_confidence(&series, &cfg, from_idx, to_idx)?;
            write_confidence_csv(&rows, &out)?;
            println!("{} indicator rows -> {}", rows.len(), out.display());
        }
        Command::Forecast {
            t2,
            peak,
            floor,
            out,
            emit_intermediate,
        } => {
            let series = load_input(&cfg)?;
            let t2_idx = match (t2, peak) {
                (Some(d), None) => index_of(&series, d)?,
                (None, Some(p)) => {
                    let peak_idx = index_of(&series, p)?;
                    peak_idx
                        .checked_sub(cfg.t2_offset)
                        .ok_or(PipelineError::AnalysisTooEarly {
                            t2: peak_idx,
                            min: cfg.t2_offset,
                        })?
                }
                _ => {
                    return Err(PipelineError::Io(std::io::Error::new(
                        std::io::ErrorKind::InvalidInput,
                        "pass exactly one of --t2 or --peak",
                    )))
                }
            };
            let floor_idx = match floor {
                Some(d) => Some(index_of(&series, d)?),
                None => None,
            };
            let opts = ArtifactOptions {
                out_dir: if emit_intermediate {
                    out.parent().map(|p| p.to_path_buf())
                } else {
                    None
                },
                emit_intermediate,
                resume: false,
            };
            let result = run_forecast_with_artifacts(&series, &cfg, t2_idx, floor_idx, &opts)?;
            serde_json::to_writer_pretty(
                std::io::BufWriter::new(std::fs::File::create(&out)?),
                &result,
            )?;
            match &result.clusters {
                Some(c) => println!(
                    "t2 {}: start {}, {:.0}% qualified ({} of {}), k = {}, mean silhouette = {:.2} -> {}",
                    result.t2_date,
                    result.t1_star_date,
                    result.qualified_pct,
                    result.qualified_fits,
                    result.total_fits,
                    c.k,
                    c.mean_silhouette,
                    out.display()
                ),
                None => println!(
                    "t2 {}: start {}, 0% qualified ({} windows), no scenarios -> {}",
                    result.t2_date,
                    result.t1_star_date,
                    result.total_fits,
                    out.display()
                ),
            }
        }
        Command::Selftest => {
            let failures = selftest::run_all();
            if failures > 0 {
                return Err(PipelineError::Lppls(
                    bubblelab_core::lppls::LpplsError::NoFit,
                ));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // help/version requests are not errors
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_input_error() { 1 } else { 2 })
        }
    }
}
