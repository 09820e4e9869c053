//! Bubble analysis toolkit for daily price series.
//!
//! The crate segments a price trajectory into alternating drawup/drawdown
//! phases, votes candidate bubble peaks over a grid of tolerance settings,
//! locates bubble start times with a window-size-penalized fit comparison,
//! calibrates a log-periodic power law on many windows, aggregates qualified
//! fits into multiscale confidence indicators, and clusters predicted
//! critical times into crash scenarios.
//!
//! Modules follow the pipeline order:
//!
//! 1. [`timeseries`] — load and validate prices, log-returns, rolling volatility
//! 2. [`drawdown`] — tolerance-based segmentation, peak votes, bubble framing
//! 3. [`lppls`] — model evaluation, linear-parameter slaving, window calibration
//! 4. [`lagrange`] — penalized start-time selection over a fan of fits
//! 5. [`confidence`] — qualified-fit fractions per time-scale band
//! 6. [`clustering`] — k-means scenarios in (window size, horizon) space
//! 7. [`pipeline`] — end-to-end orchestration, config, file artifacts

pub mod clustering;
pub mod confidence;
pub mod drawdown;
pub mod lagrange;
pub mod lppls;
pub mod optim;
pub mod pipeline;
pub mod synthetic;
pub mod timeseries;

pub use timeseries::{LogReturnSeries, PriceSeries, RollingVolatility};
