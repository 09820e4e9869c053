//! Quick built-in numerical checks, printable from the command line.
//!
//! Each check exercises one pipeline stage on synthetic data with a known
//! answer. Returns the number of failures.

use bubblelab_core::clustering::{kmeans, silhouette_scores, ClusterConfig, FitPoint};
use bubblelab_core::drawdown::{segment, SegmentKind};
use bubblelab_core::lagrange::estimate_lambda;
use bubblelab_core::lppls::{
    fit_window, slave_linear, FilterConfig, FitWindow, LpplsParams, SearchConfig,
};
use bubblelab_core::optim::nelder_mead;
use bubblelab_core::synthetic::{lppls_trajectory, prices_from_log};
use bubblelab_core::timeseries::LogReturnSeries;

type Check = fn() -> Result<(), String>;

pub fn run_all() -> usize {
    let checks: Vec<(&str, Check)> = vec![
        ("simplex minimizer", check_simplex),
        ("linear-parameter slaving", check_slaving),
        ("window calibration", check_fit),
        ("drawup segmentation", check_segmentation),
        ("k-means and silhouette", check_clustering),
        ("penalty slope estimation", check_lambda),
    ];
    let mut failures = 0;
    for (name, check) in checks {
        match check() {
            Ok(()) => println!("ok   {name}"),
            Err(msg) => {
                failures += 1;
                println!("FAIL {name}: {msg}");
            }
        }
    }
    if failures == 0 {
        println!("all checks passed");
    } else {
        println!("{failures} check(s) failed");
    }
    failures
}

fn check_simplex() -> Result<(), String> {
    let f = |x: &[f64]| (x[0] - 3.0).powi(2) + 2.0 * (x[1] + 1.0).powi(2);
    let r = nelder_mead(f, &[0.0, 0.0], &[0.5, 0.5], 400, 1e-12);
    if (r.x[0] - 3.0).abs() > 1e-4 || (r.x[1] + 1.0).abs() > 1e-4 {
        return Err(format!("minimum at {:?}", r.x));
    }
    Ok(())
}

fn truth() -> LpplsParams {
    LpplsParams {
        a: 6.0,
        b: -0.04,
        c1: 0.002,
        c2: 0.001,
        m: 0.6,
        omega: 12.0,
        tc: 128.0,
    }
}

fn check_slaving() -> Result<(), String> {
    let y = lppls_trajectory(&truth(), 120);
    let times: Vec<f64> = (0..120).map(|i| i as f64).collect();
    let fit = slave_linear(128.0, 0.6, 12.0, &times, &y).map_err(|e| e.to_string())?;
    if (fit.a - 6.0).abs() > 1e-8 || (fit.b - -0.04).abs() > 1e-8 || fit.sse > 1e-16 {
        return Err(format!("recovered a={} b={} sse={}", fit.a, fit.b, fit.sse));
    }
    Ok(())
}

fn check_fit() -> Result<(), String> {
    let y = lppls_trajectory(&truth(), 120);
    let window = FitWindow::new(0, 119).map_err(|e| e.to_string())?;
    let fit = fit_window(&y, window, &SearchConfig::coarse(), &FilterConfig::default())
        .map_err(|e| e.to_string())?;
    if (fit.params.tc - 128.0).abs() > 2.0 {
        return Err(format!("tc recovered at {}", fit.params.tc));
    }
    Ok(())
}

fn check_segmentation() -> Result<(), String> {
    let log: Vec<f64> = [1.0f64, 2.0, 1.9, 3.0, 1.0].iter().map(|p| p.ln()).collect();
    let series = prices_from_log(&log, chrono::NaiveDate::from_ymd_opt(2015, 1, 1).unwrap());
    let returns = LogReturnSeries::from_prices(&series);
    let eps = vec![0.02; returns.len()];
    let segs = segment(&returns, &eps).map_err(|e| e.to_string())?;
    let shape: Vec<(SegmentKind, usize, usize)> =
        segs.iter().map(|s| (s.kind, s.start, s.end)).collect();
    let expected = vec![
        (SegmentKind::Drawup, 0, 1),
        (SegmentKind::Drawdown, 1, 2),
        (SegmentKind::Drawup, 2, 3),
        (SegmentKind::Drawdown, 3, 4),
    ];
    if shape != expected {
        return Err(format!("segments {shape:?}"));
    }
    Ok(())
}

fn check_clustering() -> Result<(), String> {
    let points = vec![
        FitPoint { dt: 0.0, horizon: 0.0 },
        FitPoint { dt: 0.0, horizon: 1.0 },
        FitPoint { dt: 10.0, horizon: 0.0 },
        FitPoint { dt: 10.0, horizon: 1.0 },
    ];
    let r = kmeans(&points, 2, &ClusterConfig::default()).map_err(|e| e.to_string())?;
    if r.assignments[0] != r.assignments[1] || r.assignments[0] == r.assignments[2] {
        return Err(format!("assignments {:?}", r.assignments));
    }
    let (_, mean) = silhouette_scores(&points, &r.assignments, 2);
    if (mean - 0.9003).abs() > 1e-3 {
        return Err(format!("mean silhouette {mean}"));
    }
    Ok(())
}

fn check_lambda() -> Result<(), String> {
    let costs: Vec<(usize, f64)> = (30..200).map(|n| (n, 0.002 * n as f64 + 0.7)).collect();
    let lambda = estimate_lambda(&costs).map_err(|e| e.to_string())?;
    if (lambda - 0.002).abs() > 1e-12 {
        return Err(format!("lambda {lambda}"));
    }
    Ok(())
}
