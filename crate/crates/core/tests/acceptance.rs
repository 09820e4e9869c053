//! Acceptance suite: one test per exit criterion, each printing a PASS line
//! (run with `cargo test --test acceptance -- --nocapture` to see them).
//!
//! Criterion 7 reproduces the published bitcoin results and needs the user
//! to supply daily btc/usd closes (see README); without the data file it
//! reports SKIP and succeeds.

use std::time::Instant;

use chrono::NaiveDate;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use bubblelab_core::clustering::{kmeans, optimal_k, silhouette_scores, ClusterConfig, FitPoint};
use bubblelab_core::confidence::{confidence_at, ScaleBand};
use bubblelab_core::drawdown::{segment, Segment, SegmentKind};
use bubblelab_core::lagrange::analyze_fan;
use bubblelab_core::lppls::{
    fit_fan, fit_window, slave_linear, FilterConfig, FitWindow, SearchConfig,
};
use bubblelab_core::pipeline::{
    run_catalog, run_catalog_with_artifacts, run_forecast, ArtifactOptions, PipelineConfig,
};
use bubblelab_core::synthetic::{
    add_noise, gbm_log_prices, lppls_trajectory, planted_bubble_log_prices, prices_from_log,
    sample_qualifying_params, sample_recoverable_params,
};
use bubblelab_core::timeseries::{LogReturnSeries, PriceSeries, RollingVolatility};

fn start_date() -> NaiveDate {
    NaiveDate::from_ymd_opt(2015, 1, 1).unwrap()
}

// ---------------------------------------------------------------------------
// criterion 1: segmentation equals a naive transcription of the recursion

/// Independent oracle: works directly on prices, recomputing the cumulative
/// trajectory and its extremum from scratch at every step.
fn oracle_segment(prices: &[f64], epsilon: &[f64]) -> Vec<Segment> {
    let last = prices.len() - 1;
    let log: Vec<f64> = prices.iter().map(|p| p.ln()).collect();
    let first_return = log[1] - log[0];
    let mut kind = if first_return < 0.0 {
        SegmentKind::Drawdown
    } else {
        SegmentKind::Drawup
    };
    let mut start = 0usize;
    let mut out = Vec::new();
    loop {
        // extremum of ln P[k] - ln P[start] over [start, hi], first index
        let ext_over = |hi: usize, k: SegmentKind| -> usize {
            let mut idx = start;
            for j in start..=hi {
                let better = match k {
                    SegmentKind::Drawup => log[j] > log[idx],
                    SegmentKind::Drawdown => log[j] < log[idx],
                };
                if better {
                    idx = j;
                }
            }
            idx
        };
        let mut closed_at: Option<usize> = None;
        for i in start + 1..=last {
            let e = ext_over(i, kind);
            let deviation = match kind {
                SegmentKind::Drawup => log[e] - log[i],
                SegmentKind::Drawdown => log[i] - log[e],
            };
            if deviation > epsilon[i - 1] {
                closed_at = Some(e);
                break;
            }
        }
        match closed_at {
            Some(e) => {
                out.push(Segment {
                    kind,
                    start,
                    end: e,
                    extremum: e,
                    closed: true,
                });
                kind = match kind {
                    SegmentKind::Drawup => SegmentKind::Drawdown,
                    SegmentKind::Drawdown => SegmentKind::Drawup,
                };
                start = e;
                if start == last {
                    break;
                }
            }
            None => {
                out.push(Segment {
                    kind,
                    start,
                    end: last,
                    extremum: ext_over(last, kind),
                    closed: false,
                });
                break;
            }
        }
    }
    out
}

#[test]
fn criterion_1_segmentation_oracle_equivalence() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xC1);
    let normal = Normal::new(0.0, 0.03).unwrap();
    let eps0_values = [0.5, 2.75];
    let w_values = [10usize, 21, 34, 47, 60];

    for series_idx in 0..500 {
        let len = rng.gen_range(80..=300);
        let mut log = Vec::with_capacity(len);
        let mut x: f64 = 3.0 + rng.gen_range(0.0..2.0);
        for _ in 0..len {
            x += normal.sample(&mut rng);
            log.push(x);
        }
        let series = prices_from_log(&log, start_date());
        let returns = LogReturnSeries::from_prices(&series);

        for &w in &w_values {
            let vol = RollingVolatility::of(&returns, w).unwrap();
            for &eps0 in &eps0_values {
                let eps: Vec<f64> = vol.backfilled().iter().map(|s| eps0 * s).collect();
                let fast = segment(&returns, &eps).unwrap();
                let slow = oracle_segment(series.prices(), &eps);
                assert_eq!(fast, slow, "series {series_idx}, eps0 {eps0}, w {w}");
            }
        }
    }
    let elapsed = started.elapsed();
    assert!(
        elapsed.as_secs_f64() < 30.0,
        "oracle equivalence took {elapsed:?}, budget 30 s"
    );
    println!("PASS criterion 1: segmentation == naive recursion on 500 series x 10 pairs ({elapsed:?})");
}

// ---------------------------------------------------------------------------
// criterion 2: slaving matches QR least squares; gradient vanishes

#[test]
fn criterion_2_linear_slaving_correctness() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xC2);
    let noise = Normal::new(0.0, 0.01).unwrap();

    for instance in 0..100 {
        let n = rng.gen_range(60..=200);
        let gap: f64 = rng.gen_range(5.0..30.0);
        let tc = n as f64 - 1.0 + gap;
        let m: f64 = rng.gen_range(0.3..0.8);
        let omega: f64 = rng.gen_range(5.0..15.0);
        let truth_a: f64 = rng.gen_range(1.0..8.0);
        let truth_b: f64 = -rng.gen_range(0.1..2.0);
        let truth_c1: f64 = rng.gen_range(-0.5..0.5);
        let truth_c2: f64 = rng.gen_range(-0.5..0.5);

        let times: Vec<f64> = (0..n).map(|i| i as f64).collect();
        let y: Vec<f64> = times
            .iter()
            .map(|&t| {
                let d = tc - t;
                let pow = d.powf(m);
                let ph = omega * d.ln();
                truth_a
                    + pow * (truth_b + truth_c1 * ph.cos() + truth_c2 * ph.sin())
                    + noise.sample(&mut rng)
            })
            .collect();

        let fit = slave_linear(tc, m, omega, &times, &y).unwrap();

        // independent oracle: SVD least squares on the n x 4 design matrix
        let mut design = nalgebra::DMatrix::zeros(n, 4);
        for (i, &t) in times.iter().enumerate() {
            let d = tc - t;
            let pow = d.powf(m);
            let ph = omega * d.ln();
            design[(i, 0)] = 1.0;
            design[(i, 1)] = pow;
            design[(i, 2)] = pow * ph.cos();
            design[(i, 3)] = pow * ph.sin();
        }
        let rhs = nalgebra::DVector::from_vec(y.clone());
        let oracle = design
            .svd(true, true)
            .solve(&rhs, 0.0)
            .expect("full-rank design");

        let rel = |ours: f64, reference: f64| (ours - reference).abs() / (1.0 + reference.abs());
        assert!(rel(fit.a, oracle[0]) < 1e-9, "instance {instance}: A {} vs {}", fit.a, oracle[0]);
        assert!(rel(fit.b, oracle[1]) < 1e-9, "instance {instance}: B {} vs {}", fit.b, oracle[1]);
        assert!(rel(fit.c1, oracle[2]) < 1e-9, "instance {instance}: C1 {} vs {}", fit.c1, oracle[2]);
        assert!(rel(fit.c2, oracle[3]) < 1e-9, "instance {instance}: C2 {} vs {}", fit.c2, oracle[3]);

        // central finite differences of the cost at the slaved solution
        let cost = |a: f64, b: f64, c1: f64, c2: f64| -> f64 {
            times
                .iter()
                .zip(&y)
                .map(|(&t, &yi)| {
                    let d = tc - t;
                    let pow = d.powf(m);
                    let ph = omega * d.ln();
                    let r = yi - a - pow * (b + c1 * ph.cos() + c2 * ph.sin());
                    r * r
                })
                .sum()
        };
        let f0 = cost(fit.a, fit.b, fit.c1, fit.c2);
        let mut grad_norm: f64 = 0.0;
        for axis in 0..4 {
            let base = [fit.a, fit.b, fit.c1, fit.c2];
            let h = 1e-6 * (1.0 + base[axis].abs());
            let mut hi = base;
            hi[axis] += h;
            let mut lo = base;
            lo[axis] -= h;
            let g = (cost(hi[0], hi[1], hi[2], hi[3]) - cost(lo[0], lo[1], lo[2], lo[3])) / (2.0 * h);
            grad_norm = grad_norm.max(g.abs());
        }
        assert!(
            grad_norm < 1e-6 * f0,
            "instance {instance}: |grad| = {grad_norm}, F = {f0}"
        );
    }
    println!("PASS criterion 2: slaving matches SVD least squares to 1e-9 and zeroes the gradient on 100 instances");
}

// ---------------------------------------------------------------------------
// criterion 3: synthetic parameter recovery

#[test]
fn criterion_3_synthetic_parameter_recovery() {
    let started = Instant::now();
    let search = SearchConfig::default();
    let filter = FilterConfig::default();

    let run_batch = |seed: u64, sigma: f64, tc_tol: f64, m_tol: f64, label: &str| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut hits = 0usize;
        let total = 50usize;
        for _ in 0..total {
            let dt = rng.gen_range(60..=250);
            let gap = rng.gen_range(2.0..(dt as f64 / 6.0).min(25.0));
            let truth = sample_recoverable_params(&mut rng, dt, gap);
            let mut y = lppls_trajectory(&truth, dt);
            add_noise(&mut y, sigma, &mut rng);
            let window = FitWindow::new(0, dt - 1).unwrap();
            let Ok(fit) = fit_window(&y, window, &search, &filter) else {
                continue;
            };
            if (fit.params.tc - truth.tc).abs() <= tc_tol && (fit.params.m - truth.m).abs() <= m_tol
            {
                hits += 1;
            }
        }
        let rate = hits as f64 / total as f64;
        assert!(
            rate >= 0.9,
            "{label}: only {hits}/{total} recoveries within tc +-{tc_tol}, m +-{m_tol}"
        );
        (hits, total)
    };

    let (h0, t0) = run_batch(0xC3A, 0.0, 1.0, 0.02, "noiseless");
    let (h1, t1) = run_batch(0xC3B, 0.01, 5.0, 0.10, "noisy");
    let elapsed = started.elapsed();
    assert!(
        elapsed.as_secs_f64() < 300.0,
        "recovery took {elapsed:?}, budget 5 min"
    );
    println!(
        "PASS criterion 3: parameter recovery noiseless {h0}/{t0}, noisy {h1}/{t1} ({elapsed:?})"
    );
}

// ---------------------------------------------------------------------------
// criterion 4: start-time recovery on planted bubbles

#[test]
fn criterion_4_bubble_start_recovery() {
    let search = SearchConfig::coarse();
    let filter = FilterConfig::default();
    let mut hits = 0usize;
    let total = 50usize;

    for seed in 0..total as u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(0xC400 + seed);
        let bubble_len = rng.gen_range(110..150);
        let (log, _) = planted_bubble_log_prices(300, bubble_len, 10.0, 0.006, 3.0, &mut rng);
        // analyze just before the bubble's end
        let t2 = log.len() - 11;
        let t1s: Vec<usize> = (0..=t2 - 30).step_by(4).collect();
        let fan = fit_fan(&log, t2, &t1s, &search, &filter).unwrap();
        let analysis = analyze_fan(&fan, 0).unwrap();
        if (analysis.t1_star as i64 - 300).unsigned_abs() <= 15 {
            hits += 1;
        }
    }
    let rate = hits as f64 / total as f64;
    assert!(rate >= 0.8, "start recovery {hits}/{total} within +-15");
    println!("PASS criterion 4: start time within +-15 of the planted index in {hits}/{total} runs");
}

// ---------------------------------------------------------------------------
// criterion 5: indicator discrimination

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

#[test]
fn criterion_5_indicator_discrimination() {
    let started = Instant::now();
    let search = SearchConfig::coarse();
    let filter = FilterConfig::default();
    let band = ScaleBand::short();

    // null side: geometric random walks
    let mut null_values = Vec::with_capacity(100);
    for seed in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(0xC5A0 + seed);
        let log = gbm_log_prices(160, 0.0, 0.02, 4.0, &mut rng);
        let v = confidence_at(&log, 155, &band, &search, &filter).unwrap();
        null_values.push(v.value);
    }
    let null_median = median(&mut null_values);
    assert!(
        null_median < 0.05,
        "null short-band median {null_median} not below 0.05"
    );

    // power side: synthetic bubbles analyzed 10 indices before tc
    let mut bubble_values = Vec::with_capacity(50);
    for seed in 0..50u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(0xC5B0 + seed);
        let t2 = 169usize;
        let truth = sample_qualifying_params(&mut rng, t2, 6.0, 10.0);
        let mut log = lppls_trajectory(&truth, t2 + 1);
        add_noise(&mut log, 0.005, &mut rng);
        let v = confidence_at(&log, t2, &band, &search, &filter).unwrap();
        bubble_values.push(v.value);
    }
    let bubble_median = median(&mut bubble_values);
    assert!(
        bubble_median > 0.5,
        "bubble short-band median {bubble_median} not above 0.5"
    );

    let elapsed = started.elapsed();
    println!(
        "PASS criterion 5: short-band median {null_median:.3} on nulls, {bubble_median:.3} near tc ({elapsed:?})"
    );
}

// ---------------------------------------------------------------------------
// criterion 6: clustering oracle

fn wcss_of(points: &[FitPoint], assignment: &[usize], k: usize) -> f64 {
    let mut sums = vec![(0.0f64, 0.0f64, 0usize); k];
    for (p, &a) in points.iter().zip(assignment) {
        sums[a].0 += p.dt;
        sums[a].1 += p.horizon;
        sums[a].2 += 1;
    }
    points
        .iter()
        .zip(assignment)
        .map(|(p, &a)| {
            let (sx, sy, n) = sums[a];
            let dx = p.dt - sx / n as f64;
            let dy = p.horizon - sy / n as f64;
            dx * dx + dy * dy
        })
        .sum()
}

#[test]
fn criterion_6_clustering_oracle() {
    let cfg = ClusterConfig {
        restarts: 50,
        ..ClusterConfig::default()
    };

    // exhaustive bipartition oracle on 20 random 12-point sets
    let mut rng = ChaCha8Rng::seed_from_u64(0xC6);
    for set_idx in 0..20 {
        let n = 12usize;
        let points: Vec<FitPoint> = (0..n)
            .map(|_| FitPoint {
                dt: rng.gen_range(0.0..100.0),
                horizon: rng.gen_range(0.0..100.0),
            })
            .collect();

        let mut best_mask = 1usize;
        let mut best_wcss = f64::INFINITY;
        for mask in 1..(1usize << n) - 1 {
            let assignment: Vec<usize> = (0..n).map(|i| (mask >> i) & 1).collect();
            let w = wcss_of(&points, &assignment, 2);
            if w < best_wcss {
                best_wcss = w;
                best_mask = mask;
            }
        }
        let r = kmeans(&points, 2, &cfg).unwrap();
        assert!(
            (r.wcss - best_wcss).abs() <= 1e-9 * (1.0 + best_wcss),
            "set {set_idx}: kmeans WCSS {} vs exhaustive {best_wcss}",
            r.wcss
        );
        let oracle: Vec<usize> = (0..n).map(|i| (best_mask >> i) & 1).collect();
        let flipped: Vec<usize> = oracle.iter().map(|&a| 1 - a).collect();
        assert!(
            r.assignments == oracle || r.assignments == flipped,
            "set {set_idx}: partition differs from the exhaustive optimum"
        );
    }

    // hand-computed silhouette value
    let points = vec![
        FitPoint { dt: 0.0, horizon: 0.0 },
        FitPoint { dt: 0.0, horizon: 1.0 },
        FitPoint { dt: 10.0, horizon: 0.0 },
        FitPoint { dt: 10.0, horizon: 1.0 },
    ];
    let (scores, _) = silhouette_scores(&points, &[0, 0, 1, 1], 2);
    for s in scores {
        assert!((s - 0.9003).abs() < 1e-3, "silhouette {s} vs 0.9003");
    }

    // planted two-blob structure
    let mut rng = ChaCha8Rng::seed_from_u64(0xC6B);
    let mut points: Vec<FitPoint> = (0..20)
        .map(|_| FitPoint {
            dt: 50.0 + rng.gen_range(-2.0..2.0),
            horizon: 10.0 + rng.gen_range(-2.0..2.0),
        })
        .collect();
    points.extend((0..20).map(|_| FitPoint {
        dt: 300.0 + rng.gen_range(-2.0..2.0),
        horizon: 200.0 + rng.gen_range(-2.0..2.0),
    }));
    let sel = optimal_k(&points, 2, 10, &cfg).unwrap();
    assert_eq!(sel.result.k, 2, "planted blobs should select k = 2");
    assert!(
        sel.result.mean_silhouette > 0.8,
        "planted blobs silhouette {}",
        sel.result.mean_silhouette
    );
    println!("PASS criterion 6: k-means matches the exhaustive bipartition, silhouette checks out");
}

// ---------------------------------------------------------------------------
// criterion 7: published-data reproduction (skips without data)

/// Looks for user-supplied daily btc/usd closes: `$BUBBLELAB_BTCUSD`, then
/// `data/btcusd.csv` relative to the workspace root.
fn btcusd_path() -> Option<std::path::PathBuf> {
    if let Ok(p) = std::env::var("BUBBLELAB_BTCUSD") {
        let p = std::path::PathBuf::from(p);
        if p.exists() {
            return Some(p);
        }
    }
    let candidate = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/btcusd.csv");
    candidate.exists().then_some(candidate)
}

#[test]
fn criterion_7_published_data_reproduction() {
    let Some(path) = btcusd_path() else {
        println!(
            "SKIP criterion 7: no btc/usd data (set BUBBLELAB_BTCUSD or add data/btcusd.csv)"
        );
        return;
    };
    let full = bubblelab_core::timeseries::load_prices(&path).unwrap();

    // restrict to the studied window
    let lo = NaiveDate::from_ymd_opt(2012, 1, 1).unwrap();
    let hi = NaiveDate::from_ymd_opt(2018, 2, 28).unwrap();
    let mut dates = Vec::new();
    let mut prices = Vec::new();
    for (d, p) in full.dates().iter().zip(full.prices()) {
        if *d >= lo && *d <= hi {
            dates.push(*d);
            prices.push(*p);
        }
    }
    let series = PriceSeries::new(dates, prices).unwrap();
    let cfg = PipelineConfig::default();

    let catalog = run_catalog(&series, &cfg).unwrap();

    // long-bubble peak dates, exactly
    let long_dates: Vec<NaiveDate> = catalog
        .peaks
        .iter()
        .filter(|p| matches!(p.class, bubblelab_core::drawdown::BubbleClass::Long))
        .map(|p| p.date)
        .collect();
    let expected_long: Vec<NaiveDate> = ["2013-04-09", "2013-12-04", "2017-12-18"]
        .iter()
        .map(|s| s.parse().unwrap())
        .collect();
    assert_eq!(long_dates, expected_long, "long-bubble peak dates");

    // peak counts
    let short_count = catalog
        .peaks
        .iter()
        .filter(|p| matches!(p.class, bubblelab_core::drawdown::BubbleClass::Short))
        .count();
    assert_eq!(long_dates.len(), 3, "long peak count");
    assert_eq!(short_count, 10, "short peak count");

    // short-bubble qualification pattern
    let short_qualified: Vec<bool> = catalog
        .records
        .iter()
        .filter(|r| matches!(r.class, bubblelab_core::drawdown::BubbleClass::Short))
        .map(|r| r.qualified)
        .collect();
    let expected_pattern = [true, true, false, false, true, true, true, true, true, true];
    assert_eq!(short_qualified, expected_pattern, "short qualification pattern");

    // sizes and crash sizes reproduce when the dates match
    struct Reference {
        start: &'static str,
        peak: &'static str,
        crash_end: &'static str,
        size_pct: f64,
        crash_size_pct: f64,
    }
    let long_refs = [
        Reference { start: "2012-05-28", peak: "2013-04-09", crash_end: "2013-04-16", size_pct: 4416.0, crash_size_pct: -70.27 },
        Reference { start: "2013-07-03", peak: "2013-12-04", crash_end: "2015-01-14", size_pct: 1367.0, crash_size_pct: -84.83 },
        Reference { start: "2016-01-15", peak: "2017-12-18", crash_end: "2017-12-25", size_pct: 5152.0, crash_size_pct: -26.55 },
    ];
    let longs: Vec<_> = catalog
        .records
        .iter()
        .filter(|r| matches!(r.class, bubblelab_core::drawdown::BubbleClass::Long))
        .collect();
    for (rec, reference) in longs.iter().zip(&long_refs) {
        let dates_match = rec.start.to_string() == reference.start
            && rec.peak.to_string() == reference.peak
            && rec.crash_end.to_string() == reference.crash_end;
        if dates_match {
            let size_tol = (0.01 * reference.size_pct.abs()).max(1.0);
            assert!(
                (rec.size_pct - reference.size_pct).abs() <= size_tol,
                "size {} vs {}",
                rec.size_pct,
                reference.size_pct
            );
            let crash_tol = (0.01 * reference.crash_size_pct.abs()).max(1.0);
            assert!(
                (rec.crash_size_pct - reference.crash_size_pct).abs() <= crash_tol,
                "crash {} vs {}",
                rec.crash_size_pct,
                reference.crash_size_pct
            );
        } else {
            println!(
                "note: long bubble dates differ ({} {} {} vs {} {} {}), size check conditional",
                rec.start, rec.peak, rec.crash_end, reference.start, reference.peak, reference.crash_end
            );
        }
    }

    // ensemble forecasts for the first two long bubbles
    struct ForecastRef {
        t2: &'static str,
        qualified_pct: f64,
        clusters: usize,
    }
    let forecast_refs = [
        ForecastRef { t2: "2013-03-28", qualified_pct: 43.0, clusters: 2 },
        ForecastRef { t2: "2013-11-22", qualified_pct: 40.0, clusters: 2 },
    ];
    for (i, fref) in forecast_refs.iter().enumerate() {
        let t2 = series.index_of(fref.t2.parse().unwrap()).expect("t2 in series");
        let floor = if i == 0 {
            0
        } else {
            series.index_of(expected_long[0]).unwrap()
        };
        let fc = run_forecast(&series, &cfg, t2, Some(floor)).unwrap();
        assert!(
            (fc.qualified_pct - fref.qualified_pct).abs() <= 10.0,
            "t2 {}: qualified {}% vs {}%",
            fref.t2,
            fc.qualified_pct,
            fref.qualified_pct
        );
        let k = fc.clusters.as_ref().map(|c| c.k).unwrap_or(0);
        assert!(
            (k as i64 - fref.clusters as i64).abs() <= 1,
            "t2 {}: {} clusters vs {}",
            fref.t2,
            k,
            fref.clusters
        );
    }
    println!("PASS criterion 7: published btc/usd results reproduced");
}

// ---------------------------------------------------------------------------
// criterion 8: byte-identical reruns

#[test]
fn criterion_8_catalog_determinism() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xC8);
    let (log, _) = planted_bubble_log_prices(80, 115, 6.0, 0.004, 3.0, &mut rng);
    let series = prices_from_log(&log, start_date());
    let cfg = PipelineConfig {
        search: SearchConfig::coarse(),
        fan_stride: 3,
        ..PipelineConfig::default()
    };

    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    let mut snapshots = Vec::new();
    for dir in &dirs {
        let opts = ArtifactOptions {
            out_dir: Some(dir.path().to_path_buf()),
            emit_intermediate: true,
            resume: false,
        };
        let result = run_catalog_with_artifacts(&series, &cfg, &opts).unwrap();
        let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir.path())
            .unwrap()
            .map(|e| {
                let e = e.unwrap();
                (
                    e.file_name().to_string_lossy().into_owned(),
                    std::fs::read(e.path()).unwrap(),
                )
            })
            .collect();
        files.sort();
        snapshots.push((result, files));
    }
    assert_eq!(snapshots[0].0, snapshots[1].0, "in-memory results differ");
    let names_a: Vec<&String> = snapshots[0].1.iter().map(|(n, _)| n).collect();
    let names_b: Vec<&String> = snapshots[1].1.iter().map(|(n, _)| n).collect();
    assert_eq!(names_a, names_b, "artifact sets differ");
    for ((name, bytes_a), (_, bytes_b)) in snapshots[0].1.iter().zip(&snapshots[1].1) {
        assert_eq!(bytes_a, bytes_b, "artifact {name} differs between runs");
    }
    println!("PASS criterion 8: two catalog runs are byte-identical");
}
