//! Downhill-simplex minimization for low-dimensional continuous searches.
//!
//! Deterministic (no random restarts), with a hard budget on function
//! evaluations. Callers enforce box constraints by returning `f64::INFINITY`
//! outside the feasible region; the simplex then simply never settles there.

/// Outcome of a simplex minimization.
#[derive(Debug, Clone)]
pub struct SimplexResult {
    pub x: Vec<f64>,
    pub fx: f64,
    pub evals: usize,
    pub converged: bool,
}

/// Classic Nelder-Mead with reflection 1, expansion 2, contraction 0.5,
/// shrink 0.5. `steps` sets the initial simplex edge along each axis.
///
/// The best vertex is never discarded, so the returned value is the best
/// point evaluated within the budget; it can only improve on `f(x0)`.
pub fn nelder_mead<F>(
    mut f: F,
    x0: &[f64],
    steps: &[f64],
    max_evals: usize,
    ftol: f64,
) -> SimplexResult
where
    F: FnMut(&[f64]) -> f64,
{
    let n = x0.len();
    assert!(n >= 1 && steps.len() == n);

    let mut evals = 0usize;
    let mut eval = |x: &[f64], evals: &mut usize| -> f64 {
        *evals += 1;
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };

    // vertices and values, kept sorted best-first
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    let fx0 = eval(x0, &mut evals);
    simplex.push((x0.to_vec(), fx0));
    for j in 0..n {
        let mut x = x0.to_vec();
        x[j] += steps[j];
        let fx = eval(&x, &mut evals);
        simplex.push((x, fx));
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));

    let mut converged = false;
    while evals < max_evals {
        let spread = simplex[n].1 - simplex[0].1;
        if spread.is_finite() && spread.abs() <= ftol * (1.0 + simplex[0].1.abs()) {
            converged = true;
            break;
        }

        // centroid of all but the worst vertex
        let mut centroid = vec![0.0; n];
        for (x, _) in simplex.iter().take(n) {
            for (c, xi) in centroid.iter_mut().zip(x) {
                *c += xi / n as f64;
            }
        }
        let worst = simplex[n].clone();
        let at = |t: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&worst.0)
                .map(|(c, w)| c + t * (c - w))
                .collect()
        };

        let xr = at(1.0);
        let fr = eval(&xr, &mut evals);
        if fr < simplex[0].1 {
            // try to expand
            let xe = at(2.0);
            let fe = eval(&xe, &mut evals);
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[n - 1].1 {
            simplex[n] = (xr, fr);
        } else {
            // contract toward the better of worst/reflected
            let (xc, fc) = if fr < worst.1 {
                let xc = at(0.5);
                let fc = eval(&xc, &mut evals);
                (xc, fc)
            } else {
                let xc = at(-0.5);
                let fc = eval(&xc, &mut evals);
                (xc, fc)
            };
            if fc < worst.1.min(fr) {
                simplex[n] = (xc, fc);
            } else {
                // shrink toward the best vertex
                let best = simplex[0].0.clone();
                for v in simplex.iter_mut().skip(1) {
                    for (xi, bi) in v.0.iter_mut().zip(&best) {
                        *xi = bi + 0.5 * (*xi - bi);
                    }
                    v.1 = eval(&v.0, &mut evals);
                    if evals >= max_evals {
                        break;
                    }
                }
            }
        }
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    }

    let (x, fx) = simplex.swap_remove(0);
    SimplexResult {
        x,
        fx,
        evals,
        converged,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_bowl() {
        let f = |x: &[f64]| (x[0] - 3.0).powi(2) + 2.0 * (x[1] + 1.0).powi(2);
        let r = nelder_mead(f, &[0.0, 0.0], &[0.5, 0.5], 400, 1e-12);
        assert!((r.x[0] - 3.0).abs() < 1e-4, "{:?}", r.x);
        assert!((r.x[1] + 1.0).abs() < 1e-4, "{:?}", r.x);
        assert!(r.fx < 1e-7);
    }

    #[test]
    fn rosenbrock_two_dim() {
        let f = |x: &[f64]| {
            let a = 1.0 - x[0];
            let b = x[1] - x[0] * x[0];
            a * a + 100.0 * b * b
        };
        let r = nelder_mead(f, &[-1.2, 1.0], &[0.2, 0.2], 2000, 1e-14);
        assert!((r.x[0] - 1.0).abs() < 1e-3, "{:?}", r.x);
        assert!((r.x[1] - 1.0).abs() < 1e-3, "{:?}", r.x);
    }

    #[test]
    fn never_worse_than_start() {
        let f = |x: &[f64]| x[0].sin() * 10.0 + x[0] * x[0];
        let start = 2.7;
        let r = nelder_mead(f, &[start], &[0.3], 60, 1e-12);
        assert!(r.fx <= f(&[start]));
    }

    #[test]
    fn respects_infinite_barrier() {
        // feasible region x > 1; minimum of (x-0.5)^2 clips to the barrier
        let f = |x: &[f64]| {
            if x[0] <= 1.0 {
                f64::INFINITY
            } else {
                (x[0] - 0.5) * (x[0] - 0.5)
            }
        };
        let r = nelder_mead(f, &[2.0], &[0.25], 200, 1e-12);
        assert!(r.x[0] > 1.0);
        assert!(r.x[0] < 1.05, "{:?}", r.x);
    }

    #[test]
    fn budget_is_respected() {
        let mut count = 0usize;
        let f = |x: &[f64]| {
            let _ = &mut count;
            x[0] * x[0]
        };
        let r = nelder_mead(f, &[10.0], &[1.0], 37, 0.0);
        assert!(r.evals <= 37 + 1); // shrink loop may finish its last vertex
    }
}
