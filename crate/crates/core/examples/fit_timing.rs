use bubblelab_core::lppls::{fit_window, FilterConfig, FitWindow, SearchConfig};
use bubblelab_core::synthetic::{lppls_trajectory, sample_qualifying_params, add_noise};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::time::Instant;

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for &n in &[120usize, 360, 720] {
        let p = sample_qualifying_params(&mut rng, n - 1, 6.0, 12.0);
        let mut y = lppls_trajectory(&p, n);
        add_noise(&mut y, 0.02, &mut rng);
        let w = FitWindow::new(0, n - 1).unwrap();
        let t0 = Instant::now();
        let fit = fit_window(&y, w, &SearchConfig::default(), &FilterConfig::default()).unwrap();
        println!("dt={n}: {:?} (sse {:.4}, qualified {})", t0.elapsed(), fit.sse, fit.qualified);
    }
}
