use hidacur_core::montecarlo::{mc_s_transform, MCConfig};
use hidacur_core::{CurrentParams, TestFunction};

fn config(x: Vec<f64>, paths: u64, steps: usize, seed: u64) -> MCConfig {
    MCConfig::new(CurrentParams::new(x, 1.0).unwrap(), paths, steps, 0.05, seed).unwrap()
}

#[test]
fn zero_test_function_gives_a_centered_estimate() {
    let phi = TestFunction::zero(2).unwrap();
    let mut covered = 0;
    for seed in 0..40 {
        let est = mc_s_transform(&config(vec![0.4, -0.3], 2048, 128, seed), &phi).unwrap();
        if est.mean.iter().zip(&est.stderr).all(|(m, s)| m.abs() <= 4.0 * s) {
            covered += 1;
        }
    }
    assert!(covered >= 38, "{covered}/40 seeds inside 4 stderr");
}

#[test]
fn standard_error_shrinks_like_inverse_square_root() {
    let phi = TestFunction::new(vec![vec![0.5, 0.2, -0.1]]).unwrap();
    let points: Vec<(f64, f64)> = [1_000u64, 10_000, 100_000]
        .iter()
        .map(|&n| {
            let est = mc_s_transform(&config(vec![0.5], n, 128, 17), &phi).unwrap();
            ((n as f64).ln(), est.stderr[0].ln())
        })
        .collect();
    let mx = points.iter().map(|p| p.0).sum::<f64>() / 3.0;
    let my = points.iter().map(|p| p.1).sum::<f64>() / 3.0;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let slope = sxy / sxx;
    assert!((slope + 0.5).abs() <= 0.05, "slope {slope}");
}
