use asip_core::gaussian::*;
use asip_core::rng::{tag, StreamKey};
use asip_core::stats;

fn draws(variance: f64, n: usize, seed: u64) -> Vec<f64> {
    let spec = NormalSpec::new(variance).unwrap();
    let mut rng = StreamKey::new(seed, tag::DIAGNOSTIC).stream();
    stats::sorted(&(0..n).map(|_| sample_normal(spec, &mut rng)).collect::<Vec<_>>())
}

#[test]
fn w2_between_centered_gaussians_is_difference_of_scales() {
    let unit = NormalSpec::new(1.0).unwrap();
    let w = w2_empirical_vs_gaussian(&draws(4.0, 100_000, 1), unit).unwrap();
    assert!((w - 1.0).abs() <= 0.02, "{w}");
    let own = w2_empirical_vs_gaussian(&draws(1.0, 100_000, 2), unit).unwrap();
    assert!(own <= 0.02, "{own}");
}

#[test]
fn w2_to_own_law_shrinks_with_sample_size() {
    let unit = NormalSpec::new(1.0).unwrap();
    let medians: Vec<f64> = [1_000, 10_000, 100_000]
        .iter()
        .map(|&n| {
            let ws: Vec<f64> =
                (0..20).map(|s| w2_empirical_vs_gaussian(&draws(1.0, n, 100 + s), unit).unwrap()).collect();
            stats::median(&ws)
        })
        .collect();
    assert!(medians[0] > medians[1] && medians[1] > medians[2], "{medians:?}");
}

#[test]
fn quantile_round_trip_on_log_grid() {
    let mut worst: f64 = 0.0;
    for k in 1..=300 {
        let u = 10f64.powf(-(k as f64) / 10.0);
        worst = worst.max((std_normal_cdf(std_normal_quantile(u).unwrap()) - u).abs());
        if u > 1e-15 {
            let v = 1.0 - u;
            worst = worst.max((std_normal_cdf(std_normal_quantile(v).unwrap()) - v).abs());
        }
    }
    assert!(worst <= 1e-10, "{worst:e}");
}

#[test]
fn sampling_is_stream_deterministic() {
    assert_eq!(draws(2.0, 1000, 5), draws(2.0, 1000, 5));
    assert_ne!(draws(2.0, 1000, 5), draws(2.0, 1000, 6));
}
