use asip_core::dynamics::*;
use asip_core::rng::{tag, StreamKey};
use asip_core::stats;

fn model(gamma: f64) -> MapModel {
    MapModel::with_built_density(gamma, 4096, 1e-10, 1_000_000).unwrap()
}

/// Hand evaluation of both branches.
fn by_hand(gamma: f64, x: f64) -> f64 {
    if x < 0.5 {
        x * (1.0 + 2f64.powf(gamma) * x.powf(gamma))
    } else {
        2.0 * x - 1.0
    }
}

#[test]
fn map_values_at_analytic_points() {
    assert_eq!(apply_map(0.5, 0.0).unwrap(), 0.0);
    assert_eq!(apply_map(0.5, 0.75).unwrap(), 0.5);
    assert!((apply_map(0.5, 0.25).unwrap() - 0.426_776_695_296_636_9).abs() < 1e-12);
    assert_eq!(apply_map(0.3, 1.0).unwrap(), 1.0);
    assert!(apply_map(0.3, 1.5).is_err());
    assert!(apply_map(1.0, 0.2).is_err());
}

#[test]
fn preimage_examples() {
    assert_eq!(left_preimage(0.5, 0.0).unwrap(), 0.0);
    assert!((left_preimage(0.5, 0.426_776_695).unwrap() - 0.25).abs() < 1e-9);
    let x = left_preimage(0.25, 0.9).unwrap();
    assert!(x < 0.5 && (apply_map(0.25, x).unwrap() - 0.9).abs() <= 1e-10);
}

#[test]
fn branches_are_increasing_and_stay_in_unit_interval() {
    for gamma in [0.1, 0.25, 0.4, 0.75] {
        let grid: Vec<f64> = (0..10_000).map(|i| i as f64 / 9_999.0).collect();
        let y: Vec<f64> = grid.iter().map(|x| apply_map(gamma, *x).unwrap()).collect();
        assert!(y.iter().all(|v| (0.0..=1.0).contains(v)));
        for (w, xs) in y.windows(2).zip(grid.windows(2)) {
            let same_branch = (xs[0] < 0.5) == (xs[1] < 0.5);
            if same_branch {
                assert!(w[1] > w[0], "gamma={gamma} at {}", xs[0]);
            }
        }
        for (x, v) in grid.iter().zip(&y) {
            assert!((v - by_hand(gamma, *x)).abs() <= 1e-12 * (1.0 + v));
        }
    }
}

#[test]
fn model_preimage_round_trip_on_grid() {
    for gamma in [0.25, 0.4] {
        let m = model(gamma);
        let mut worst: f64 = 0.0;
        // y = 1 has its left preimage at the branch point 1/2 itself
        for i in 0..10_000 {
            let y = i as f64 / 10_000.0;
            let x = m.left_preimage(y);
            assert!((0.0..0.5).contains(&x));
            worst = worst.max((m.apply(x) - y).abs());
        }
        assert!(worst <= 1e-10, "gamma={gamma} worst {worst:e}");
    }
}

#[test]
fn ulam_density_is_normalized_and_self_certifying() {
    for gamma in [0.25, 0.4] {
        let g = build_density(gamma, 4096, 1e-8, 1_000_000).unwrap();
        assert!(g.residual() <= 1e-8);
        assert!(ulam_residual(gamma, &g).unwrap() <= 1e-8);
        let mass: f64 = g.values().iter().sum::<f64>() / g.bins() as f64;
        assert!((mass - 1.0).abs() <= 1e-9);
        assert!(g.values().iter().all(|v| *v >= 0.0));
        let decile = g.bins() / 10;
        let first: f64 = g.values()[..decile].iter().sum();
        let last: f64 = g.values()[g.bins() - decile..].iter().sum();
        assert!(first > last && g.values()[0] > g.values()[g.bins() - 1]);
    }
}

#[test]
fn invariant_sampling_matches_grid_cdf() {
    let m = model(0.25);
    let g = m.density().unwrap();
    let mut rng = StreamKey::new(17, tag::STATIONARY_START).stream();
    let xs: Vec<f64> = (0..1_000_000).map(|_| sample_invariant(&m, &mut rng).unwrap()).collect();
    assert!(stats::ks_distance(&xs, |x| g.cdf(x)) <= 0.005);
    let mean_err = (stats::mean(&xs) - g.mean()).abs();
    assert!(mean_err <= 3.0 * stats::std_error(&xs), "mean error {mean_err}");
}

#[test]
fn point_mass_grid_samples_in_its_cell() {
    let mut values = vec![0.0; 64];
    values[37] = 64.0;
    let grid = DensityGrid::from_values(values, 0.0).unwrap();
    let m = MapModel::new(0.25).unwrap().with_density(grid).unwrap();
    let mut rng = StreamKey::new(1, tag::STATIONARY_START).stream();
    for _ in 0..1000 {
        let x = sample_invariant(&m, &mut rng).unwrap();
        assert_eq!(m.density().unwrap().cell_of(x), 37);
    }
}

#[test]
fn kernel_weights_sum_near_one() {
    let m = model(0.25);
    for i in 0..200 {
        let y = (i as f64 + 0.5) / 200.0;
        let w = m.kernel_weights(y).unwrap();
        let sum = w.left + w.right;
        assert!((sum - 1.0).abs() <= 0.05, "y={y} raw sum {sum}");
    }
}

#[test]
fn chain_is_stationary_and_moves_backwards() {
    let m = model(0.25);
    let t = simulate_chain(&m, 1_000_000, ChainStart::Stationary, StreamKey::new(3, tag::PATH)).unwrap();
    let g = m.density().unwrap();
    assert!(stats::ks_distance(&t.values, |x| g.cdf(x)) <= 0.01);
    for w in t.values.windows(2).take(10_000) {
        assert!((m.apply(w[1]) - w[0]).abs() <= 1e-10);
    }
}

#[test]
fn orbit_examples() {
    assert_eq!(simulate_orbit(0.3, 3, 0.0).unwrap().values, vec![0.0; 3]);
    // 0.5 sits on the right branch: 2·0.5 − 1 = 0
    assert_eq!(simulate_orbit(0.5, 2, 0.75).unwrap().values, vec![0.5, 0.0]);
    let t = simulate_orbit(0.25, 500, 0.123).unwrap();
    for w in t.values.windows(2) {
        assert_eq!(w[1], apply_map(0.25, w[0]).unwrap());
    }
}

#[test]
fn time_reversal_identity() {
    // (T x, …, T^n x) under ν has the law of (Y_n, …, Y_1)
    let m = model(0.25);
    let reps = 100_000;
    let n = 10;
    let mut rng = StreamKey::new(5, tag::STATIONARY_START).stream();
    let orbit_sums: Vec<f64> = (0..reps)
        .map(|_| {
            let mut x = sample_invariant(&m, &mut rng).unwrap();
            (0..n)
                .map(|_| {
                    x = m.apply(x);
                    x
                })
                .sum()
        })
        .collect();
    let chain_sums: Vec<f64> = (0..reps)
        .map(|r| {
            let key = StreamKey::new(6, tag::PATH).replicate(r as u64);
            simulate_chain(&m, n, ChainStart::Stationary, key).unwrap().values.iter().sum()
        })
        .collect();
    let ks = stats::ks_two_sample(&orbit_sums, &chain_sums);
    assert!(ks <= 0.02, "KS {ks}");
}

#[test]
fn trajectories_are_deterministic() {
    let m = model(0.4);
    let key = StreamKey::new(99, tag::PATH);
    let a = simulate_chain(&m, 5000, ChainStart::Stationary, key).unwrap();
    let b = simulate_chain(&m, 5000, ChainStart::Stationary, key).unwrap();
    assert_eq!(a, b);
    let c = simulate_chain(&m, 5000, ChainStart::BurnIn(1000), key).unwrap();
    assert_eq!(c.values.len(), 5000);
}
