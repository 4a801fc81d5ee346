use idcsim::mobility::{MapSpec, Point, Trajectory};
use idcsim::radio::{
    actual_ho_events, best_bs, bpsk_ber, deploy_ppp, link_rate, q_function, rss, snr, Deployment, RadioConfig,
};
use idcsim::seed;
use proptest::prelude::*;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

fn map_16km2() -> MapSpec {
    MapSpec::default()
}

#[test]
fn ppp_mean_count_matches_density() {
    let map = map_16km2();
    for (density, draws) in [(1.0, 2000usize), (20.0, 300)] {
        let expected = density * map.area_km2();
        let total: usize = (0..draws)
            .map(|i| deploy_ppp(&map, density, 16, &mut seed::stream(5, "ppp", &[i as u64])).len())
            .sum();
        let mean = total as f64 / draws as f64;
        // Zero counts are redrawn; at these means that changes nothing measurable.
        let sigma = (expected / draws as f64).sqrt();
        assert!((mean - expected).abs() < 3.0 * sigma, "λ={density}: mean {mean} vs {expected}");
    }
}

#[test]
fn ppp_points_inside_map() {
    let map = map_16km2();
    let dep = deploy_ppp(&map, 10.0, 16, &mut seed::stream(6, "ppp", &[]));
    assert!(dep.stations.iter().all(|b| map.contains(b.pos)));
    assert!(dep.stations.iter().enumerate().all(|(i, b)| b.id == i));
}

/// Fraction of BPSK symbols in error over an AWGN channel at `gamma` (Eb/N0).
fn monte_carlo_ber(gamma: f64, n: usize, rng: &mut seed::Stream) -> f64 {
    let sigma = (1.0 / (2.0 * gamma)).sqrt();
    let mut errors = 0usize;
    for _ in 0..n {
        let bit: bool = rng.random();
        let s = if bit { 1.0 } else { -1.0 };
        let noise: f64 = StandardNormal.sample(rng);
        let r = s + sigma * noise;
        if (r >= 0.0) != bit {
            errors += 1;
        }
    }
    errors as f64 / n as f64
}

#[test]
fn bpsk_matches_monte_carlo() {
    let n = 1_000_000;
    for (i, gamma) in [1.0, 3.16].into_iter().enumerate() {
        let p = bpsk_ber(gamma);
        let measured = monte_carlo_ber(gamma, n, &mut seed::stream(7, "bpsk", &[i as u64]));
        let sigma = (p * (1.0 - p) / n as f64).sqrt();
        assert!((measured - p).abs() < 3.0 * sigma, "γ={gamma}: {measured} vs {p}");
    }
    assert!((q_function(0.0) - 0.5).abs() < 1e-15);
}

#[test]
fn link_budget_arithmetic() {
    let cfg = RadioConfig::default();
    // 100 m at α=4: 0.25 * 1e-8 W.
    let p = rss(&cfg, Point::new(0.0, 0.0), Point::new(60.0, 80.0));
    assert!((p - 2.5e-9).abs() < 1e-21);
    let g = snr(&cfg, p);
    assert!((g - 2.5e4).abs() < 1e-6);
    assert!((link_rate(&cfg, 1.0) - 1e7).abs() < 1e-6);
}

#[test]
fn association_is_nearest_station() {
    let cfg = RadioConfig::default();
    let map = MapSpec {
        width_m: 1000.0,
        height_m: 1000.0,
        ..MapSpec::default()
    };
    let mut rng = seed::stream(8, "voronoi", &[]);
    let positions: Vec<Point> = (0..50)
        .map(|_| Point::new(rng.random_range(0.0..1000.0), rng.random_range(0.0..1000.0)))
        .collect();
    let dep = Deployment::from_positions(50.0, &positions, 16);
    for _ in 0..5000 {
        let ue = Point::new(rng.random_range(0.0..map.width_m), rng.random_range(0.0..map.height_m));
        let mut nearest = 0;
        for (i, p) in positions.iter().enumerate() {
            if ue.distance(*p) < ue.distance(positions[nearest]) {
                nearest = i;
            }
        }
        assert_eq!(best_bs(&dep, &cfg, ue), nearest);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn reversed_walk_reverses_handovers(s in any::<u64>()) {
        let cfg = RadioConfig::default();
        let mut rng = seed::stream(s, "reverse", &[]);
        let positions: Vec<Point> = (0..12)
            .map(|_| Point::new(rng.random_range(0.0..500.0), rng.random_range(0.0..500.0)))
            .collect();
        let dep = Deployment::from_positions(1.0, &positions, 16);
        let samples: Vec<Point> = (0..60)
            .map(|_| Point::new(rng.random_range(0.0..500.0), rng.random_range(0.0..500.0)))
            .collect();
        let n = samples.len();
        let fwd = Trajectory { user_id: 0, day: 0, samples: samples.clone() };
        let rev = Trajectory { user_id: 0, day: 0, samples: samples.into_iter().rev().collect() };
        let a = actual_ho_events(&fwd, &dep, &cfg);
        let mut b = actual_ho_events(&rev, &dep, &cfg);
        b.reverse();
        prop_assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            // A change between samples m-1 and m appears between n-m-1 and n-m reversed.
            prop_assert_eq!(x.minute, n - y.minute);
            prop_assert_eq!((x.from_bs, x.to_bs), (y.to_bs, y.from_bs));
        }
    }

    #[test]
    fn ber_decreases_with_snr(a in 0.0f64..40.0, b in 0.0f64..40.0) {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        prop_assert!(bpsk_ber(lo) >= bpsk_ber(hi));
        prop_assert!(bpsk_ber(hi) <= 0.5);
    }
}
