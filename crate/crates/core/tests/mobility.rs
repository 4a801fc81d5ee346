use idcsim::mobility::{
    assign_user_sites, generate_hotspots, generate_trajectory, inverse_power_weights, latp_next_waypoint, plan_day,
    sample_pause, MapSpec, Point, UserProfile, MINUTES_PER_DAY,
};
use idcsim::seed;
use proptest::prelude::*;

fn profile(speed: f64, sites: Vec<usize>) -> UserProfile {
    UserProfile {
        user_id: 3,
        speed_mps: speed,
        site_ids: sites,
        pause_min_s: 30.0,
        pause_max_s: 1800.0,
        pause_exponent: 1.5,
        latp_exponent: 3.0,
    }
}

fn small_map() -> MapSpec {
    MapSpec {
        width_m: 2000.0,
        height_m: 2000.0,
        n_hotspots: 60,
        fractal_depth: 3,
    }
}

#[test]
fn latp_frequencies_follow_inverse_cube() {
    let origin = Point::new(0.0, 0.0);
    let sites = [(4, Point::new(1.0, 0.0)), (9, Point::new(0.0, 2.0))];
    let mut rng = seed::stream(11, "latp-freq", &[]);
    let n = 10_000;
    let near = (0..n)
        .filter(|_| latp_next_waypoint(origin, &sites, 3.0, &mut rng) == 4)
        .count() as f64
        / n as f64;
    let p = 8.0 / 9.0;
    let sigma = (p * (1.0 - p) / n as f64).sqrt();
    assert!((near - p).abs() < 3.0 * sigma, "near frequency {near}");
}

#[test]
fn latp_chi_square_three_sites() {
    let origin = Point::new(10.0, 10.0);
    let sites = [
        (0, Point::new(11.0, 10.0)),
        (1, Point::new(10.0, 12.0)),
        (2, Point::new(7.0, 10.0)),
    ];
    // Weights 1, 1/8, 1/27 normalized by hand.
    let raw = [1.0, 1.0 / 8.0, 1.0 / 27.0];
    let total: f64 = raw.iter().sum();
    let mut rng = seed::stream(12, "latp-chi", &[]);
    let n = 10_000;
    let mut counts = [0usize; 3];
    for _ in 0..n {
        counts[latp_next_waypoint(origin, &sites, 3.0, &mut rng)] += 1;
    }
    let chi2: f64 = counts
        .iter()
        .zip(raw)
        .map(|(&c, w)| {
            let e = n as f64 * w / total;
            (c as f64 - e).powi(2) / e
        })
        .sum();
    // Upper 1% point of chi-square with 2 degrees of freedom.
    assert!(chi2 < 9.21, "chi2 = {chi2}, counts {counts:?}");
}

#[test]
fn latp_equidistant_sites_split_evenly() {
    let origin = Point::new(0.0, 0.0);
    let sites = [(0, Point::new(5.0, 0.0)), (1, Point::new(0.0, -5.0))];
    let mut rng = seed::stream(13, "latp-even", &[]);
    let n = 10_000;
    let first = (0..n)
        .filter(|_| latp_next_waypoint(origin, &sites, 3.0, &mut rng) == 0)
        .count() as f64
        / n as f64;
    assert!((first - 0.5).abs() < 0.02, "{first}");
}

#[test]
fn latp_zero_distance_and_single_site() {
    let mut rng = seed::stream(14, "latp-zero", &[]);
    let here = Point::new(3.0, 4.0);
    let sites = [(2, Point::new(9.0, 9.0)), (5, here), (7, here)];
    for _ in 0..100 {
        assert_eq!(latp_next_waypoint(here, &sites, 3.0, &mut rng), 5);
        assert_eq!(latp_next_waypoint(here, &sites[..1], 3.0, &mut rng), 2);
    }
}

#[test]
fn site_selection_weights() {
    let w = inverse_power_weights(
        Point::new(0.0, 0.0),
        &[Point::new(1.0, 0.0), Point::new(2.0, 0.0)],
        3.0,
    );
    assert!((w[0] - 8.0 / 9.0).abs() < 1e-12 && (w[1] - 1.0 / 9.0).abs() < 1e-12);

    let hotspots: Vec<Point> = (0..12).map(|i| Point::new(i as f64 * 10.0, 0.0)).collect();
    let mut rng = seed::stream(15, "sites", &[]);
    let mut all = assign_user_sites(&hotspots, 12, 3.0, &mut rng).unwrap();
    all.sort_unstable();
    assert_eq!(all, (0..12).collect::<Vec<_>>());
    assert_eq!(assign_user_sites(&hotspots, 1, 3.0, &mut rng).unwrap().len(), 1);
    assert!(assign_user_sites(&hotspots, 13, 3.0, &mut rng).is_err());
    let five = assign_user_sites(&hotspots, 5, 3.0, &mut rng).unwrap();
    let mut dedup = five.clone();
    dedup.sort_unstable();
    dedup.dedup();
    assert_eq!(dedup.len(), 5);
}

fn truncated_pareto_cdf(x: f64, lo: f64, hi: f64, a: f64) -> f64 {
    (1.0 - (lo / x).powf(a)) / (1.0 - (lo / hi).powf(a))
}

#[test]
fn pause_distribution_ks() {
    let p = profile(1.0, vec![0, 1]);
    let mut rng = seed::stream(16, "pause-ks", &[]);
    let n = 10_000;
    let mut xs: Vec<f64> = (0..n).map(|_| sample_pause(&p, &mut rng)).collect();
    assert!(xs.iter().all(|&x| (p.pause_min_s..=p.pause_max_s).contains(&x)));
    xs.sort_by(f64::total_cmp);
    let mut d: f64 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let f = truncated_pareto_cdf(x, p.pause_min_s, p.pause_max_s, p.pause_exponent);
        d = d.max((f - i as f64 / n as f64).abs()).max(((i + 1) as f64 / n as f64 - f).abs());
    }
    assert!(d < 0.02, "KS statistic {d}");
}

#[test]
fn steep_pause_tail_concentrates_at_minimum() {
    let mut p = profile(1.0, vec![0, 1]);
    p.pause_exponent = 50.0;
    let mut rng = seed::stream(17, "pause-mean", &[]);
    let n = 10_000;
    let mean = (0..n).map(|_| sample_pause(&p, &mut rng)).sum::<f64>() / n as f64;
    assert!((mean - p.pause_min_s).abs() < 0.05 * p.pause_min_s, "{mean}");
}

#[test]
fn depth_zero_hotspots_are_uniform() {
    let map = MapSpec {
        width_m: 4000.0,
        height_m: 3000.0,
        n_hotspots: 10_000,
        fractal_depth: 0,
    };
    let pts = generate_hotspots(&map, &mut seed::stream(18, "uniform", &[]));
    assert_eq!(pts.len(), 10_000);
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.x).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.y).sum::<f64>() / n;
    let sx = map.width_m / 12f64.sqrt() / n.sqrt();
    let sy = map.height_m / 12f64.sqrt() / n.sqrt();
    assert!((mx - 2000.0).abs() < 3.0 * sx, "mean x {mx}");
    assert!((my - 1500.0).abs() < 3.0 * sy, "mean y {my}");
}

#[test]
fn hotspot_generation_counts_and_determinism() {
    let map = small_map();
    let a = generate_hotspots(&map, &mut seed::stream(19, "h", &[]));
    let b = generate_hotspots(&map, &mut seed::stream(19, "h", &[]));
    assert_eq!(a, b);
    assert_eq!(a.len(), 60);
    assert!(a.iter().all(|p| map.contains(*p)));
    let one = MapSpec {
        n_hotspots: 1,
        ..map
    };
    let single = generate_hotspots(&one, &mut seed::stream(19, "h", &[]));
    assert_eq!(single.len(), 1);
    assert!(one.contains(single[0]));
}

/// Path length by integrating the itinerary on a one-second grid.
fn integrated_length(itinerary: &idcsim::mobility::Itinerary, horizon_s: f64) -> f64 {
    let mut prev = itinerary.position_at(0.0);
    let mut total = 0.0;
    let mut t = 1.0;
    while t <= horizon_s {
        let p = itinerary.position_at(t);
        total += prev.distance(p);
        prev = p;
        t += 1.0;
    }
    total
}

#[test]
fn faster_user_covers_more_ground() {
    let map = small_map();
    let hotspots = generate_hotspots(&map, &mut seed::stream(20, "h", &[]));
    let sites = assign_user_sites(&hotspots, 8, 3.0, &mut seed::stream(20, "s", &[])).unwrap();
    let horizon = MINUTES_PER_DAY as f64 * 60.0;
    for day in 0..3 {
        let slow = plan_day(&profile(1.0, sites.clone()), &hotspots, &mut seed::stream(21, "d", &[day]));
        let fast = plan_day(&profile(8.0, sites.clone()), &hotspots, &mut seed::stream(21, "d", &[day]));
        let (ls, lf) = (integrated_length(&slow, horizon), integrated_length(&fast, horizon));
        assert!(lf >= ls, "day {day}: fast {lf} < slow {ls}");
        assert!((slow.path_length_until(horizon) - ls).abs() < 1e-6 * (1.0 + ls));
    }
}

#[test]
fn days_start_at_the_anchor_and_regenerate_alone() {
    let map = small_map();
    let hotspots = generate_hotspots(&map, &mut seed::stream(22, "h", &[]));
    let sites = assign_user_sites(&hotspots, 6, 3.0, &mut seed::stream(22, "s", &[])).unwrap();
    let p = profile(4.0, sites);
    let all = generate_trajectory(&p, &map, &hotspots, 4, 99);
    assert_eq!(all, generate_trajectory(&p, &map, &hotspots, 4, 99));
    let first_three = generate_trajectory(&p, &map, &hotspots, 3, 99);
    assert_eq!(&all[..3], &first_three[..]);
    for t in &all {
        assert_eq!(t.samples[0], map.clamp(hotspots[p.anchor()]));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn trajectories_respect_grid_map_and_speed(master in any::<u64>(), speed_idx in 0usize..3, k in 2usize..8) {
        let speed = [1.0, 4.0, 8.0][speed_idx];
        let map = small_map();
        let hotspots = generate_hotspots(&map, &mut seed::stream(master, "h", &[]));
        let sites = assign_user_sites(&hotspots, k, 3.0, &mut seed::stream(master, "s", &[])).unwrap();
        let p = profile(speed, sites);
        for t in generate_trajectory(&p, &map, &hotspots, 2, master) {
            prop_assert_eq!(t.samples.len(), MINUTES_PER_DAY);
            prop_assert!(t.samples.iter().all(|q| map.contains(*q)));
            for w in t.samples.windows(2) {
                prop_assert!(w[0].distance(w[1]) <= 60.0 * speed + 1e-9);
            }
        }
    }
}
