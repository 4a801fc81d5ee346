//! Drops PPP base stations at several densities and walks a UE away from
//! its nearest station, printing the link budget along the way.
//!
//! `cargo run --example radio_link_budget`

use idcsim::mobility::{MapSpec, Point};
use idcsim::radio::{best_bs, deploy_ppp, dual_ber, dual_rate, link_stats, RadioConfig};
use idcsim::seed;

fn main() {
    let map = MapSpec {
        width_m: 2000.0,
        height_m: 2000.0,
        ..MapSpec::default()
    };
    let cfg = RadioConfig::default();
    for density in [5.0, 10.0, 20.0] {
        let dep = deploy_ppp(&map, density, 16, &mut seed::stream(1, "deploy", &[density as u64]));
        println!("λ = {density}/km2: {} stations (expected {})", dep.len(), density * map.area_km2());
    }

    let dep = deploy_ppp(&map, 10.0, 16, &mut seed::stream(1, "deploy", &[10]));
    let start = dep.position(0);
    println!("\n  dist_m  serving  rss_w      snr_db  ber        rate_mbps");
    for d in [1.0, 10.0, 50.0, 100.0, 200.0, 400.0] {
        let ue = map.clamp(Point::new(start.x + d, start.y));
        let serving = best_bs(&dep, &cfg, ue);
        let s = link_stats(&cfg, dep.position(serving), ue);
        println!(
            "  {d:>6}  {serving:>7}  {:.3e}  {:>6.1}  {:.3e}  {:>9.1}",
            s.rss_w,
            10.0 * s.snr.log10(),
            s.ber,
            s.rate_bps / 1e6
        );
    }

    // A UE on the bisector of two distant stations, connected to both.
    let a = Point::new(0.0, 0.0);
    let b = Point::new(1500.0, 0.0);
    let ue = Point::new(750.0, 0.0);
    let (sa, sb) = (link_stats(&cfg, a, ue), link_stats(&cfg, b, ue));
    println!(
        "\ncell edge: single BER {:.3e}, dual BER {:.3e}; single {:.1} Mb/s, dual {:.1} Mb/s",
        sa.ber,
        dual_ber(sa.ber, sb.ber),
        sa.rate_bps / 1e6,
        dual_rate(sa.rate_bps, sb.rate_bps) / 1e6
    );
}
