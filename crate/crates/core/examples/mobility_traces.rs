//! Generates a fractal hotspot map and a few users' minute-by-minute walks,
//! then writes them as CSV and reads them back.
//!
//! `cargo run --example mobility_traces`

use idcsim::io;
use idcsim::mobility::{assign_user_sites, generate_hotspots, generate_trajectory, MapSpec, UserProfile};
use idcsim::seed;

fn main() -> idcsim::Result<()> {
    let map = MapSpec {
        width_m: 2000.0,
        height_m: 2000.0,
        ..MapSpec::default()
    };
    let hotspots = generate_hotspots(&map, &mut seed::stream(1, "hotspots", &[]));
    println!("{} hotspots on a {} km2 map", hotspots.len(), map.area_km2());

    let mut traces = Vec::new();
    for (user_id, speed) in [(0u32, 1.0), (1, 4.0), (2, 8.0)] {
        let site_ids = assign_user_sites(&hotspots, 10, 3.0, &mut seed::stream(1, "sites", &[user_id as u64]))?;
        let profile = UserProfile {
            user_id,
            speed_mps: speed,
            site_ids,
            pause_min_s: 30.0,
            pause_max_s: 1800.0,
            pause_exponent: 1.5,
            latp_exponent: 3.0,
        };
        let days = generate_trajectory(&profile, &map, &hotspots, 3, 1);
        for t in &days {
            let path: f64 = t.samples.windows(2).map(|w| w[0].distance(w[1])).sum();
            let moving = t.samples.windows(2).filter(|w| w[0] != w[1]).count();
            println!(
                "user {user_id} ({speed} m/s) day {}: {:.1} km walked, moving {moving} of {} minutes",
                t.day,
                path / 1000.0,
                t.len()
            );
        }
        traces.extend(days);
    }

    let dir = std::env::temp_dir().join("idcsim-mobility-example");
    std::fs::create_dir_all(&dir)?;
    io::write_hotspots(&dir.join("hotspots.csv"), &hotspots)?;
    io::write_traces(&dir.join("traces.csv"), &traces)?;
    let back = io::read_traces(&dir.join("traces.csv"))?;
    println!("wrote and re-read {} trajectories under {}", back.len(), dir.display());
    Ok(())
}
