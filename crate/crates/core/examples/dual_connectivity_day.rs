//! Simulates one day for three users under single, predicted-dual and
//! ideal-dual connectivity and compares the handover-window link quality.
//!
//! `cargo run --release --example dual_connectivity_day`

use idcsim::dualconn::{simulate_day, EventKind, Mode, SimParams, SimUser};
use idcsim::harness::{build_deployment, build_world, ho_window_metrics, network_ee, train_world, ModelCache, SimConfig, UserHo};
use idcsim::radio::actual_ho_events;

fn main() -> idcsim::Result<()> {
    let mut cfg = SimConfig::desk();
    cfg.hidden_sizes = vec![32, 32];
    cfg.hyper.epochs = 6;
    cfg.days = 8;
    cfg.speeds = vec![4.0];
    let world = build_world(&cfg, 1, 1)?;
    let models = train_world(&cfg, &world, &ModelCache::in_memory())?;
    let dep = build_deployment(&cfg, 1, 1, 10.0);
    let day = cfg.days - 1;
    let users: Vec<SimUser> = world
        .profiles
        .iter()
        .map(|p| SimUser {
            user_id: p.user_id,
            trajectory: world.trace(p.user_id, day),
            model: Some(&*models[&p.user_id]),
        })
        .collect();
    let actual: Vec<UserHo> = users
        .iter()
        .flat_map(|u| {
            actual_ho_events(u.trajectory, &dep, &cfg.radio)
                .into_iter()
                .map(|event| UserHo {
                    user_id: u.user_id,
                    day,
                    event,
                })
        })
        .collect();
    println!("{} stations, {} users, {} handovers on day {day}", dep.len(), users.len(), actual.len());

    for mode in Mode::ALL {
        let params = SimParams {
            policy: cfg.policy.clone(),
            mode,
            ideal_lookahead_min: cfg.ideal_lookahead_min,
        };
        let log = simulate_day(&users, &dep, &cfg.radio, &params)?;
        let w = ho_window_metrics(&log.links, &actual, cfg.ho_window_min)?;
        let count = |k| log.events.iter().filter(|e| e.kind == k).count();
        println!(
            "{mode:>10}: window rate {:.2} Mb/s, window BER {:.3e}, EE {:.0} b/J; \
             {} triggered, {} executed, {} aborted, {} hard handovers",
            w.mean_rate_bps.unwrap_or(0.0) / 1e6,
            w.mean_ber.unwrap_or(0.0),
            network_ee(&log.links, &dep, &cfg.power)?,
            count(EventKind::DualTriggered),
            count(EventKind::HoExecuted),
            count(EventKind::DualAborted),
            count(EventKind::ConventionalHo),
        );
    }
    Ok(())
}
