#![allow(dead_code)]

use std::collections::BTreeMap;

use idcsim::dualconn::{DayLog, EventKind, LinkRecord, SimEvent};
use idcsim::mobility::{Point, Trajectory};
use idcsim::radio::dual_ber;

pub fn trajectory(user_id: u32, samples: Vec<Point>) -> Trajectory {
    Trajectory {
        user_id,
        day: 0,
        samples,
    }
}

pub fn line(from: Point, step: Point, n: usize) -> Vec<Point> {
    (0..n)
        .map(|m| Point::new(from.x + step.x * m as f64, from.y + step.y * m as f64))
        .collect()
}

/// Replays each user's events against its link records and returns the
/// first inconsistency found.
///
/// Checks that every execution or abort closes an open dual connection with
/// the same pair, that triggers only open from single connectivity, that
/// every event departs from the station actually serving, that the recorded
/// links agree with the replayed state, that no dual link has serving equal
/// to target, and that per-minute loads stay within `capacity`.
pub fn check_day(log: &DayLog, capacity: usize) -> Result<(), String> {
    let mut events: BTreeMap<(u32, usize), Vec<&SimEvent>> = BTreeMap::new();
    for e in &log.events {
        events.entry((e.user_id, e.minute)).or_default().push(e);
    }
    let mut links: BTreeMap<u32, Vec<&LinkRecord>> = BTreeMap::new();
    for l in &log.links {
        links.entry(l.user_id).or_default().push(l);
    }
    let mut per_minute: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    for l in &log.links {
        *per_minute.entry((l.minute, l.serving_bs)).or_default() += 1;
        if let Some(t) = l.target_bs {
            if t == l.serving_bs {
                return Err(format!("user {} minute {}: serving = target = {t}", l.user_id, l.minute));
            }
            *per_minute.entry((l.minute, t)).or_default() += 1;
        }
    }
    if let Some(((m, bs), n)) = per_minute.iter().find(|(_, &n)| n > capacity) {
        return Err(format!("minute {m}: station {bs} carries {n} > {capacity}"));
    }

    for (user, recs) in links {
        let mut serving: Option<usize> = None;
        let mut open: Option<(usize, usize)> = None;
        for l in recs {
            for e in events.get(&(user, l.minute)).map(Vec::as_slice).unwrap_or_default() {
                let here = format!("user {user} minute {} {:?}", l.minute, e.kind);
                if serving.is_some_and(|s| s != e.from_bs) {
                    return Err(format!("{here}: departs from {} but serving is {serving:?}", e.from_bs));
                }
                match e.kind {
                    EventKind::DualTriggered => {
                        if open.is_some() {
                            return Err(format!("{here}: already dual"));
                        }
                        open = Some((e.from_bs, e.to_bs));
                    }
                    EventKind::HoExecuted => {
                        if open != Some((e.from_bs, e.to_bs)) {
                            return Err(format!("{here}: no matching trigger, open {open:?}"));
                        }
                        open = None;
                        serving = Some(e.to_bs);
                        continue;
                    }
                    EventKind::DualAborted => {
                        if open != Some((e.from_bs, e.to_bs)) {
                            return Err(format!("{here}: no matching trigger, open {open:?}"));
                        }
                        open = None;
                    }
                    EventKind::ConventionalHo => {
                        if open.is_some() {
                            return Err(format!("{here}: hard handover while dual"));
                        }
                        serving = Some(e.to_bs);
                        continue;
                    }
                    EventKind::DualRejectedLoad => {
                        if open.is_some() {
                            return Err(format!("{here}: rejection while dual"));
                        }
                    }
                }
                serving = Some(e.from_bs);
            }
            let s = *serving.get_or_insert(l.serving_bs);
            if s != l.serving_bs || open.map(|o| o.1) != l.target_bs || open.is_some_and(|o| o.0 != s) {
                return Err(format!(
                    "user {user} minute {}: link ({}, {:?}) vs replay ({s}, {open:?})",
                    l.minute, l.serving_bs, l.target_bs
                ));
            }
        }
    }
    Ok(())
}

/// Dual links carry the product BER and the summed rate; single links carry
/// the serving link's figures.
pub fn check_link_combining(log: &DayLog) -> Result<(), String> {
    for l in &log.links {
        match &l.target {
            Some(t) => {
                let want = dual_ber(l.serving.ber, t.ber);
                if (l.ber - want).abs() > 1e-12 * want.max(1e-300) {
                    return Err(format!("minute {}: ber {} vs product {want}", l.minute, l.ber));
                }
                if l.rate_bps < l.serving.rate_bps.max(t.rate_bps) {
                    return Err(format!("minute {}: rate {} below a component", l.minute, l.rate_bps));
                }
            }
            None => {
                if l.ber != l.serving.ber || l.rate_bps != l.serving.rate_bps {
                    return Err(format!("minute {}: single link figures differ", l.minute));
                }
            }
        }
    }
    Ok(())
}

/// A grid small enough to sweep in a couple of seconds.
pub fn tiny_config() -> idcsim::harness::SimConfig {
    use idcsim::harness::SimConfig;
    let mut cfg = SimConfig::desk();
    cfg.hidden_sizes = vec![8, 8];
    cfg.hyper.epochs = 2;
    cfg.densities = vec![5.0, 20.0];
    cfg.speeds = vec![4.0];
    cfg.users_per_speed = 2;
    cfg.days = 3;
    cfg.seeds = vec![1, 2];
    cfg
}
