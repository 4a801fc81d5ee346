//! Handover-window link quality and network energy efficiency.

use std::collections::{BTreeMap, HashMap};

use super::config::PowerModel;
use crate::dualconn::LinkRecord;
use crate::error::{Error, Result};
use crate::mobility::SAMPLE_PERIOD_S;
use crate::radio::{Deployment, HoEvent};

/// A ground-truth handover of one user on one day.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct UserHo {
    pub user_id: u32,
    pub day: u32,
    pub event: HoEvent,
}

#[derive(Clone, Debug, PartialEq)]
pub struct HoWindow {
    pub user_id: u32,
    pub day: u32,
    pub ho_minute: usize,
    /// Inclusive bounds, clipped to the recorded day.
    pub start: usize,
    pub end: usize,
    pub bers: Vec<f64>,
    pub rates: Vec<f64>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct WindowSummary {
    pub windows: Vec<HoWindow>,
    /// `None` when there were no handovers.
    pub mean_rate_bps: Option<f64>,
    pub mean_ber: Option<f64>,
}

/// Collects `[m - w, m + w]` around every actual handover and averages the
/// per-minute BER and rate over all window minutes.
pub fn ho_window_metrics(links: &[LinkRecord], actual: &[UserHo], w_min: usize) -> Result<WindowSummary> {
    let mut index: HashMap<(u32, u32), BTreeMap<usize, &LinkRecord>> = HashMap::new();
    for l in links {
        index.entry((l.user_id, l.day)).or_default().insert(l.minute, l);
    }
    let mut windows = Vec::with_capacity(actual.len());
    for ho in actual {
        let day = index.get(&(ho.user_id, ho.day)).ok_or_else(|| {
            Error::Config(format!("no link records for user {} on day {}", ho.user_id, ho.day))
        })?;
        let last = *day.keys().next_back().expect("nonempty day");
        let start = ho.event.minute.saturating_sub(w_min);
        let end = (ho.event.minute + w_min).min(last);
        let mut bers = Vec::new();
        let mut rates = Vec::new();
        for m in start..=end {
            let l = day.get(&m).ok_or_else(|| {
                Error::Config(format!("user {} day {} has no record for minute {m}", ho.user_id, ho.day))
            })?;
            bers.push(l.ber);
            rates.push(l.rate_bps);
        }
        windows.push(HoWindow {
            user_id: ho.user_id,
            day: ho.day,
            ho_minute: ho.event.minute,
            start,
            end,
            bers,
            rates,
        });
    }
    let n: usize = windows.iter().map(|w| w.rates.len()).sum();
    let mean = |f: fn(&HoWindow) -> &Vec<f64>| {
        (n > 0).then(|| windows.iter().flat_map(|w| f(w).iter()).sum::<f64>() / n as f64)
    };
    let mean_rate_bps = mean(|w| &w.rates);
    let mean_ber = mean(|w| &w.bers);
    Ok(WindowSummary {
        windows,
        mean_rate_bps,
        mean_ber,
    })
}

/// Delivered bits per joule of network energy. Every deployed station draws
/// `p_fixed_w`, and each active downlink adds `p_tx_w`, in every recorded
/// minute.
pub fn network_ee(links: &[LinkRecord], deployment: &Deployment, power: &PowerModel) -> Result<f64> {
    if links.is_empty() {
        return Err(Error::Config("energy efficiency needs at least one link record".into()));
    }
    if deployment.is_empty() || !(power.p_fixed_w > 0.0) {
        return Err(Error::Config("energy efficiency needs stations with a positive fixed power".into()));
    }
    let mut active: BTreeMap<(u32, usize), usize> = BTreeMap::new();
    let mut bits = 0.0;
    for l in links {
        *active.entry((l.day, l.minute)).or_default() += l.active_links();
        bits += l.rate_bps * SAMPLE_PERIOD_S;
    }
    let fixed = deployment.len() as f64 * power.p_fixed_w;
    let joules: f64 = active
        .values()
        .map(|&n| (fixed + power.p_tx_w * n as f64) * SAMPLE_PERIOD_S)
        .sum();
    Ok(bits / joules)
}
