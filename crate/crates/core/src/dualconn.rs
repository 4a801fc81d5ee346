//! Prediction-triggered dual connectivity.
//!
//! The MME forecasts each single-connected UE's next serving station. When
//! a change is forecast and the target has room, the UE is attached to the
//! target as well (user plane only). The dual-connected UE keeps measuring
//! both stations: once the target beats the serving station by the
//! hysteresis margin for the time-to-trigger, the handover executes and the
//! old serving link is released; if the target instead stays well below
//! the serving station, the forecast is taken to be wrong and the extra
//! link is dropped. UEs without a prepared target hand over conventionally.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::mobility::{Point, Trajectory};
use crate::predictor::{HoForecaster, HoPrediction, LstmForecaster, OracleForecaster, UserModel};
use crate::radio::{best_bs, dual_ber, dual_rate, link_stats, ratio_db, rss, Deployment, LinkStats, RadioConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConnState {
    Single {
        serving: usize,
    },
    Dual {
        serving: usize,
        target: usize,
        trigger_minute: usize,
        above_hysteresis_streak: u32,
        low_rss_streak: u32,
    },
}

impl ConnState {
    pub fn serving(&self) -> usize {
        match *self {
            ConnState::Single { serving } | ConnState::Dual { serving, .. } => serving,
        }
    }

    pub fn target(&self) -> Option<usize> {
        match *self {
            ConnState::Single { .. } => None,
            ConnState::Dual { target, .. } => Some(target),
        }
    }

    pub fn attachments(&self) -> usize {
        if self.target().is_some() {
            2
        } else {
            1
        }
    }
}

/// Attached-UE count per station.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LoadTable {
    counts: Vec<usize>,
    capacity: usize,
}

impl LoadTable {
    pub fn new(n_stations: usize, capacity: usize) -> Self {
        Self {
            counts: vec![0; n_stations],
            capacity,
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn count(&self, bs: usize) -> Result<usize> {
        self.counts.get(bs).copied().ok_or(Error::UnknownStation(bs))
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    pub fn attach(&mut self, bs: usize) -> Result<()> {
        let c = self.counts.get_mut(bs).ok_or(Error::UnknownStation(bs))?;
        if *c >= self.capacity {
            return Err(Error::Contract(format!("station {bs} is full")));
        }
        *c += 1;
        Ok(())
    }

    pub fn detach(&mut self, bs: usize) -> Result<()> {
        let c = self.counts.get_mut(bs).ok_or(Error::UnknownStation(bs))?;
        if *c == 0 {
            return Err(Error::Contract(format!("station {bs} has no attached UE")));
        }
        *c -= 1;
        Ok(())
    }
}

/// Whether `target` can take one more UE.
pub fn admission_check(target: usize, loads: &LoadTable) -> Result<bool> {
    Ok(loads.count(target)? < loads.capacity())
}

#[derive(Clone, Debug, PartialEq)]
pub struct DcPolicy {
    pub hysteresis_db: f64,
    pub ttt_min: u32,
    pub abort_margin_db: f64,
    pub abort_ttt_min: u32,
}

impl Default for DcPolicy {
    fn default() -> Self {
        Self {
            hysteresis_db: 3.0,
            ttt_min: 2,
            abort_margin_db: 10.0,
            abort_ttt_min: 3,
        }
    }
}

impl DcPolicy {
    pub fn validate(&self) -> Result<()> {
        if !(self.hysteresis_db >= 0.0 && self.abort_margin_db >= 0.0) {
            return Err(Error::Config("policy margins must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum EventKind {
    DualTriggered,
    DualRejectedLoad,
    HoExecuted,
    DualAborted,
    ConventionalHo,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::DualTriggered => "DualTriggered",
            EventKind::DualRejectedLoad => "DualRejectedLoad",
            EventKind::HoExecuted => "HoExecuted",
            EventKind::DualAborted => "DualAborted",
            EventKind::ConventionalHo => "ConventionalHo",
        }
    }
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EventKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "DualTriggered" => EventKind::DualTriggered,
            "DualRejectedLoad" => EventKind::DualRejectedLoad,
            "HoExecuted" => EventKind::HoExecuted,
            "DualAborted" => EventKind::DualAborted,
            "ConventionalHo" => EventKind::ConventionalHo,
            other => return Err(Error::Config(format!("unknown event kind `{other}`"))),
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SimEvent {
    pub day: u32,
    pub minute: usize,
    pub user_id: u32,
    pub kind: EventKind,
    pub from_bs: usize,
    pub to_bs: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MmeAction {
    NoAction,
    TriggerDual { target: usize },
    RejectLoad { target: usize },
}

/// MME decision for a single-connected UE.
pub fn mme_decide(state: &ConnState, prediction: Option<&HoPrediction>, loads: &LoadTable) -> Result<MmeAction> {
    let ConnState::Single { serving } = *state else {
        return Err(Error::Contract("MME decisions are only made for single-connected UEs".into()));
    };
    let Some(p) = prediction else {
        return Ok(MmeAction::NoAction);
    };
    if p.target_bs == serving {
        return Err(Error::Contract(format!("prediction targets the serving station {serving}")));
    }
    Ok(if admission_check(p.target_bs, loads)? {
        MmeAction::TriggerDual { target: p.target_bs }
    } else {
        MmeAction::RejectLoad { target: p.target_bs }
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MonitorOutcome {
    KeepDual,
    ExecuteHo,
    AbortDual,
}

/// One RSS measurement by a dual-connected UE; updates the streak counters.
/// Execution wins when both conditions complete on the same sample.
pub fn ue_monitor(state: &mut ConnState, rss_serving: f64, rss_target: f64, policy: &DcPolicy) -> Result<MonitorOutcome> {
    let ConnState::Dual {
        above_hysteresis_streak,
        low_rss_streak,
        ..
    } = state
    else {
        return Err(Error::Contract("UE monitoring requires a dual connection".into()));
    };
    let margin = ratio_db(rss_target, rss_serving);
    if margin >= policy.hysteresis_db {
        *above_hysteresis_streak += 1;
    } else {
        *above_hysteresis_streak = 0;
    }
    if margin <= -policy.abort_margin_db {
        *low_rss_streak += 1;
    } else {
        *low_rss_streak = 0;
    }
    Ok(if *above_hysteresis_streak >= policy.ttt_min.max(1) {
        MonitorOutcome::ExecuteHo
    } else if *low_rss_streak >= policy.abort_ttt_min.max(1) {
        MonitorOutcome::AbortDual
    } else {
        MonitorOutcome::KeepDual
    })
}

/// Attaches the predicted target alongside the serving station.
pub fn trigger_dual(state: &ConnState, target: usize, minute: usize, loads: &mut LoadTable) -> Result<ConnState> {
    let ConnState::Single { serving } = *state else {
        return Err(Error::Contract("UE is already dual-connected".into()));
    };
    if target == serving {
        return Err(Error::Contract("dual target equals serving station".into()));
    }
    loads.attach(target)?;
    Ok(ConnState::Dual {
        serving,
        target,
        trigger_minute: minute,
        above_hysteresis_streak: 0,
        low_rss_streak: 0,
    })
}

/// Prediction update for a dual-connected UE: when the forecast names a
/// station other than the current two and it has room, the old target is
/// released and the new one attached. A target already beating the serving
/// station by the hysteresis margin is kept. Returns the new state, or `None`
/// when nothing changes.
pub fn retarget_dual(
    state: &ConnState,
    prediction: Option<&HoPrediction>,
    minute: usize,
    loads: &mut LoadTable,
) -> Result<Option<ConnState>> {
    let ConnState::Dual {
        serving,
        target,
        above_hysteresis_streak,
        ..
    } = *state
    else {
        return Err(Error::Contract("retargeting requires a dual connection".into()));
    };
    let Some(next) = prediction.map(|p| p.target_bs) else {
        return Ok(None);
    };
    if above_hysteresis_streak > 0 || next == serving || next == target || !admission_check(next, loads)? {
        return Ok(None);
    }
    loads.detach(target)?;
    loads.attach(next)?;
    Ok(Some(ConnState::Dual {
        serving,
        target: next,
        trigger_minute: minute,
        above_hysteresis_streak: 0,
        low_rss_streak: 0,
    }))
}

/// Releases the old serving link; the target becomes the serving station.
pub fn execute_ho(state: &ConnState, loads: &mut LoadTable) -> Result<ConnState> {
    let ConnState::Dual { serving, target, .. } = *state else {
        return Err(Error::Contract("handover execution requires a dual connection".into()));
    };
    loads.detach(serving)?;
    Ok(ConnState::Single { serving: target })
}

/// Drops the link to a wrongly predicted target.
pub fn abort_dual(state: &ConnState, loads: &mut LoadTable) -> Result<ConnState> {
    let ConnState::Dual { serving, target, .. } = *state else {
        return Err(Error::Contract("abort requires a dual connection".into()));
    };
    loads.detach(target)?;
    Ok(ConnState::Single { serving })
}

/// Time-to-trigger bookkeeping for conventional handovers.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct HoTimer {
    pub candidate: Option<usize>,
    pub streak: u32,
}

impl HoTimer {
    /// Feeds one measurement. Returns the best station once it has beaten
    /// `serving` by the hysteresis margin for `ttt_min` consecutive samples.
    pub fn update(
        &mut self,
        deployment: &Deployment,
        cfg: &RadioConfig,
        ue_pos: Point,
        serving: usize,
        policy: &DcPolicy,
    ) -> Option<usize> {
        let best = best_bs(deployment, cfg, ue_pos);
        let margin = ratio_db(
            rss(cfg, deployment.position(best), ue_pos),
            rss(cfg, deployment.position(serving), ue_pos),
        );
        if best == serving || margin < policy.hysteresis_db {
            *self = HoTimer::default();
            return None;
        }
        if self.candidate == Some(best) {
            self.streak += 1;
        } else {
            *self = HoTimer {
                candidate: Some(best),
                streak: 1,
            };
        }
        (self.streak >= policy.ttt_min.max(1)).then_some(best)
    }
}

/// Conventional hard handover for a single-connected UE: switch to the best
/// station once it has beaten the serving one by the hysteresis margin for
/// `ttt_min` consecutive samples and has room. Returns the new state and
/// the `(from, to)` pair when a handover happened.
pub fn conventional_ho_step(
    state: &ConnState,
    timer: &mut HoTimer,
    deployment: &Deployment,
    cfg: &RadioConfig,
    ue_pos: Point,
    policy: &DcPolicy,
    loads: &mut LoadTable,
) -> Result<(ConnState, Option<(usize, usize)>)> {
    let ConnState::Single { serving } = *state else {
        return Err(Error::Contract("conventional handover applies to single-connected UEs".into()));
    };
    match timer.update(deployment, cfg, ue_pos, serving, policy) {
        Some(best) if admission_check(best, loads)? => {
            loads.detach(serving)?;
            loads.attach(best)?;
            *timer = HoTimer::default();
            Ok((ConnState::Single { serving: best }, Some((serving, best))))
        }
        _ => Ok((*state, None)),
    }
}

/// Conventional rule applied to a dual-connected UE whose best station is
/// neither of its two. When a third station qualifies, both links are
/// released and the UE moves there; returns the new state and that station.
pub fn stale_target_step(
    state: &ConnState,
    timer: &mut HoTimer,
    deployment: &Deployment,
    cfg: &RadioConfig,
    ue_pos: Point,
    policy: &DcPolicy,
    loads: &mut LoadTable,
) -> Result<Option<(ConnState, usize)>> {
    let ConnState::Dual { serving, target, .. } = *state else {
        return Err(Error::Contract("stale-target check requires a dual connection".into()));
    };
    match timer.update(deployment, cfg, ue_pos, serving, policy) {
        Some(best) if best != target && admission_check(best, loads)? => {
            loads.detach(target)?;
            loads.detach(serving)?;
            loads.attach(best)?;
            *timer = HoTimer::default();
            Ok(Some((ConnState::Single { serving: best }, best)))
        }
        _ => Ok(None),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Mode {
    Single,
    Dual,
    IdealDual,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::Single, Mode::Dual, Mode::IdealDual];

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Single => "single",
            Mode::Dual => "dual",
            Mode::IdealDual => "ideal-dual",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "single" => Ok(Mode::Single),
            "dual" => Ok(Mode::Dual),
            "ideal-dual" => Ok(Mode::IdealDual),
            other => Err(Error::Config(format!("unknown mode `{other}`"))),
        }
    }
}

/// A UE taking part in a simulated day.
#[derive(Clone, Copy, Debug)]
pub struct SimUser<'a> {
    pub user_id: u32,
    pub trajectory: &'a Trajectory,
    /// Required in dual mode.
    pub model: Option<&'a UserModel>,
}

/// Link quality seen by one UE in one minute.
#[derive(Clone, Debug, PartialEq)]
pub struct LinkRecord {
    pub day: u32,
    pub minute: usize,
    pub user_id: u32,
    pub mode: Mode,
    pub serving_bs: usize,
    pub target_bs: Option<usize>,
    pub serving: LinkStats,
    pub target: Option<LinkStats>,
    /// Effective BER (product rule when dual).
    pub ber: f64,
    /// Effective rate (sum of links when dual).
    pub rate_bps: f64,
}

impl LinkRecord {
    pub fn active_links(&self) -> usize {
        1 + usize::from(self.target.is_some())
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct DayLog {
    pub events: Vec<SimEvent>,
    pub links: Vec<LinkRecord>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimParams {
    pub policy: DcPolicy,
    pub mode: Mode,
    /// Oracle horizon in minutes for the ideal-dual forecaster.
    pub ideal_lookahead_min: usize,
}

/// Time already spent above the margin toward the new target counts toward
/// execution.
fn seed_streak(state: &mut ConnState, timer: &HoTimer) {
    if let ConnState::Dual {
        target,
        above_hysteresis_streak,
        ..
    } = state
    {
        if timer.candidate == Some(*target) {
            *above_hysteresis_streak = timer.streak;
        }
    }
}

/// Strongest station with room at `pos`.
fn initial_attachment(deployment: &Deployment, cfg: &RadioConfig, pos: Point, loads: &LoadTable) -> Result<usize> {
    let mut order: Vec<(usize, f64)> = deployment
        .stations
        .iter()
        .map(|b| (b.id, rss(cfg, b.pos, pos)))
        .collect();
    order.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    order
        .into_iter()
        .map(|(id, _)| id)
        .find(|&id| admission_check(id, loads).unwrap_or(false))
        .ok_or_else(|| Error::Config("every station is at capacity".into()))
}

fn check_loads(minute: usize, states: &[ConnState], loads: &LoadTable) -> Result<()> {
    let mut recount = vec![0usize; loads.counts().len()];
    for s in states {
        recount[s.serving()] += 1;
        if let Some(t) = s.target() {
            if t == s.serving() {
                return Err(Error::Invariant {
                    minute,
                    detail: format!("dual connection with serving = target = {t}"),
                });
            }
            recount[t] += 1;
        }
    }
    if recount != loads.counts() {
        return Err(Error::Invariant {
            minute,
            detail: "load table disagrees with UE attachments".into(),
        });
    }
    if loads.counts().iter().any(|&c| c > loads.capacity()) {
        return Err(Error::Invariant {
            minute,
            detail: "station load above capacity".into(),
        });
    }
    Ok(())
}

/// Simulates one day for a group of UEs in the given mode.
///
/// Each minute the UEs are processed in ascending id order. A dual UE
/// measures and may execute or abort; otherwise it leaves both links for a
/// third station that meets the conventional condition, and failing that the
/// MME may move its target to a newly forecast station. A single UE
/// (in the dual modes) lets the MME act on its forecast and, failing a
/// trigger, runs the conventional handover rule. At most one state
/// transition per UE per minute. Link quality is recorded after the
/// transitions.
pub fn simulate_day(
    users: &[SimUser<'_>],
    deployment: &Deployment,
    cfg: &RadioConfig,
    params: &SimParams,
) -> Result<DayLog> {
    let mut order: Vec<usize> = (0..users.len()).collect();
    order.sort_by_key(|&i| users[i].user_id);
    let day = users.first().map(|u| u.trajectory.day).unwrap_or(0);
    let minutes = users.iter().map(|u| u.trajectory.len()).min().unwrap_or(0);

    let mut forecasters: Vec<Option<Box<dyn HoForecaster + '_>>> = Vec::with_capacity(users.len());
    for u in users {
        forecasters.push(match params.mode {
            Mode::Single => None,
            Mode::Dual => {
                let model = u
                    .model
                    .ok_or_else(|| Error::Config(format!("dual mode needs a trained model for user {}", u.user_id)))?;
                Some(Box::new(LstmForecaster::new(model, deployment, cfg)))
            }
            Mode::IdealDual => Some(Box::new(OracleForecaster::new(
                u.trajectory,
                deployment,
                cfg,
                params.ideal_lookahead_min,
            ))),
        });
    }

    let mut loads = LoadTable::new(deployment.len(), deployment.capacity_per_bs);
    let mut states = vec![ConnState::Single { serving: 0 }; users.len()];
    for &i in &order {
        let bs = initial_attachment(deployment, cfg, users[i].trajectory.samples[0], &loads)?;
        loads.attach(bs)?;
        states[i] = ConnState::Single { serving: bs };
    }
    let mut timers = vec![HoTimer::default(); users.len()];
    let mut log = DayLog::default();
    let policy = &params.policy;

    for minute in 0..minutes {
        for &i in &order {
            let user = &users[i];
            let pos = user.trajectory.samples[minute];
            if let Some(f) = forecasters[i].as_mut() {
                f.observe(minute, pos);
            }
            let mut event = |kind, from_bs, to_bs| {
                log.events.push(SimEvent {
                    day,
                    minute,
                    user_id: user.user_id,
                    kind,
                    from_bs,
                    to_bs,
                })
            };
            let state = states[i];
            match state {
                ConnState::Dual { serving, target, .. } => {
                    let mut next = state;
                    let outcome = ue_monitor(
                        &mut next,
                        rss(cfg, deployment.position(serving), pos),
                        rss(cfg, deployment.position(target), pos),
                        policy,
                    )?;
                    states[i] = match outcome {
                        MonitorOutcome::ExecuteHo => {
                            event(EventKind::HoExecuted, serving, target);
                            timers[i] = HoTimer::default();
                            execute_ho(&next, &mut loads)?
                        }
                        MonitorOutcome::AbortDual => {
                            event(EventKind::DualAborted, serving, target);
                            abort_dual(&next, &mut loads)?
                        }
                        MonitorOutcome::KeepDual => {
                            match stale_target_step(&next, &mut timers[i], deployment, cfg, pos, policy, &mut loads)? {
                                Some((single, to)) => {
                                    event(EventKind::DualAborted, serving, target);
                                    event(EventKind::ConventionalHo, serving, to);
                                    single
                                }
                                None => {
                                    let forecast = forecasters[i].as_ref().and_then(|f| f.forecast(serving));
                                    match retarget_dual(&next, forecast.as_ref(), minute, &mut loads)? {
                                        Some(mut moved) => {
                                            let to = moved.target().expect("retargeted state is dual");
                                            event(EventKind::DualAborted, serving, target);
                                            event(EventKind::DualTriggered, serving, to);
                                            seed_streak(&mut moved, &timers[i]);
                                            moved
                                        }
                                        None => next,
                                    }
                                }
                            }
                        }
                    };
                }
                ConnState::Single { serving } => {
                    let action = match forecasters[i].as_ref() {
                        Some(f) => mme_decide(&state, f.forecast(serving).as_ref(), &loads)?,
                        None => MmeAction::NoAction,
                    };
                    match action {
                        MmeAction::TriggerDual { target } => {
                            event(EventKind::DualTriggered, serving, target);
                            let mut next = trigger_dual(&state, target, minute, &mut loads)?;
                            seed_streak(&mut next, &timers[i]);
                            states[i] = next;
                        }
                        MmeAction::RejectLoad { .. } | MmeAction::NoAction => {
                            if let MmeAction::RejectLoad { target } = action {
                                event(EventKind::DualRejectedLoad, serving, target);
                            }
                            let (next, ho) =
                                conventional_ho_step(&state, &mut timers[i], deployment, cfg, pos, policy, &mut loads)?;
                            if let Some((from, to)) = ho {
                                event(EventKind::ConventionalHo, from, to);
                            }
                            states[i] = next;
                        }
                    }
                }
            }

            let st = states[i];
            let serving = link_stats(cfg, deployment.position(st.serving()), pos);
            let target = st.target().map(|t| link_stats(cfg, deployment.position(t), pos));
            let (ber, rate_bps) = match target {
                Some(t) => (dual_ber(serving.ber, t.ber), dual_rate(serving.rate_bps, t.rate_bps)),
                None => (serving.ber, serving.rate_bps),
            };
            log.links.push(LinkRecord {
                day,
                minute,
                user_id: user.user_id,
                mode: params.mode,
                serving_bs: st.serving(),
                target_bs: st.target(),
                serving,
                target,
                ber,
                rate_bps,
            });
        }
        check_loads(minute, &states, &loads)?;
    }
    Ok(log)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dual(serving: usize, target: usize) -> ConnState {
        ConnState::Dual {
            serving,
            target,
            trigger_minute: 0,
            above_hysteresis_streak: 0,
            low_rss_streak: 0,
        }
    }

    fn prediction(target_bs: usize) -> HoPrediction {
        HoPrediction {
            minute: 1,
            target_bs,
            predicted_pos: Point::default(),
        }
    }

    fn db(v: f64) -> f64 {
        10f64.powf(v / 10.0)
    }

    #[test]
    fn admission_boundaries() {
        let mut loads = LoadTable::new(2, 3);
        assert!(admission_check(0, &loads).unwrap());
        loads.attach(0).unwrap();
        loads.attach(0).unwrap();
        assert!(admission_check(0, &loads).unwrap());
        loads.attach(0).unwrap();
        assert!(!admission_check(0, &loads).unwrap());
        assert!(matches!(admission_check(7, &loads), Err(Error::UnknownStation(7))));
        assert!(loads.attach(0).is_err());
    }

    #[test]
    fn mme_decisions() {
        let mut loads = LoadTable::new(3, 1);
        let s = ConnState::Single { serving: 0 };
        assert_eq!(mme_decide(&s, None, &loads).unwrap(), MmeAction::NoAction);
        assert_eq!(
            mme_decide(&s, Some(&prediction(2)), &loads).unwrap(),
            MmeAction::TriggerDual { target: 2 }
        );
        loads.attach(2).unwrap();
        assert_eq!(
            mme_decide(&s, Some(&prediction(2)), &loads).unwrap(),
            MmeAction::RejectLoad { target: 2 }
        );
        assert!(mme_decide(&s, Some(&prediction(0)), &loads).is_err());
        assert!(mme_decide(&dual(0, 1), None, &loads).is_err());
    }

    #[test]
    fn monitor_executes_after_ttt() {
        let policy = DcPolicy::default();
        let mut st = dual(0, 1);
        let s = 1e-9;
        assert_eq!(ue_monitor(&mut st, s, s * db(1.0), &policy).unwrap(), MonitorOutcome::KeepDual);
        assert_eq!(ue_monitor(&mut st, s, s * db(6.0), &policy).unwrap(), MonitorOutcome::KeepDual);
        assert_eq!(ue_monitor(&mut st, s, s * db(6.0), &policy).unwrap(), MonitorOutcome::ExecuteHo);
    }

    #[test]
    fn monitor_aborts_on_weak_target() {
        let policy = DcPolicy::default();
        let mut st = dual(0, 1);
        let s = 1e-9;
        assert_eq!(ue_monitor(&mut st, s, s * db(-20.0), &policy).unwrap(), MonitorOutcome::KeepDual);
        assert_eq!(ue_monitor(&mut st, s, s * db(-20.0), &policy).unwrap(), MonitorOutcome::KeepDual);
        assert_eq!(ue_monitor(&mut st, s, s * db(-20.0), &policy).unwrap(), MonitorOutcome::AbortDual);
    }

    #[test]
    fn monitor_keeps_on_equal_rss() {
        let policy = DcPolicy::default();
        let mut st = dual(0, 1);
        for _ in 0..500 {
            assert_eq!(ue_monitor(&mut st, 1e-9, 1e-9, &policy).unwrap(), MonitorOutcome::KeepDual);
        }
        assert!(ue_monitor(&mut ConnState::Single { serving: 0 }, 1.0, 1.0, &policy).is_err());
    }

    #[test]
    fn monitor_prefers_execution() {
        // Zero margins make both conditions fire on an equal-RSS sample.
        let policy = DcPolicy {
            hysteresis_db: 0.0,
            ttt_min: 1,
            abort_margin_db: 0.0,
            abort_ttt_min: 1,
        };
        let mut st = dual(0, 1);
        assert_eq!(ue_monitor(&mut st, 1e-9, 1e-9, &policy).unwrap(), MonitorOutcome::ExecuteHo);
    }

    #[test]
    fn execute_releases_serving() {
        let mut loads = LoadTable::new(6, 4);
        loads.attach(2).unwrap();
        loads.attach(5).unwrap();
        let next = execute_ho(&dual(2, 5), &mut loads).unwrap();
        assert_eq!(next, ConnState::Single { serving: 5 });
        assert_eq!(loads.count(2).unwrap(), 0);
        assert_eq!(loads.count(5).unwrap(), 1);
        assert!(execute_ho(&ConnState::Single { serving: 5 }, &mut loads).is_err());
    }

    #[test]
    fn abort_releases_target() {
        let mut loads = LoadTable::new(3, 4);
        loads.attach(0).unwrap();
        loads.attach(1).unwrap();
        assert_eq!(abort_dual(&dual(0, 1), &mut loads).unwrap(), ConnState::Single { serving: 0 });
        assert_eq!(loads.counts(), &[1, 0, 0]);
    }

    #[test]
    fn conventional_stationary_never_flips() {
        let cfg = RadioConfig::default();
        let dep = Deployment::from_positions(1.0, &[Point::new(0.0, 0.0), Point::new(100.0, 0.0)], 4);
        let mut loads = LoadTable::new(2, 4);
        loads.attach(0).unwrap();
        let mut state = ConnState::Single { serving: 0 };
        let mut timer = HoTimer::default();
        for _ in 0..100 {
            let (next, ho) = conventional_ho_step(
                &state,
                &mut timer,
                &dep,
                &cfg,
                Point::new(30.0, 10.0),
                &DcPolicy::default(),
                &mut loads,
            )
            .unwrap();
            assert!(ho.is_none());
            state = next;
        }
    }

    #[test]
    fn mode_names_round_trip() {
        for m in Mode::ALL {
            assert_eq!(m.as_str().parse::<Mode>().unwrap(), m);
        }
        assert!("triple".parse::<Mode>().is_err());
    }
}
