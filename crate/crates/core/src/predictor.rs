//! Per-user next-position models and handover forecasting.
//!
//! A model reads normalized positions and emits the normalized displacement
//! to the next minute; the predicted position is the current one plus that
//! displacement. During training the displacement target is divided by the
//! dataset's largest per-axis step so all users train at a comparable scale,
//! and that factor is folded into the output projection afterwards. A saved
//! checkpoint therefore needs nothing but the map extents to be used.

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::lstm::{
    bptt_window_grads, load_checkpoint, optimizer_step, save_checkpoint, Adam, Sequence, StackParams, StackSpec,
    StackState, TrainHyper,
};
use crate::mobility::{MapSpec, Point, Trajectory, MINUTES_PER_DAY};
use crate::radio::{best_bs, Deployment, HoEvent, RadioConfig};
use crate::seed;

/// Smallest displacement scale used during training, in normalized units.
const MIN_STEP_SCALE: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NormSpec {
    pub width_m: f64,
    pub height_m: f64,
}

impl NormSpec {
    pub fn from_map(map: &MapSpec) -> Self {
        Self {
            width_m: map.width_m,
            height_m: map.height_m,
        }
    }

    pub fn normalize(&self, p: Point) -> [f64; 2] {
        [p.x / self.width_m, p.y / self.height_m]
    }

    pub fn denormalize(&self, u: [f64; 2]) -> Point {
        Point::new(u[0] * self.width_m, u[1] * self.height_m)
    }

    fn clamp(&self, p: Point) -> Point {
        Point::new(p.x.clamp(0.0, self.width_m), p.y.clamp(0.0, self.height_m))
    }
}

/// One day's input (minutes 0..718) and target (minutes 1..719), normalized.
#[derive(Clone, Debug, PartialEq)]
pub struct DayPair {
    pub day: u32,
    pub input: Sequence,
    pub target: Sequence,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub norm: NormSpec,
    pub days: Vec<DayPair>,
}

impl Dataset {
    /// Largest absolute per-axis one-step displacement, normalized.
    fn max_step(&self) -> f64 {
        self.days
            .iter()
            .flat_map(|d| d.input.as_slice().iter().zip(d.target.as_slice()))
            .map(|(a, b)| (b - a).abs())
            .fold(0.0, f64::max)
    }
}

pub fn build_dataset(trajectories: &[Trajectory], norm: &NormSpec) -> Result<Dataset> {
    let mut days = Vec::with_capacity(trajectories.len());
    for traj in trajectories {
        if traj.len() != MINUTES_PER_DAY {
            return Err(Error::ShortTrajectory {
                day: traj.day,
                len: traj.len(),
                expected: MINUTES_PER_DAY,
            });
        }
        let rows: Vec<[f64; 2]> = traj.samples.iter().map(|p| norm.normalize(*p)).collect();
        days.push(DayPair {
            day: traj.day,
            input: Sequence::from_rows(&rows[..rows.len() - 1])?,
            target: Sequence::from_rows(&rows[1..])?,
        });
    }
    Ok(Dataset { norm: *norm, days })
}

/// A trained per-user predictor.
#[derive(Clone, Debug, PartialEq)]
pub struct UserModel {
    pub spec: StackSpec,
    pub params: StackParams,
    pub norm: NormSpec,
}

impl UserModel {
    pub fn to_checkpoint(&self) -> Result<Vec<u8>> {
        save_checkpoint(&self.spec, &self.params)
    }

    pub fn from_checkpoint(bytes: &[u8], norm: NormSpec) -> Result<Self> {
        let (spec, params) = load_checkpoint(bytes)?;
        if spec.input_dim != 2 || spec.output_dim != 2 {
            return Err(Error::Checkpoint("position models must be 2-in, 2-out".into()));
        }
        Ok(Self { spec, params, norm })
    }

    pub fn session(&self) -> ModelSession<'_> {
        ModelSession {
            model: self,
            state: StackState::zeros(&self.params),
        }
    }
}

/// Streaming inference with recurrent state carried between calls.
pub struct ModelSession<'a> {
    model: &'a UserModel,
    state: StackState,
}

impl ModelSession<'_> {
    /// Feeds the current position and returns the predicted next one,
    /// clamped to the map.
    pub fn push(&mut self, pos: Point) -> Point {
        let norm = &self.model.norm;
        let u = norm.normalize(pos);
        let d = self.state.step(&self.model.params, &u);
        norm.clamp(norm.denormalize([u[0] + d[0], u[1] + d[1]]))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainedModel {
    pub model: UserModel,
    /// `(epoch, mean training loss)` in the scaled displacement space.
    pub log: Vec<(usize, f64)>,
}

/// Trains one user's stack by truncated BPTT with Adam.
///
/// Each epoch visits the days in a seeded random order; a day starts from the
/// zero state and is cut into consecutive windows of `bptt_window` steps,
/// one optimizer step per window.
pub fn train_user_model(dataset: &Dataset, spec: &StackSpec, hyper: &TrainHyper) -> Result<TrainedModel> {
    spec.validate()?;
    hyper.validate()?;
    if dataset.days.is_empty() {
        return Err(Error::Config("empty training dataset".into()));
    }
    if spec.input_dim != 2 || spec.output_dim != 2 {
        return Err(Error::Shape("position models must be 2-in, 2-out".into()));
    }
    let scale = dataset.max_step().max(MIN_STEP_SCALE);
    let scaled: Vec<(Sequence, Sequence)> = dataset
        .days
        .iter()
        .map(|d| {
            let disp: Vec<f64> = d
                .input
                .as_slice()
                .iter()
                .zip(d.target.as_slice())
                .map(|(a, b)| (b - a) / scale)
                .collect();
            (d.input.clone(), Sequence::new(2, disp).expect("same width"))
        })
        .collect();

    let mut rng = seed::stream(hyper.seed, "train", &[]);
    let mut params = StackParams::init(spec, &mut rng);
    let mut adam = Adam::new(&params);
    let mut order: Vec<usize> = (0..scaled.len()).collect();
    let mut log = Vec::with_capacity(hyper.epochs);

    for epoch in 0..hyper.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut steps = 0usize;
        for &d in &order {
            let (input, target) = &scaled[d];
            let mut state = StackState::zeros(&params);
            let mut start = 0;
            while start < input.len() {
                let end = (start + hyper.bptt_window).min(input.len());
                let mut w = bptt_window_grads(&params, &input.slice(start, end), &target.slice(start, end), &state)?;
                if !w.loss.is_finite() {
                    return Err(Error::Diverged { epoch, loss: w.loss });
                }
                loss_sum += w.loss * (end - start) as f64;
                steps += end - start;
                optimizer_step(&mut params, &mut w.grads, hyper, &mut adam)?;
                state = w.final_state;
                start = end;
            }
        }
        let mean = loss_sum / steps as f64;
        if !mean.is_finite() {
            return Err(Error::Diverged { epoch, loss: mean });
        }
        log.push((epoch, mean));
    }

    // Fold the displacement scale into the projection.
    params.projection.weights.iter_mut().for_each(|w| *w *= scale);
    params.projection.bias.iter_mut().for_each(|b| *b *= scale);
    Ok(TrainedModel {
        model: UserModel {
            spec: spec.clone(),
            params,
            norm: dataset.norm,
        },
        log,
    })
}

/// Predicted next position after feeding `history` from a fresh state.
pub fn predict_position(model: &UserModel, history: &[Point]) -> Point {
    assert!(!history.is_empty(), "history must contain at least one position");
    let mut session = model.session();
    let mut next = history[0];
    for p in history {
        next = session.push(*p);
    }
    next
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HoPrediction {
    /// Minute at which the handover is expected.
    pub minute: usize,
    pub target_bs: usize,
    pub predicted_pos: Point,
}

/// Turns a predicted position into a handover forecast: `None` when the
/// serving station stays the best one there.
pub fn ho_at_position(
    deployment: &Deployment,
    cfg: &RadioConfig,
    minute: usize,
    predicted_pos: Point,
    current_serving: usize,
) -> Option<HoPrediction> {
    let best = best_bs(deployment, cfg, predicted_pos);
    (best != current_serving).then_some(HoPrediction {
        minute,
        target_bs: best,
        predicted_pos,
    })
}

/// Runs `history` (minutes 0..=t) through the model and forecasts the
/// handover, if any, at minute t + 1.
pub fn predict_ho(
    model: &UserModel,
    deployment: &Deployment,
    cfg: &RadioConfig,
    history: &[Point],
    current_serving: usize,
) -> Option<HoPrediction> {
    let pos = predict_position(model, history);
    ho_at_position(deployment, cfg, history.len(), pos, current_serving)
}

/// A source of per-minute handover forecasts for one UE over one day.
pub trait HoForecaster {
    /// Supplies the UE's position at `minute`; called once per minute in order.
    fn observe(&mut self, minute: usize, pos: Point);
    /// Forecast for the coming minute(s) given the current serving station.
    fn forecast(&self, serving: usize) -> Option<HoPrediction>;
    /// Predicted position for the next minute, when the source has one.
    fn predicted_next(&self) -> Option<Point> {
        None
    }
}

/// Forecasts from a trained model with state carried through the day.
pub struct LstmForecaster<'a> {
    session: ModelSession<'a>,
    deployment: &'a Deployment,
    cfg: &'a RadioConfig,
    next: Option<(usize, Point)>,
}

impl<'a> LstmForecaster<'a> {
    pub fn new(model: &'a UserModel, deployment: &'a Deployment, cfg: &'a RadioConfig) -> Self {
        Self {
            session: model.session(),
            deployment,
            cfg,
            next: None,
        }
    }
}

impl HoForecaster for LstmForecaster<'_> {
    fn observe(&mut self, minute: usize, pos: Point) {
        let predicted = self.session.push(pos);
        self.next = (minute + 1 < MINUTES_PER_DAY).then_some((minute + 1, predicted));
    }

    fn forecast(&self, serving: usize) -> Option<HoPrediction> {
        let (minute, pos) = self.next?;
        ho_at_position(self.deployment, self.cfg, minute, pos, serving)
    }

    fn predicted_next(&self) -> Option<Point> {
        self.next.map(|(_, p)| p)
    }
}

/// Perfect-knowledge forecaster: reports the first minute within
/// `lookahead` minutes at which the true best station differs from the
/// serving one.
pub struct OracleForecaster<'a> {
    trajectory: &'a Trajectory,
    deployment: &'a Deployment,
    cfg: &'a RadioConfig,
    lookahead: usize,
    minute: Option<usize>,
}

impl<'a> OracleForecaster<'a> {
    pub fn new(
        trajectory: &'a Trajectory,
        deployment: &'a Deployment,
        cfg: &'a RadioConfig,
        lookahead: usize,
    ) -> Self {
        Self {
            trajectory,
            deployment,
            cfg,
            lookahead: lookahead.max(1),
            minute: None,
        }
    }
}

impl HoForecaster for OracleForecaster<'_> {
    fn observe(&mut self, minute: usize, _pos: Point) {
        self.minute = Some(minute);
    }

    fn forecast(&self, serving: usize) -> Option<HoPrediction> {
        let now = self.minute?;
        let last = (now + self.lookahead).min(self.trajectory.len() - 1);
        (now + 1..=last).find_map(|m| ho_at_position(self.deployment, self.cfg, m, self.trajectory.samples[m], serving))
    }

    fn predicted_next(&self) -> Option<Point> {
        let now = self.minute?;
        self.trajectory.samples.get(now + 1).copied()
    }
}

/// One row of the prediction log.
#[derive(Clone, Debug, PartialEq)]
pub struct PredictionRecord {
    pub user_id: u32,
    pub day: u32,
    pub minute: usize,
    pub predicted_pos: Point,
    pub serving_bs: usize,
    pub predicted_target_bs: Option<usize>,
}

/// Replays a day through a forecaster with the serving station taken as the
/// true best station at each minute. Returns the forecasts and the log.
pub fn forecast_day<F: HoForecaster>(
    forecaster: &mut F,
    trajectory: &Trajectory,
    deployment: &Deployment,
    cfg: &RadioConfig,
) -> (Vec<HoPrediction>, Vec<PredictionRecord>) {
    let mut predictions = Vec::new();
    let mut log = Vec::new();
    for (minute, &pos) in trajectory.samples.iter().enumerate() {
        forecaster.observe(minute, pos);
        if minute + 1 >= trajectory.len() {
            break;
        }
        let serving = best_bs(deployment, cfg, pos);
        let forecast = forecaster.forecast(serving);
        if let Some(f) = forecast {
            predictions.push(f);
        }
        log.push(PredictionRecord {
            user_id: trajectory.user_id,
            day: trajectory.day,
            minute: minute + 1,
            predicted_pos: forecaster.predicted_next().unwrap_or(pos),
            serving_bs: serving,
            predicted_target_bs: forecast.map(|f| f.target_bs),
        });
    }
    (predictions, log)
}

/// Matched and actual handover counts; poolable across users and days.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct AccuracyCount {
    pub matched: usize,
    pub actual: usize,
    pub predicted: usize,
}

impl AccuracyCount {
    /// `matched / actual`; 1 when nothing happened and nothing was predicted,
    /// 0 when only false alarms were raised.
    pub fn ratio(&self) -> f64 {
        if self.actual == 0 {
            if self.predicted == 0 {
                1.0
            } else {
                0.0
            }
        } else {
            self.matched as f64 / self.actual as f64
        }
    }
}

impl std::ops::AddAssign for AccuracyCount {
    fn add_assign(&mut self, o: Self) {
        self.matched += o.matched;
        self.actual += o.actual;
        self.predicted += o.predicted;
    }
}

/// Greedy time-ordered matching: each actual handover takes the earliest
/// unused prediction with the same target within `window_min` minutes.
pub fn score_accuracy(predicted: &[HoPrediction], actual: &[HoEvent], window_min: usize) -> AccuracyCount {
    let mut preds: Vec<&HoPrediction> = predicted.iter().collect();
    preds.sort_by_key(|p| p.minute);
    let mut acts: Vec<&HoEvent> = actual.iter().collect();
    acts.sort_by_key(|a| a.minute);
    let mut used = vec![false; preds.len()];
    let mut matched = 0;
    for a in acts {
        let hit = preds
            .iter()
            .enumerate()
            .find(|(k, p)| !used[*k] && p.target_bs == a.to_bs && p.minute.abs_diff(a.minute) <= window_min);
        if let Some((k, _)) = hit {
            used[k] = true;
            matched += 1;
        }
    }
    AccuracyCount {
        matched,
        actual: actual.len(),
        predicted: predicted.len(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pred(minute: usize, target_bs: usize) -> HoPrediction {
        HoPrediction {
            minute,
            target_bs,
            predicted_pos: Point::default(),
        }
    }

    fn ho(minute: usize, from_bs: usize, to_bs: usize) -> HoEvent {
        HoEvent { minute, from_bs, to_bs }
    }

    #[test]
    fn normalization_points() {
        let n = NormSpec { width_m: 4000.0, height_m: 4000.0 };
        assert_eq!(n.normalize(Point::new(0.0, 0.0)), [0.0, 0.0]);
        assert_eq!(n.normalize(Point::new(2000.0, 1000.0)), [0.5, 0.25]);
    }

    #[test]
    fn dataset_shift_and_errors() {
        let norm = NormSpec { width_m: 1000.0, height_m: 1000.0 };
        let samples: Vec<Point> = (0..MINUTES_PER_DAY).map(|i| Point::new(i as f64, 0.5 * i as f64)).collect();
        let trajs: Vec<Trajectory> = (0..3)
            .map(|day| Trajectory { user_id: 1, day, samples: samples.clone() })
            .collect();
        let ds = build_dataset(&trajs, &norm).unwrap();
        assert_eq!(ds.days.len(), 3);
        for d in &ds.days {
            assert_eq!(d.input.len(), MINUTES_PER_DAY - 1);
            for t in 0..d.input.len() - 1 {
                assert_eq!(d.target.step(t), d.input.step(t + 1));
            }
        }
        let short = Trajectory { user_id: 1, day: 4, samples: samples[..100].to_vec() };
        let err = build_dataset(&[short], &norm).unwrap_err();
        assert!(matches!(err, Error::ShortTrajectory { day: 4, .. }));
    }

    #[test]
    fn accuracy_scoring_cases() {
        let actual: Vec<HoEvent> = (0..20).map(|i| ho(10 * i + 5, i, i + 1)).collect();
        let mut preds: Vec<HoPrediction> = actual.iter().map(|a| pred(a.minute, a.to_bs)).collect();
        assert_eq!(score_accuracy(&preds, &actual, 1).ratio(), 1.0);
        preds[7].target_bs = 99;
        assert!((score_accuracy(&preds, &actual, 1).ratio() - 0.95).abs() < 1e-15);

        // Three actual, two predicted, one of them two minutes late.
        let actual = [ho(10, 0, 1), ho(30, 1, 2), ho(50, 2, 3)];
        let preds = [pred(11, 1), pred(32, 2)];
        let c = score_accuracy(&preds, &actual, 1);
        assert_eq!((c.matched, c.actual), (1, 3));
        assert_eq!(score_accuracy(&preds, &actual, 2).matched, 2);

        assert_eq!(score_accuracy(&[], &[], 1).ratio(), 1.0);
        assert_eq!(score_accuracy(&[pred(3, 1)], &[], 1).ratio(), 0.0);
    }

    #[test]
    fn each_prediction_matches_once() {
        let actual = [ho(10, 0, 1), ho(11, 2, 1)];
        let preds = [pred(10, 1)];
        assert_eq!(score_accuracy(&preds, &actual, 1).matched, 1);
    }

    #[test]
    fn ho_forecast_from_position() {
        let cfg = RadioConfig::default();
        let dep = Deployment::from_positions(1.0, &[Point::new(0.0, 0.0), Point::new(100.0, 0.0)], 4);
        assert!(ho_at_position(&dep, &cfg, 5, Point::new(40.0, 0.0), 0).is_none());
        let p = ho_at_position(&dep, &cfg, 5, Point::new(60.0, 0.0), 0).unwrap();
        assert_eq!((p.minute, p.target_bs), (5, 1));
        let lone = Deployment::from_positions(1.0, &[Point::new(0.0, 0.0)], 4);
        assert!(ho_at_position(&lone, &cfg, 5, Point::new(900.0, 0.0), 0).is_none());
    }

    #[test]
    fn oracle_looks_ahead() {
        let cfg = RadioConfig::default();
        let dep = Deployment::from_positions(1.0, &[Point::new(0.0, 0.0), Point::new(100.0, 0.0)], 4);
        let samples: Vec<Point> = (0..MINUTES_PER_DAY).map(|i| Point::new(40.0 + 5.0 * i as f64, 0.0)).collect();
        let traj = Trajectory { user_id: 0, day: 0, samples };
        let mut o = OracleForecaster::new(&traj, &dep, &cfg, 2);
        o.observe(0, traj.samples[0]);
        // x: 40, 45, 50 (tie -> BS 0), 55
        assert!(o.forecast(0).is_none());
        o.observe(1, traj.samples[1]);
        assert_eq!(o.forecast(0).map(|p| p.minute), Some(3));
    }
}
