//! Trains one user's next-position LSTM on simulated days, then scores its
//! handover forecasts on held-out days against a PPP deployment.
//!
//! `cargo run --release --example train_predictor [speed_mps] [epochs]`

use idcsim::lstm::{StackSpec, TrainHyper};
use idcsim::mobility::{assign_user_sites, generate_hotspots, generate_trajectory, MapSpec, UserProfile};
use idcsim::predictor::{build_dataset, forecast_day, score_accuracy, train_user_model, AccuracyCount, LstmForecaster, NormSpec};
use idcsim::radio::{actual_ho_events, deploy_ppp, RadioConfig};
use idcsim::seed;

fn main() -> idcsim::Result<()> {
    let mut args = std::env::args().skip(1);
    let speed: f64 = args.next().and_then(|a| a.parse().ok()).unwrap_or(1.0);
    let epochs: usize = args.next().and_then(|a| a.parse().ok()).unwrap_or(8);

    let map = MapSpec {
        width_m: 2000.0,
        height_m: 2000.0,
        ..MapSpec::default()
    };
    let hotspots = generate_hotspots(&map, &mut seed::stream(1, "hotspots", &[]));
    let profile = UserProfile {
        user_id: 0,
        speed_mps: speed,
        site_ids: assign_user_sites(&hotspots, 10, 3.0, &mut seed::stream(1, "sites", &[0]))?,
        pause_min_s: 30.0,
        pause_max_s: 1800.0,
        pause_exponent: 1.5,
        latp_exponent: 3.0,
    };
    let days = generate_trajectory(&profile, &map, &hotspots, 12, 1);
    let (train, eval) = days.split_at(10);

    let norm = NormSpec::from_map(&map);
    let data = build_dataset(train, &norm)?;
    let spec = StackSpec {
        hidden_sizes: vec![32, 32],
        ..StackSpec::default()
    };
    let hyper = TrainHyper {
        epochs,
        ..TrainHyper::default()
    };
    let trained = train_user_model(&data, &spec, &hyper)?;
    for (epoch, loss) in &trained.log {
        println!("epoch {epoch:>2}: loss {loss:.4e}");
    }

    let cfg = RadioConfig::default();
    let dep = deploy_ppp(&map, 5.0, 16, &mut seed::stream(1, "deploy", &[]));
    let mut total = AccuracyCount::default();
    for day in eval {
        let mut f = LstmForecaster::new(&trained.model, &dep, &cfg);
        let (preds, log) = forecast_day(&mut f, day, &dep, &cfg);
        let err: f64 = log
            .iter()
            .zip(day.samples.iter().skip(1))
            .map(|(r, p)| r.predicted_pos.distance(*p))
            .sum::<f64>()
            / (day.len() - 1) as f64;
        let acc = score_accuracy(&preds, &actual_ho_events(day, &dep, &cfg), 1);
        println!(
            "day {}: mean position error {err:.1} m, {} of {} handovers predicted, {} forecasts",
            day.day, acc.matched, acc.actual, acc.predicted
        );
        total += acc;
    }
    println!("pooled handover accuracy at {speed} m/s: {:.3}", total.ratio());
    Ok(())
}
