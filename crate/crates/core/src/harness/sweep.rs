//! Density x speed x mode x seed experiment grid.

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use super::config::SimConfig;
use super::metrics::{ho_window_metrics, network_ee, UserHo};
use crate::dualconn::{simulate_day, DayLog, Mode, SimParams, SimUser};
use crate::error::{Error, Result};
use crate::io;
use crate::lstm::{StackSpec, TrainHyper};
use crate::mobility::{assign_user_sites, generate_hotspots, generate_trajectory, Point, Trajectory, UserProfile};
use crate::predictor::{
    build_dataset, forecast_day, score_accuracy, train_user_model, AccuracyCount, LstmForecaster, NormSpec,
    OracleForecaster, UserModel,
};
use crate::radio::{actual_ho_events, deploy_ppp, Deployment};
use crate::seed;

pub const METRICS_HEADER: [&str; 8] = [
    "density_per_km2",
    "speed_mps",
    "mode",
    "seed",
    "accuracy",
    "mean_ho_rate_bps",
    "mean_ho_ber",
    "network_ee_bpj",
];

/// Hotspots, users and traces for one replicate seed. Independent of the
/// station density, so every density sees the same users.
#[derive(Clone, Debug)]
pub struct World {
    pub seed: u64,
    pub hotspots: Vec<Point>,
    pub profiles: Vec<UserProfile>,
    /// `traces[&user_id][day]`.
    pub traces: BTreeMap<u32, Vec<Trajectory>>,
}

impl World {
    pub fn users_at_speed(&self, speed_mps: f64) -> impl Iterator<Item = &UserProfile> {
        self.profiles.iter().filter(move |p| p.speed_mps == speed_mps)
    }

    pub fn trace(&self, user_id: u32, day: u32) -> &Trajectory {
        &self.traces[&user_id][day as usize]
    }

    pub fn all_traces(&self) -> Vec<Trajectory> {
        self.traces.values().flatten().cloned().collect()
    }
}

pub fn build_world(cfg: &SimConfig, master_seed: u64, seed_value: u64) -> Result<World> {
    let hotspots = generate_hotspots(&cfg.map, &mut seed::stream(master_seed, "hotspots", &[seed_value]));
    let trace_seed = seed::derive(master_seed, "traces", &[seed_value]);
    let mut profiles = Vec::new();
    for (si, &speed_mps) in cfg.speeds.iter().enumerate() {
        for j in 0..cfg.users_per_speed {
            let user_id = (si * cfg.users_per_speed + j) as u32;
            let mut rng = seed::stream(master_seed, "sites", &[seed_value, u64::from(user_id)]);
            let m = &cfg.mobility;
            let profile = UserProfile {
                user_id,
                speed_mps,
                site_ids: assign_user_sites(&hotspots, m.sites_per_user, m.latp_exponent, &mut rng)?,
                pause_min_s: m.pause_min_s,
                pause_max_s: m.pause_max_s,
                pause_exponent: m.pause_exponent,
                latp_exponent: m.latp_exponent,
            };
            profile.validate()?;
            profiles.push(profile);
        }
    }
    let traces = profiles
        .par_iter()
        .map(|p| (p.user_id, generate_trajectory(p, &cfg.map, &hotspots, cfg.days, trace_seed)))
        .collect();
    Ok(World {
        seed: seed_value,
        hotspots,
        profiles,
        traces,
    })
}

/// Station layout for one `(seed, density)`; keyed by the density value
/// rather than its position in the sweep list.
pub fn build_deployment(cfg: &SimConfig, master_seed: u64, seed_value: u64, density_per_km2: f64) -> Deployment {
    let mut rng = seed::stream(master_seed, "deploy", &[seed_value, seed::f64_key(density_per_km2)]);
    deploy_ppp(&cfg.map, density_per_km2, cfg.capacity_per_bs, &mut rng)
}

/// Trained models keyed by a hash of the training traces and every setting
/// that influences training. Optionally persisted as checkpoints in a
/// directory.
#[derive(Debug, Default)]
pub struct ModelCache {
    dir: Option<PathBuf>,
    mem: Mutex<HashMap<String, Arc<UserModel>>>,
}

impl ModelCache {
    pub fn in_memory() -> Self {
        Self::default()
    }

    pub fn with_dir(dir: impl Into<PathBuf>) -> Self {
        Self {
            dir: Some(dir.into()),
            mem: Mutex::default(),
        }
    }

    pub fn key(train: &[Trajectory], norm: &NormSpec, spec: &StackSpec, hyper: &TrainHyper) -> String {
        let mut h = Sha256::new();
        h.update(b"idcsim-model-v1");
        for v in [norm.width_m, norm.height_m] {
            h.update(v.to_le_bytes());
        }
        for t in train {
            h.update(t.day.to_le_bytes());
            h.update((t.samples.len() as u64).to_le_bytes());
            for p in &t.samples {
                h.update(p.x.to_le_bytes());
                h.update(p.y.to_le_bytes());
            }
        }
        for v in [spec.input_dim, spec.output_dim]
            .into_iter()
            .chain(spec.hidden_sizes.iter().copied())
        {
            h.update((v as u64).to_le_bytes());
        }
        for v in [
            hyper.learning_rate,
            hyper.grad_clip,
            hyper.beta1,
            hyper.beta2,
            hyper.epsilon,
        ] {
            h.update(v.to_le_bytes());
        }
        for v in [hyper.epochs as u64, hyper.bptt_window as u64, hyper.seed] {
            h.update(v.to_le_bytes());
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn checkpoint_path(&self, key: &str) -> Option<PathBuf> {
        self.dir.as_ref().map(|d| d.join(format!("{key}.ckpt")))
    }

    pub fn loss_log_path(&self, key: &str) -> Option<PathBuf> {
        self.dir.as_ref().map(|d| d.join(format!("{key}.loss.csv")))
    }

    /// Returns the cached model or trains one. The training log is returned
    /// only when training actually ran.
    pub fn get_or_train(
        &self,
        train: &[Trajectory],
        norm: &NormSpec,
        spec: &StackSpec,
        hyper: &TrainHyper,
    ) -> Result<(Arc<UserModel>, Option<Vec<(usize, f64)>>)> {
        let key = Self::key(train, norm, spec, hyper);
        if let Some(m) = self.mem.lock().expect("cache lock").get(&key) {
            return Ok((m.clone(), None));
        }
        if let Some(path) = self.checkpoint_path(&key) {
            if path.exists() {
                let model = UserModel::from_checkpoint(&std::fs::read(&path)?, *norm)?;
                if &model.spec != spec {
                    return Err(Error::Checkpoint(format!("{}: stack shape differs", path.display())));
                }
                let model = Arc::new(model);
                self.mem.lock().expect("cache lock").insert(key, model.clone());
                return Ok((model, None));
            }
        }
        let trained = train_user_model(&build_dataset(train, norm)?, spec, hyper)?;
        if let Some(path) = self.checkpoint_path(&key) {
            std::fs::create_dir_all(path.parent().expect("checkpoint in a directory"))?;
            std::fs::write(&path, trained.model.to_checkpoint()?)?;
            io::write_train_log(&self.loss_log_path(&key).expect("dir set"), &trained.log)?;
        }
        let model = Arc::new(trained.model);
        self.mem.lock().expect("cache lock").insert(key, model.clone());
        Ok((model, Some(trained.log)))
    }
}

/// Trains (or fetches) one model per user of `world` on the training days.
pub fn train_world(cfg: &SimConfig, world: &World, cache: &ModelCache) -> Result<BTreeMap<u32, Arc<UserModel>>> {
    let norm = NormSpec::from_map(&cfg.map);
    let spec = cfg.stack_spec();
    world
        .profiles
        .par_iter()
        .map(|p| {
            let train: Vec<Trajectory> = cfg.train_days().map(|d| world.trace(p.user_id, d).clone()).collect();
            let (model, _) = cache.get_or_train(&train, &norm, &spec, &cfg.hyper)?;
            Ok((p.user_id, model))
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridPoint {
    pub density_per_km2: f64,
    pub speed_mps: f64,
    pub mode: Mode,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MetricsRow {
    pub density_per_km2: f64,
    pub speed_mps: f64,
    pub mode: Mode,
    pub seed: u64,
    pub accuracy: f64,
    /// `None` when no handover happened on the evaluation days.
    pub mean_ho_rate_bps: Option<f64>,
    pub mean_ho_ber: Option<f64>,
    pub network_ee_bpj: f64,
}

impl MetricsRow {
    pub fn point(&self) -> GridPoint {
        GridPoint {
            density_per_km2: self.density_per_km2,
            speed_mps: self.speed_mps,
            mode: self.mode,
            seed: self.seed,
        }
    }
}

/// Forecast accuracy pooled over users and evaluation days.
pub fn pooled_accuracy(
    cfg: &SimConfig,
    world: &World,
    users: &[u32],
    deployment: &Deployment,
    models: Option<&BTreeMap<u32, Arc<UserModel>>>,
) -> Result<AccuracyCount> {
    let mut total = AccuracyCount::default();
    for &u in users {
        for d in cfg.eval_days() {
            let traj = world.trace(u, d);
            let actual = actual_ho_events(traj, deployment, &cfg.radio);
            let preds = match models {
                Some(m) => {
                    let model = m.get(&u).ok_or_else(|| Error::Config(format!("no model for user {u}")))?;
                    forecast_day(&mut LstmForecaster::new(model, deployment, &cfg.radio), traj, deployment, &cfg.radio).0
                }
                None => {
                    let mut f = OracleForecaster::new(traj, deployment, &cfg.radio, cfg.ideal_lookahead_min);
                    forecast_day(&mut f, traj, deployment, &cfg.radio).0
                }
            };
            total += score_accuracy(&preds, &actual, cfg.match_window_min);
        }
    }
    Ok(total)
}

/// Simulates the evaluation days of one `(density, speed)` cell in one mode.
pub fn simulate_cell(
    cfg: &SimConfig,
    world: &World,
    users: &[u32],
    deployment: &Deployment,
    models: &BTreeMap<u32, Arc<UserModel>>,
    mode: Mode,
) -> Result<Vec<DayLog>> {
    let params = SimParams {
        policy: cfg.policy.clone(),
        mode,
        ideal_lookahead_min: cfg.ideal_lookahead_min,
    };
    cfg.eval_days()
        .map(|d| {
            let sim_users: Vec<SimUser<'_>> = users
                .iter()
                .map(|&u| SimUser {
                    user_id: u,
                    trajectory: world.trace(u, d),
                    model: models.get(&u).map(|m| m.as_ref()),
                })
                .collect();
            simulate_day(&sim_users, deployment, &cfg.radio, &params)
        })
        .collect()
}

/// Observer invoked with every simulated day of a sweep.
pub type DayObserver<'a> = &'a (dyn Fn(&GridPoint, &DayLog) + Sync);

#[allow(clippy::too_many_arguments)]
fn evaluate_cell(
    cfg: &SimConfig,
    master_seed: u64,
    world: &World,
    models: &BTreeMap<u32, Arc<UserModel>>,
    density: f64,
    speed: f64,
    observer: Option<DayObserver<'_>>,
) -> Vec<(GridPoint, Result<MetricsRow>)> {
    let point = |mode| GridPoint {
        density_per_km2: density,
        speed_mps: speed,
        mode,
        seed: world.seed,
    };
    let deployment = build_deployment(cfg, master_seed, world.seed, density);
    let users: Vec<u32> = world.users_at_speed(speed).map(|p| p.user_id).collect();
    let accuracy = pooled_accuracy(cfg, world, &users, &deployment, Some(models))
        .and_then(|lstm| Ok((lstm, pooled_accuracy(cfg, world, &users, &deployment, None)?)));
    let (lstm_acc, oracle_acc) = match accuracy {
        Ok(a) => a,
        Err(e) => {
            let msg = e.to_string();
            return cfg
                .modes
                .iter()
                .map(|&m| (point(m), Err(Error::Config(msg.clone()))))
                .collect();
        }
    };
    let dep = &deployment;
    let actual: Vec<UserHo> = users
        .iter()
        .flat_map(|&u| {
            cfg.eval_days().flat_map(move |d| {
                actual_ho_events(world.trace(u, d), dep, &cfg.radio)
                    .into_iter()
                    .map(move |event| UserHo {
                        user_id: u,
                        day: d,
                        event,
                    })
            })
        })
        .collect();

    cfg.modes
        .iter()
        .map(|&mode| {
            let gp = point(mode);
            let row = (|| {
                let logs = simulate_cell(cfg, world, &users, &deployment, models, mode)?;
                if let Some(obs) = observer {
                    logs.iter().for_each(|l| obs(&gp, l));
                }
                let links: Vec<_> = logs.into_iter().flat_map(|l| l.links).collect();
                let windows = ho_window_metrics(&links, &actual, cfg.ho_window_min)?;
                let acc = if mode == Mode::IdealDual { oracle_acc } else { lstm_acc };
                Ok(MetricsRow {
                    density_per_km2: density,
                    speed_mps: speed,
                    mode,
                    seed: world.seed,
                    accuracy: acc.ratio(),
                    mean_ho_rate_bps: windows.mean_rate_bps,
                    mean_ho_ber: windows.mean_ber,
                    network_ee_bpj: network_ee(&links, &deployment, &cfg.power)?,
                })
            })();
            (gp, row)
        })
        .collect()
}

#[derive(Debug, Default)]
pub struct SweepOutput {
    /// Successful rows in canonical grid order.
    pub rows: Vec<MetricsRow>,
    pub failures: Vec<(GridPoint, String)>,
}

/// Runs the whole grid. Failures of individual grid points are collected
/// rather than aborting the remaining points.
pub fn run_sweep(
    cfg: &SimConfig,
    master_seed: u64,
    cache: &ModelCache,
    observer: Option<DayObserver<'_>>,
) -> Result<SweepOutput> {
    cfg.validate()?;
    let mut results: Vec<(GridPoint, Result<MetricsRow>)> = Vec::new();
    for &s in &cfg.seeds {
        let prepared = build_world(cfg, master_seed, s).and_then(|w| {
            let models = train_world(cfg, &w, cache)?;
            Ok((w, models))
        });
        let (world, models) = match prepared {
            Ok(p) => p,
            Err(e) => {
                for &density_per_km2 in &cfg.densities {
                    for &speed_mps in &cfg.speeds {
                        for &mode in &cfg.modes {
                            let gp = GridPoint {
                                density_per_km2,
                                speed_mps,
                                mode,
                                seed: s,
                            };
                            results.push((gp, Err(Error::Config(e.to_string()))));
                        }
                    }
                }
                continue;
            }
        };
        let cells: Vec<(f64, f64)> = cfg
            .densities
            .iter()
            .flat_map(|&d| cfg.speeds.iter().map(move |&v| (d, v)))
            .collect();
        let evaluated: Vec<_> = cells
            .par_iter()
            .map(|&(d, v)| evaluate_cell(cfg, master_seed, &world, &models, d, v, observer))
            .collect();
        results.extend(evaluated.into_iter().flatten());
    }

    let rank = |gp: &GridPoint| {
        let pos = |v: &[f64], x: f64| v.iter().position(|&y| y == x).unwrap_or(usize::MAX);
        (
            pos(&cfg.densities, gp.density_per_km2),
            pos(&cfg.speeds, gp.speed_mps),
            cfg.modes.iter().position(|&m| m == gp.mode).unwrap_or(usize::MAX),
            cfg.seeds.iter().position(|&s| s == gp.seed).unwrap_or(usize::MAX),
        )
    };
    results.sort_by_key(|(gp, _)| rank(gp));
    let mut out = SweepOutput::default();
    for (gp, r) in results {
        match r {
            Ok(row) => out.rows.push(row),
            Err(e) => out.failures.push((gp, e.to_string())),
        }
    }
    Ok(out)
}

/// Runs the sweep and writes `metrics.csv` under the output directory.
/// Completed rows are written even when some grid points failed; the
/// failures are then reported as an error.
pub fn run_sweep_to(cfg: &SimConfig, master_seed: u64, out_dir: &Path) -> Result<SweepOutput> {
    let cache = ModelCache::with_dir(out_dir.join("models"));
    let out = run_sweep(cfg, master_seed, &cache, None)?;
    write_metrics(&out_dir.join("metrics.csv"), &out.rows)?;
    if let Some((gp, msg)) = out.failures.first() {
        return Err(Error::Config(format!(
            "{} grid point(s) failed; first at density {} speed {} mode {} seed {}: {msg}",
            out.failures.len(),
            gp.density_per_km2,
            gp.speed_mps,
            gp.mode,
            gp.seed
        )));
    }
    Ok(out)
}

fn opt_f64(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_metrics(path: &Path, rows: &[MetricsRow]) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)?;
        }
    }
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(METRICS_HEADER)?;
    for r in rows {
        w.write_record([
            r.density_per_km2.to_string(),
            r.speed_mps.to_string(),
            r.mode.to_string(),
            r.seed.to_string(),
            r.accuracy.to_string(),
            opt_f64(r.mean_ho_rate_bps),
            opt_f64(r.mean_ho_ber),
            r.network_ee_bpj.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_metrics(path: &Path) -> Result<Vec<MetricsRow>> {
    let opt = |line: usize, rec: &csv::StringRecord, idx: usize, name: &str| -> Result<Option<f64>> {
        match rec.get(idx).map(str::trim) {
            None | Some("") => Ok(None),
            Some(_) => io::field(path, line, rec, idx, name).map(Some),
        }
    };
    io::read_rows(path, &METRICS_HEADER)?
        .into_iter()
        .map(|(line, r)| {
            let row = MetricsRow {
                density_per_km2: io::field(path, line, &r, 0, "density_per_km2")?,
                speed_mps: io::field(path, line, &r, 1, "speed_mps")?,
                mode: io::field(path, line, &r, 2, "mode")?,
                seed: io::field(path, line, &r, 3, "seed")?,
                accuracy: io::field(path, line, &r, 4, "accuracy")?,
                mean_ho_rate_bps: opt(line, &r, 5, "mean_ho_rate_bps")?,
                mean_ho_ber: opt(line, &r, 6, "mean_ho_ber")?,
                network_ee_bpj: io::field(path, line, &r, 7, "network_ee_bpj")?,
            };
            if !(0.0..=1.0).contains(&row.accuracy)
                || row.mean_ho_rate_bps.is_some_and(|v| v < 0.0)
                || row.mean_ho_ber.is_some_and(|v| v < 0.0)
                || row.network_ee_bpj < 0.0
            {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line,
                    detail: "metric out of range".into(),
                });
            }
            Ok(row)
        })
        .collect()
}
