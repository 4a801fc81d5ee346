//! Command-line front end.
//!
//! Single-run subcommands (`gen-map`, `gen-traces`, `train`, `eval-pred`,
//! `simulate`) work on the first configured replicate seed; `sweep` runs the
//! whole grid. Trained models are cached under `<out>/models` and reused by
//! every subcommand.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};

use crate::dualconn::Mode;
use crate::harness::metrics::{ho_window_metrics, network_ee, UserHo};
use crate::harness::report::{build_report, render_text, write_gains_csv, write_long_csv};
use crate::harness::sweep::{pooled_accuracy, simulate_cell};
use crate::harness::{
    build_deployment, build_world, read_metrics, run_sweep_to, train_world, write_metrics, MetricsRow, ModelCache,
    SimConfig, World,
};
use crate::io;
use crate::predictor::{forecast_day, score_accuracy, LstmForecaster, NormSpec};
use crate::radio::actual_ho_events;
use crate::seed;

#[derive(Debug, Parser)]
#[command(name = "idcsim", version, about = "Prediction-driven dual-connectivity handover simulator")]
pub struct Cli {
    /// INI configuration file; built-in desk-scale defaults otherwise.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Master seed.
    #[arg(long, global = true, default_value_t = 1)]
    pub seed: u64,
    /// Output directory (overrides `out_dir` from the config).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write hotspots and station layouts.
    GenMap {
        /// Only this density instead of every configured one.
        #[arg(long)]
        density: Option<f64>,
    },
    /// Write mobility traces for every user and day.
    GenTraces,
    /// Train (or load cached) per-user predictors and write their loss logs.
    Train {
        #[arg(long)]
        user: Option<u32>,
    },
    /// Forecast handovers on the evaluation days and score them.
    EvalPred {
        #[arg(long)]
        density: Option<f64>,
    },
    /// Simulate the evaluation days of one grid cell.
    Simulate {
        #[arg(long)]
        mode: Mode,
        #[arg(long)]
        density: f64,
        #[arg(long)]
        speed: f64,
    },
    /// Run the full density x speed x mode x seed grid.
    Sweep,
    /// Summarize a metrics file.
    Report {
        /// Defaults to `<out>/metrics.csv`.
        #[arg(long)]
        metrics: Option<PathBuf>,
    },
}

struct Ctx {
    cfg: SimConfig,
    master: u64,
    out: PathBuf,
}

impl Ctx {
    fn replicate(&self) -> u64 {
        self.cfg.seeds[0]
    }

    fn world(&self) -> anyhow::Result<World> {
        Ok(build_world(&self.cfg, self.master, self.replicate())?)
    }

    fn cache(&self) -> ModelCache {
        ModelCache::with_dir(self.out.join("models"))
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }
}

pub fn run(cli: Cli) -> anyhow::Result<()> {
    let mut cfg = match &cli.config {
        Some(p) => SimConfig::load(p)?,
        None => SimConfig::desk(),
    };
    if let Some(out) = &cli.out {
        cfg.out_dir = out.clone();
    }
    let ctx = Ctx {
        out: cfg.out_dir.clone(),
        cfg,
        master: cli.seed,
    };
    std::fs::create_dir_all(&ctx.out).with_context(|| format!("creating {}", ctx.out.display()))?;

    match cli.command {
        Command::GenMap { density } => gen_map(&ctx, density),
        Command::GenTraces => gen_traces(&ctx),
        Command::Train { user } => train(&ctx, user),
        Command::EvalPred { density } => eval_pred(&ctx, density),
        Command::Simulate { mode, density, speed } => simulate(&ctx, mode, density, speed),
        Command::Sweep => {
            let out = run_sweep_to(&ctx.cfg, ctx.master, &ctx.out)?;
            println!("{} rows -> {}", out.rows.len(), ctx.path("metrics.csv").display());
            Ok(())
        }
        Command::Report { metrics } => report(&ctx, metrics),
    }
}

fn gen_map(ctx: &Ctx, density: Option<f64>) -> anyhow::Result<()> {
    let world = ctx.world()?;
    io::write_hotspots(&ctx.path("hotspots.csv"), &world.hotspots)?;
    let densities = density.map(|d| vec![d]).unwrap_or_else(|| ctx.cfg.densities.clone());
    for d in densities {
        if !(d > 0.0) {
            bail!("density must be positive");
        }
        let dep = build_deployment(&ctx.cfg, ctx.master, ctx.replicate(), d);
        let layout_seed = seed::derive(ctx.master, "deploy", &[ctx.replicate(), seed::f64_key(d)]);
        let path = ctx.path(&format!("deployment_{d}.csv"));
        io::write_deployment(&path, &dep, layout_seed)?;
        println!("density {d}/km2: {} stations -> {}", dep.len(), path.display());
    }
    println!("{} hotspots -> {}", world.hotspots.len(), ctx.path("hotspots.csv").display());
    Ok(())
}

fn gen_traces(ctx: &Ctx) -> anyhow::Result<()> {
    let world = ctx.world()?;
    let all = world.all_traces();
    io::write_traces(&ctx.path("traces.csv"), &all)?;
    println!(
        "{} users x {} days -> {}",
        world.profiles.len(),
        ctx.cfg.days,
        ctx.path("traces.csv").display()
    );
    Ok(())
}

fn train(ctx: &Ctx, only: Option<u32>) -> anyhow::Result<()> {
    let world = ctx.world()?;
    let cache = ctx.cache();
    let norm = NormSpec::from_map(&ctx.cfg.map);
    let spec = ctx.cfg.stack_spec();
    let users: Vec<u32> = world
        .profiles
        .iter()
        .map(|p| p.user_id)
        .filter(|u| only.is_none_or(|o| o == *u))
        .collect();
    if users.is_empty() {
        bail!("no such user");
    }
    for u in users {
        let train: Vec<_> = ctx.cfg.train_days().map(|d| world.trace(u, d).clone()).collect();
        let (_, log) = cache.get_or_train(&train, &norm, &spec, &ctx.cfg.hyper)?;
        let key = ModelCache::key(&train, &norm, &spec, &ctx.cfg.hyper);
        let log = match log {
            Some(l) => l,
            None => read_loss_log(&cache.loss_log_path(&key).expect("cache has a directory"))?,
        };
        let path = ctx.path(&format!("train_log_user{u}.csv"));
        io::write_train_log(&path, &log)?;
        let last = log.last().map(|(_, l)| *l).unwrap_or(f64::NAN);
        println!("user {u}: final loss {last:.3e}, checkpoint {key}.ckpt");
    }
    Ok(())
}

fn read_loss_log(path: &Path) -> anyhow::Result<Vec<(usize, f64)>> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    r.records()
        .map(|rec| {
            let rec = rec?;
            Ok((rec[0].parse()?, rec[1].parse()?))
        })
        .collect()
}

fn eval_pred(ctx: &Ctx, density: Option<f64>) -> anyhow::Result<()> {
    let cfg = &ctx.cfg;
    let density = density.unwrap_or(cfg.densities[0]);
    let world = ctx.world()?;
    let models = train_world(cfg, &world, &ctx.cache())?;
    let dep = build_deployment(cfg, ctx.master, ctx.replicate(), density);
    let mut records = Vec::new();
    let mut feedback = csv::Writer::from_path(ctx.path("feedback.csv"))?;
    feedback.write_record(["user_id", "day", "minute", "predicted_target_bs", "matched"])?;
    for &speed in &cfg.speeds {
        let users: Vec<u32> = world.users_at_speed(speed).map(|p| p.user_id).collect();
        for &u in &users {
            for d in cfg.eval_days() {
                let traj = world.trace(u, d);
                let mut f = LstmForecaster::new(&models[&u], &dep, &cfg.radio);
                let (preds, log) = forecast_day(&mut f, traj, &dep, &cfg.radio);
                let actual = actual_ho_events(traj, &dep, &cfg.radio);
                for p in &preds {
                    // A prediction is confirmed when scoring it alone still matches.
                    let hit = score_accuracy(std::slice::from_ref(p), &actual, cfg.match_window_min).matched > 0;
                    feedback.write_record([
                        u.to_string(),
                        d.to_string(),
                        p.minute.to_string(),
                        p.target_bs.to_string(),
                        hit.to_string(),
                    ])?;
                }
                records.extend(log);
            }
        }
        let acc = pooled_accuracy(cfg, &world, &users, &dep, Some(&models))?;
        println!(
            "speed {speed} m/s: accuracy {:.3} ({} of {} handovers, {} forecasts)",
            acc.ratio(),
            acc.matched,
            acc.actual,
            acc.predicted
        );
    }
    feedback.flush()?;
    io::write_predictions(&ctx.path("predictions.csv"), &records)?;
    println!("predictions -> {}", ctx.path("predictions.csv").display());
    Ok(())
}

fn simulate(ctx: &Ctx, mode: Mode, density: f64, speed: f64) -> anyhow::Result<()> {
    let cfg = &ctx.cfg;
    let world = ctx.world()?;
    let users: Vec<u32> = world.users_at_speed(speed).map(|p| p.user_id).collect();
    if users.is_empty() {
        bail!("no configured users move at {speed} m/s");
    }
    if !(density > 0.0) {
        bail!("density must be positive");
    }
    let models = if mode != Mode::IdealDual {
        train_world(cfg, &world, &ctx.cache())?
    } else {
        Default::default()
    };
    let dep = build_deployment(cfg, ctx.master, ctx.replicate(), density);
    let logs = simulate_cell(cfg, &world, &users, &dep, &models, mode)?;
    let mut actual = Vec::new();
    for &u in &users {
        for d in cfg.eval_days() {
            for event in actual_ho_events(world.trace(u, d), &dep, &cfg.radio) {
                actual.push(UserHo { user_id: u, day: d, event });
            }
        }
    }
    for (day, log) in cfg.eval_days().zip(&logs) {
        io::write_events(&ctx.path(&format!("events_{mode}_day{day}.csv")), &log.events)?;
        io::write_links(&ctx.path(&format!("links_{mode}_day{day}.csv")), &log.links)?;
    }
    let links: Vec<_> = logs.into_iter().flat_map(|l| l.links).collect();
    let windows = ho_window_metrics(&links, &actual, cfg.ho_window_min)?;
    let accuracy = if mode == Mode::IdealDual {
        pooled_accuracy(cfg, &world, &users, &dep, None)?
    } else {
        pooled_accuracy(cfg, &world, &users, &dep, Some(&models))?
    };
    let row = MetricsRow {
        density_per_km2: density,
        speed_mps: speed,
        mode,
        seed: ctx.replicate(),
        accuracy: accuracy.ratio(),
        mean_ho_rate_bps: windows.mean_rate_bps,
        mean_ho_ber: windows.mean_ber,
        network_ee_bpj: network_ee(&links, &dep, &cfg.power)?,
    };
    let path = ctx.path(&format!("simulate_{mode}.csv"));
    write_metrics(&path, std::slice::from_ref(&row))?;
    print!("{}", std::fs::read_to_string(&path)?);
    Ok(())
}

fn report(ctx: &Ctx, metrics: Option<PathBuf>) -> anyhow::Result<()> {
    let path = metrics.unwrap_or_else(|| ctx.path("metrics.csv"));
    let rows = read_metrics(&path)?;
    let report = build_report(&rows);
    print!("{}", render_text(&report));
    write_long_csv(&ctx.path("report_long.csv"), &report)?;
    write_gains_csv(&ctx.path("gains.csv"), &report)?;
    Ok(())
}
