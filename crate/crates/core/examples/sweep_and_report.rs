//! Runs a reduced density x speed x mode x seed grid, writes `metrics.csv`,
//! and prints the gain and accuracy summary.
//!
//! `cargo run --release --example sweep_and_report [out_dir]`

use std::path::PathBuf;

use idcsim::harness::report::{write_gains_csv, write_long_csv};
use idcsim::harness::{build_report, read_metrics, render_text, run_sweep_to, SimConfig};

fn main() -> idcsim::Result<()> {
    let out: PathBuf = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("idcsim-sweep-example"));
    let mut cfg = SimConfig::desk();
    cfg.hidden_sizes = vec![16, 16];
    cfg.hyper.epochs = 3;
    cfg.densities = vec![5.0, 20.0];
    cfg.users_per_speed = 2;
    cfg.days = 6;
    cfg.seeds = vec![1, 2];

    let result = run_sweep_to(&cfg, 1, &out)?;
    println!("{} rows -> {}", result.rows.len(), out.join("metrics.csv").display());
    let rows = read_metrics(&out.join("metrics.csv"))?;
    let report = build_report(&rows);
    print!("{}", render_text(&report));
    write_long_csv(&out.join("report_long.csv"), &report)?;
    write_gains_csv(&out.join("gains.csv"), &report)?;
    Ok(())
}
