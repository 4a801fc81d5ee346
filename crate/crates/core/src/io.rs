//! CSV files exchanged between pipeline stages.

use std::collections::BTreeMap;
use std::fs::File;
use std::path::Path;
use std::str::FromStr;

use csv::{ReaderBuilder, StringRecord, Writer};
use ini::Ini;

use crate::dualconn::{LinkRecord, SimEvent};
use crate::error::{Error, Result};
use crate::mobility::{Point, Trajectory};
use crate::predictor::PredictionRecord;
use crate::radio::Deployment;

fn writer(path: &Path, header: &[&str]) -> Result<Writer<File>> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)?;
        }
    }
    let mut w = Writer::from_path(path)?;
    w.write_record(header)?;
    Ok(w)
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Rows of a headed CSV file together with their 1-based line numbers.
pub(crate) fn read_rows(path: &Path, header: &[&str]) -> Result<Vec<(usize, StringRecord)>> {
    let mut r = ReaderBuilder::new().has_headers(true).from_path(path)?;
    let found = r.headers()?.clone();
    if found.iter().collect::<Vec<_>>() != header {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            detail: format!("expected header `{}`", header.join(",")),
        });
    }
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: e.position().map(|p| p.line() as usize).unwrap_or(0),
            detail: e.to_string(),
        })?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        rows.push((line, rec));
    }
    Ok(rows)
}

/// Parses field `idx` of a row, reporting the file line on failure.
pub(crate) fn field<T: FromStr>(path: &Path, line: usize, rec: &StringRecord, idx: usize, name: &str) -> Result<T> {
    let raw = rec.get(idx).unwrap_or("");
    raw.trim().parse().map_err(|_| Error::Parse {
        path: path.to_path_buf(),
        line,
        detail: format!("bad {name} `{raw}`"),
    })
}

pub fn write_hotspots(path: &Path, hotspots: &[Point]) -> Result<()> {
    let mut w = writer(path, &["hotspot_id", "x_m", "y_m"])?;
    for (i, p) in hotspots.iter().enumerate() {
        w.write_record([i.to_string(), format!("{:.3}", p.x), format!("{:.3}", p.y)])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_hotspots(path: &Path) -> Result<Vec<Point>> {
    read_rows(path, &["hotspot_id", "x_m", "y_m"])?
        .iter()
        .map(|(line, r)| Ok(Point::new(field(path, *line, r, 1, "x_m")?, field(path, *line, r, 2, "y_m")?)))
        .collect()
}

/// Writes the station list and an INI sidecar (`<path>.ini`) holding the
/// density, capacity and the seed the layout was drawn from.
pub fn write_deployment(path: &Path, deployment: &Deployment, seed: u64) -> Result<()> {
    let mut w = writer(path, &["bs_id", "x_m", "y_m"])?;
    for b in &deployment.stations {
        w.write_record([b.id.to_string(), format!("{:.3}", b.pos.x), format!("{:.3}", b.pos.y)])?;
    }
    w.flush()?;
    let mut meta = Ini::new();
    meta.with_section(Some("deployment"))
        .set("density_per_km2", deployment.density_per_km2.to_string())
        .set("capacity_per_bs", deployment.capacity_per_bs.to_string())
        .set("seed", seed.to_string());
    meta.write_to_file(sidecar(path))?;
    Ok(())
}

fn sidecar(path: &Path) -> std::path::PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".ini");
    s.into()
}

/// Reads a deployment and its sidecar; returns it with the recorded seed.
pub fn read_deployment(path: &Path) -> Result<(Deployment, u64)> {
    let positions: Vec<Point> = read_rows(path, &["bs_id", "x_m", "y_m"])?
        .iter()
        .enumerate()
        .map(|(i, (line, r))| {
            let id: usize = field(path, *line, r, 0, "bs_id")?;
            if id != i {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line: *line,
                    detail: format!("station ids must be consecutive from 0, found {id}"),
                });
            }
            Ok(Point::new(field(path, *line, r, 1, "x_m")?, field(path, *line, r, 2, "y_m")?))
        })
        .collect::<Result<_>>()?;
    let meta_path = sidecar(path);
    let meta = Ini::load_from_file(&meta_path).map_err(|e| Error::Config(format!("{}: {e}", meta_path.display())))?;
    let sec = meta
        .section(Some("deployment"))
        .ok_or_else(|| Error::Config(format!("{}: missing [deployment]", meta_path.display())))?;
    let get = |k: &str| {
        sec.get(k)
            .ok_or_else(|| Error::Config(format!("{}: missing `{k}`", meta_path.display())))
    };
    let bad = |k: &str| Error::Config(format!("{}: bad `{k}`", meta_path.display()));
    let density: f64 = get("density_per_km2")?.parse().map_err(|_| bad("density_per_km2"))?;
    let capacity: usize = get("capacity_per_bs")?.parse().map_err(|_| bad("capacity_per_bs"))?;
    let seed: u64 = get("seed")?.parse().map_err(|_| bad("seed"))?;
    Ok((Deployment::from_positions(density, &positions, capacity), seed))
}

const TRACE_HEADER: [&str; 5] = ["user_id", "day", "minute", "x_m", "y_m"];

/// Writes traces sorted by `(user_id, day, minute)`.
pub fn write_traces(path: &Path, trajectories: &[Trajectory]) -> Result<()> {
    let mut sorted: Vec<&Trajectory> = trajectories.iter().collect();
    sorted.sort_by_key(|t| (t.user_id, t.day));
    let mut w = writer(path, &TRACE_HEADER)?;
    for t in sorted {
        for (m, p) in t.samples.iter().enumerate() {
            w.write_record([
                t.user_id.to_string(),
                t.day.to_string(),
                m.to_string(),
                format!("{:.3}", p.x),
                format!("{:.3}", p.y),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_traces(path: &Path) -> Result<Vec<Trajectory>> {
    let mut days: BTreeMap<(u32, u32), Vec<Point>> = BTreeMap::new();
    for (line, r) in read_rows(path, &TRACE_HEADER)? {
        let user: u32 = field(path, line, &r, 0, "user_id")?;
        let day: u32 = field(path, line, &r, 1, "day")?;
        let minute: usize = field(path, line, &r, 2, "minute")?;
        let samples = days.entry((user, day)).or_default();
        if minute != samples.len() {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line,
                detail: format!("expected minute {}, found {minute}", samples.len()),
            });
        }
        samples.push(Point::new(field(path, line, &r, 3, "x_m")?, field(path, line, &r, 4, "y_m")?));
    }
    Ok(days
        .into_iter()
        .map(|((user_id, day), samples)| Trajectory { user_id, day, samples })
        .collect())
}

pub fn write_predictions(path: &Path, records: &[PredictionRecord]) -> Result<()> {
    let mut w = writer(
        path,
        &["user_id", "day", "minute", "pred_x_m", "pred_y_m", "serving_bs", "predicted_target_bs"],
    )?;
    for r in records {
        w.write_record([
            r.user_id.to_string(),
            r.day.to_string(),
            r.minute.to_string(),
            format!("{:.3}", r.predicted_pos.x),
            format!("{:.3}", r.predicted_pos.y),
            r.serving_bs.to_string(),
            opt(r.predicted_target_bs),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_events(path: &Path, events: &[SimEvent]) -> Result<()> {
    let mut w = writer(path, &["minute", "user_id", "kind", "from_bs", "to_bs"])?;
    for e in events {
        w.write_record([
            e.minute.to_string(),
            e.user_id.to_string(),
            e.kind.to_string(),
            e.from_bs.to_string(),
            e.to_bs.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_links(path: &Path, links: &[LinkRecord]) -> Result<()> {
    let mut w = writer(
        path,
        &["minute", "user_id", "mode", "serving_bs", "target_bs", "rss_s_w", "rss_t_w", "ber", "rate_bps"],
    )?;
    for l in links {
        w.write_record([
            l.minute.to_string(),
            l.user_id.to_string(),
            l.mode.to_string(),
            l.serving_bs.to_string(),
            opt(l.target_bs),
            l.serving.rss_w.to_string(),
            opt(l.target.map(|t| t.rss_w)),
            l.ber.to_string(),
            l.rate_bps.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_train_log(path: &Path, log: &[(usize, f64)]) -> Result<()> {
    let mut w = writer(path, &["epoch", "loss"])?;
    for (e, l) in log {
        w.write_record([e.to_string(), l.to_string()])?;
    }
    w.flush()?;
    Ok(())
}
