//! Summaries of a metrics file: dual-vs-single gains, accuracy by speed and a
//! long-format table for plotting.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use super::sweep::MetricsRow;
use crate::dualconn::Mode;
use crate::error::Result;

/// Relative improvement of `value` over `baseline` in percent. For
/// lower-is-better metrics the sign is flipped. A zero baseline yields 0
/// when the value is also zero and `None` otherwise.
pub fn gain_pct(value: f64, baseline: f64, higher_is_better: bool) -> Option<f64> {
    if baseline == 0.0 {
        return (value == 0.0).then_some(0.0);
    }
    let g = if higher_is_better {
        (value - baseline) / baseline
    } else {
        (baseline - value) / baseline
    };
    Some(100.0 * g)
}

fn mean(values: impl IntoIterator<Item = f64>) -> Option<f64> {
    let (s, n) = values.into_iter().fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| s / n as f64)
}

/// Means of one density and mode over speeds and seeds.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ModeMeans {
    pub rate_bps: Option<f64>,
    pub ber: Option<f64>,
    pub ee_bpj: Option<f64>,
}

fn mode_means<'a>(rows: impl Iterator<Item = &'a MetricsRow> + Clone) -> ModeMeans {
    ModeMeans {
        rate_bps: mean(rows.clone().filter_map(|r| r.mean_ho_rate_bps)),
        ber: mean(rows.clone().filter_map(|r| r.mean_ho_ber)),
        ee_bpj: mean(rows.map(|r| r.network_ee_bpj)),
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Gains {
    pub throughput_pct: Option<f64>,
    pub ber_pct: Option<f64>,
    pub ee_pct: Option<f64>,
}

fn gains(dual: &ModeMeans, single: &ModeMeans) -> Gains {
    let g = |a: Option<f64>, b: Option<f64>, up| a.zip(b).and_then(|(a, b)| gain_pct(a, b, up));
    Gains {
        throughput_pct: g(dual.rate_bps, single.rate_bps, true),
        ber_pct: g(dual.ber, single.ber, false),
        ee_pct: g(dual.ee_bpj, single.ee_bpj, true),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GainRow {
    pub density_per_km2: f64,
    pub single: ModeMeans,
    pub dual: ModeMeans,
    pub ideal: ModeMeans,
    pub dual_gain: Gains,
    pub ideal_gain: Gains,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AccuracyRow {
    pub speed_mps: f64,
    pub density_per_km2: f64,
    pub mean_accuracy: f64,
    pub n_seeds: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LongRow {
    pub density_per_km2: f64,
    pub speed_mps: f64,
    pub mode: Mode,
    pub metric: &'static str,
    pub mean: f64,
    pub n: usize,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Report {
    pub gains: Vec<GainRow>,
    pub accuracy: Vec<AccuracyRow>,
    pub long: Vec<LongRow>,
}

/// Orders f64 keys as they first appear in the rows.
fn distinct(values: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut out: Vec<f64> = Vec::new();
    for v in values {
        if !out.contains(&v) {
            out.push(v);
        }
    }
    out
}

pub fn build_report(rows: &[MetricsRow]) -> Report {
    let densities = distinct(rows.iter().map(|r| r.density_per_km2));
    let speeds = distinct(rows.iter().map(|r| r.speed_mps));
    let mut report = Report::default();

    for &d in &densities {
        let of = |m: Mode| mode_means(rows.iter().filter(move |r| r.density_per_km2 == d && r.mode == m));
        let (single, dual, ideal) = (of(Mode::Single), of(Mode::Dual), of(Mode::IdealDual));
        report.gains.push(GainRow {
            density_per_km2: d,
            dual_gain: gains(&dual, &single),
            ideal_gain: gains(&ideal, &single),
            single,
            dual,
            ideal,
        });
    }

    // Accuracy is a property of the learned predictor; read it from the
    // dual rows, or the single rows when no dual run exists.
    let acc_mode = if rows.iter().any(|r| r.mode == Mode::Dual) {
        Mode::Dual
    } else {
        Mode::Single
    };
    for &v in &speeds {
        for &d in &densities {
            let acc: Vec<f64> = rows
                .iter()
                .filter(|r| r.speed_mps == v && r.density_per_km2 == d && r.mode == acc_mode)
                .map(|r| r.accuracy)
                .collect();
            if let Some(m) = mean(acc.iter().copied()) {
                report.accuracy.push(AccuracyRow {
                    speed_mps: v,
                    density_per_km2: d,
                    mean_accuracy: m,
                    n_seeds: acc.len(),
                });
            }
        }
    }

    let mut groups: BTreeMap<(usize, usize, Mode), Vec<&MetricsRow>> = BTreeMap::new();
    for r in rows {
        let di = densities.iter().position(|&x| x == r.density_per_km2).expect("listed");
        let si = speeds.iter().position(|&x| x == r.speed_mps).expect("listed");
        groups.entry((di, si, r.mode)).or_default().push(r);
    }
    type Getter = fn(&MetricsRow) -> Option<f64>;
    let metrics: [(&'static str, Getter); 4] = [
        ("accuracy", |r| Some(r.accuracy)),
        ("mean_ho_rate_bps", |r| r.mean_ho_rate_bps),
        ("mean_ho_ber", |r| r.mean_ho_ber),
        ("network_ee_bpj", |r| Some(r.network_ee_bpj)),
    ];
    for ((di, si, mode), group) in groups {
        for (metric, get) in metrics {
            let vals: Vec<f64> = group.iter().filter_map(|r| get(r)).collect();
            if let Some(m) = mean(vals.iter().copied()) {
                report.long.push(LongRow {
                    density_per_km2: densities[di],
                    speed_mps: speeds[si],
                    mode,
                    metric,
                    mean: m,
                    n: vals.len(),
                });
            }
        }
    }
    report
}

fn pct(v: Option<f64>) -> String {
    v.map(|x| format!("{x:+.1}%")).unwrap_or_else(|| "n/a".into())
}

fn sci(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.3e}")).unwrap_or_else(|| "n/a".into())
}

/// Human-readable tables.
pub fn render_text(report: &Report) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "Gains of dual connectivity over single connectivity (HO windows; EE over whole days)");
    let _ = writeln!(
        s,
        "{:>10} {:>12} {:>12} {:>12} {:>12} {:>12} {:>12}",
        "density", "thr dual", "thr ideal", "ber dual", "ber ideal", "ee dual", "ee ideal"
    );
    for g in &report.gains {
        let _ = writeln!(
            s,
            "{:>10} {:>12} {:>12} {:>12} {:>12} {:>12} {:>12}",
            g.density_per_km2,
            pct(g.dual_gain.throughput_pct),
            pct(g.ideal_gain.throughput_pct),
            pct(g.dual_gain.ber_pct),
            pct(g.ideal_gain.ber_pct),
            pct(g.dual_gain.ee_pct),
            pct(g.ideal_gain.ee_pct),
        );
    }
    let _ = writeln!(s, "\nMean HO-window rate (bit/s) / BER and network EE (bit/J)");
    let _ = writeln!(
        s,
        "{:>10} {:>11} {:>11} {:>11} {:>11} {:>11} {:>11} {:>11} {:>11} {:>11}",
        "density", "rate s", "rate d", "rate i", "ber s", "ber d", "ber i", "ee s", "ee d", "ee i"
    );
    for g in &report.gains {
        let _ = writeln!(
            s,
            "{:>10} {:>11} {:>11} {:>11} {:>11} {:>11} {:>11} {:>11} {:>11} {:>11}",
            g.density_per_km2,
            sci(g.single.rate_bps),
            sci(g.dual.rate_bps),
            sci(g.ideal.rate_bps),
            sci(g.single.ber),
            sci(g.dual.ber),
            sci(g.ideal.ber),
            sci(g.single.ee_bpj),
            sci(g.dual.ee_bpj),
            sci(g.ideal.ee_bpj),
        );
    }
    let densities = distinct(report.accuracy.iter().map(|a| a.density_per_km2));
    let speeds = distinct(report.accuracy.iter().map(|a| a.speed_mps));
    let _ = writeln!(s, "\nHandover prediction accuracy (mean over seeds)");
    let _ = write!(s, "{:>10}", "speed\\dens");
    for d in &densities {
        let _ = write!(s, " {d:>8}");
    }
    let _ = writeln!(s);
    for v in &speeds {
        let _ = write!(s, "{v:>10}");
        for d in &densities {
            let cell = report
                .accuracy
                .iter()
                .find(|a| a.speed_mps == *v && a.density_per_km2 == *d)
                .map(|a| format!("{:.3}", a.mean_accuracy))
                .unwrap_or_else(|| "n/a".into());
            let _ = write!(s, " {cell:>8}");
        }
        let _ = writeln!(s);
    }
    s
}

pub fn write_long_csv(path: &Path, report: &Report) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["density_per_km2", "speed_mps", "mode", "metric", "mean", "n"])?;
    for r in &report.long {
        w.write_record([
            r.density_per_km2.to_string(),
            r.speed_mps.to_string(),
            r.mode.to_string(),
            r.metric.to_string(),
            r.mean.to_string(),
            r.n.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_gains_csv(path: &Path, report: &Report) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "density_per_km2",
        "throughput_gain_pct",
        "ber_gain_pct",
        "ee_gain_pct",
        "ideal_throughput_gain_pct",
        "ideal_ber_gain_pct",
        "ideal_ee_gain_pct",
    ])?;
    let f = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for g in &report.gains {
        w.write_record([
            g.density_per_km2.to_string(),
            f(g.dual_gain.throughput_pct),
            f(g.dual_gain.ber_pct),
            f(g.dual_gain.ee_pct),
            f(g.ideal_gain.throughput_pct),
            f(g.ideal_gain.ber_pct),
            f(g.ideal_gain.ee_pct),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(mode: Mode, rate: f64, ber: f64, ee: f64) -> MetricsRow {
        MetricsRow {
            density_per_km2: 5.0,
            speed_mps: 1.0,
            mode,
            seed: 1,
            accuracy: 0.9,
            mean_ho_rate_bps: Some(rate),
            mean_ho_ber: Some(ber),
            network_ee_bpj: ee,
        }
    }

    #[test]
    fn headline_gains() {
        assert!((gain_pct(1.85e6, 1e6, true).unwrap() - 85.0).abs() < 1e-9);
        assert!((gain_pct(0.6e-3, 1e-3, false).unwrap() - 40.0).abs() < 1e-9);
        assert_eq!(gain_pct(0.0, 0.0, false), Some(0.0));
        assert_eq!(gain_pct(1.0, 0.0, true), None);
    }

    #[test]
    fn identical_rows_have_zero_gain() {
        let rows = [
            row(Mode::Single, 2e6, 1e-3, 5e5),
            row(Mode::Dual, 2e6, 1e-3, 5e5),
            row(Mode::IdealDual, 2e6, 1e-3, 5e5),
        ];
        let r = build_report(&rows);
        let g = r.gains[0].dual_gain;
        assert_eq!((g.throughput_pct, g.ber_pct, g.ee_pct), (Some(0.0), Some(0.0), Some(0.0)));
        assert_eq!(r.accuracy.len(), 1);
        assert_eq!(r.long.len(), 12);
        assert!(render_text(&r).contains("+0.0%"));
    }
}
