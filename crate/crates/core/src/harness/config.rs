//! Experiment configuration and its INI representation.

use std::collections::BTreeSet;
use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use ini::Ini;

use crate::dualconn::{DcPolicy, Mode};
use crate::error::{Error, Result};
use crate::lstm::{StackSpec, TrainHyper};
use crate::mobility::MapSpec;
use crate::radio::RadioConfig;

/// Per-user mobility parameters shared by every simulated user.
#[derive(Clone, Debug, PartialEq)]
pub struct MobilityParams {
    pub sites_per_user: usize,
    pub latp_exponent: f64,
    pub pause_min_s: f64,
    pub pause_max_s: f64,
    pub pause_exponent: f64,
}

impl Default for MobilityParams {
    fn default() -> Self {
        Self {
            sites_per_user: 10,
            latp_exponent: 3.0,
            pause_min_s: 30.0,
            pause_max_s: 1800.0,
            pause_exponent: 1.5,
        }
    }
}

/// Network power: a fixed draw per deployed station plus a per-link term.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PowerModel {
    pub p_fixed_w: f64,
    pub p_tx_w: f64,
}

impl Default for PowerModel {
    fn default() -> Self {
        Self {
            p_fixed_w: 1.0,
            p_tx_w: 0.25,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimConfig {
    pub map: MapSpec,
    pub mobility: MobilityParams,
    pub radio: RadioConfig,
    pub capacity_per_bs: usize,
    pub policy: DcPolicy,
    pub hidden_sizes: Vec<usize>,
    pub hyper: TrainHyper,
    pub densities: Vec<f64>,
    pub speeds: Vec<f64>,
    pub users_per_speed: usize,
    pub days: u32,
    pub modes: Vec<Mode>,
    pub seeds: Vec<u64>,
    pub ho_window_min: usize,
    pub match_window_min: usize,
    pub ideal_lookahead_min: usize,
    pub power: PowerModel,
    pub out_dir: PathBuf,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            map: MapSpec::default(),
            mobility: MobilityParams::default(),
            radio: RadioConfig::default(),
            capacity_per_bs: 16,
            policy: DcPolicy::default(),
            hidden_sizes: vec![64, 64, 64],
            hyper: TrainHyper::default(),
            densities: vec![5.0, 10.0, 20.0],
            speeds: vec![1.0, 4.0, 8.0],
            users_per_speed: 3,
            days: 22,
            modes: Mode::ALL.to_vec(),
            seeds: vec![1, 2, 3],
            ho_window_min: 2,
            match_window_min: 1,
            ideal_lookahead_min: 2,
            power: PowerModel::default(),
            out_dir: PathBuf::from("out"),
        }
    }
}

impl SimConfig {
    /// 2 km square map, otherwise the defaults.
    pub fn desk() -> Self {
        Self {
            map: MapSpec {
                width_m: 2000.0,
                height_m: 2000.0,
                ..MapSpec::default()
            },
            ..Self::default()
        }
    }

    pub fn stack_spec(&self) -> StackSpec {
        StackSpec {
            hidden_sizes: self.hidden_sizes.clone(),
            ..StackSpec::default()
        }
    }

    pub fn eval_days(&self) -> std::ops::Range<u32> {
        self.days - 2..self.days
    }

    pub fn train_days(&self) -> std::ops::Range<u32> {
        0..self.days - 2
    }

    pub fn validate(&self) -> Result<()> {
        self.map.validate()?;
        self.radio.validate()?;
        self.policy.validate()?;
        self.hyper.validate()?;
        self.stack_spec().validate()?;
        let bad = |m: &str| Err(Error::Config(m.into()));
        if self.densities.is_empty() || self.speeds.is_empty() || self.modes.is_empty() || self.seeds.is_empty() {
            return bad("densities, speeds, modes and seeds must all be nonempty");
        }
        if self.densities.iter().any(|d| !(*d > 0.0)) {
            return bad("densities must be positive");
        }
        if self.speeds.iter().any(|s| !(*s > 0.0)) {
            return bad("speeds must be positive");
        }
        if self.users_per_speed == 0 {
            return bad("users_per_speed must be at least 1");
        }
        if self.days < 3 {
            return bad("days must be at least 3 (training needs a day besides the two evaluation days)");
        }
        if self.capacity_per_bs == 0 {
            return bad("capacity_per_bs must be at least 1");
        }
        if self.mobility.sites_per_user < 2 || self.mobility.sites_per_user > self.map.n_hotspots {
            return bad("sites_per_user must lie in [2, n_hotspots]");
        }
        if !(self.mobility.pause_min_s > 0.0 && self.mobility.pause_min_s < self.mobility.pause_max_s) {
            return bad("pause bounds must satisfy 0 < pause_min_s < pause_max_s");
        }
        if !(self.mobility.pause_exponent > 0.0 && self.mobility.latp_exponent > 0.0) {
            return bad("mobility exponents must be positive");
        }
        if !(self.power.p_fixed_w > 0.0 && self.power.p_tx_w >= 0.0) {
            return bad("p_fixed_w must be positive and p_tx_w non-negative");
        }
        Ok(())
    }

    pub fn from_ini_str(text: &str) -> Result<Self> {
        let ini = Ini::load_from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        Self::from_ini(&ini)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_ini_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    fn from_ini(ini: &Ini) -> Result<Self> {
        let mut cfg = Self::default();
        for name in ini.sections() {
            match name {
                None | Some("map" | "radio" | "policy" | "train" | "sweep") => {}
                Some(other) => return Err(Error::Config(format!("unknown section [{other}]"))),
            }
        }
        if !ini.general_section().is_empty() {
            return Err(Error::Config("keys must live inside a section".into()));
        }

        let mut s = Section::new(ini, "map");
        s.get("width_m", &mut cfg.map.width_m)?;
        s.get("height_m", &mut cfg.map.height_m)?;
        s.get("n_hotspots", &mut cfg.map.n_hotspots)?;
        s.get("fractal_depth", &mut cfg.map.fractal_depth)?;
        s.get("sites_per_user", &mut cfg.mobility.sites_per_user)?;
        s.get("latp_exponent", &mut cfg.mobility.latp_exponent)?;
        s.get("pause_min_s", &mut cfg.mobility.pause_min_s)?;
        s.get("pause_max_s", &mut cfg.mobility.pause_max_s)?;
        s.get("pause_exponent", &mut cfg.mobility.pause_exponent)?;
        s.finish()?;

        let mut s = Section::new(ini, "radio");
        s.get("bandwidth_hz", &mut cfg.radio.bandwidth_hz)?;
        s.get("noise_w", &mut cfg.radio.noise_w)?;
        s.get("pathloss_exp", &mut cfg.radio.pathloss_exp)?;
        s.get("tx_power_w", &mut cfg.radio.tx_power_w)?;
        s.get("d_min_m", &mut cfg.radio.d_min_m)?;
        s.get("capacity_per_bs", &mut cfg.capacity_per_bs)?;
        s.finish()?;

        let mut s = Section::new(ini, "policy");
        s.get("hysteresis_db", &mut cfg.policy.hysteresis_db)?;
        s.get("ttt_min", &mut cfg.policy.ttt_min)?;
        s.get("abort_margin_db", &mut cfg.policy.abort_margin_db)?;
        s.get("abort_ttt_min", &mut cfg.policy.abort_ttt_min)?;
        s.finish()?;

        let mut s = Section::new(ini, "train");
        s.list("hidden_sizes", &mut cfg.hidden_sizes)?;
        s.get("learning_rate", &mut cfg.hyper.learning_rate)?;
        s.get("epochs", &mut cfg.hyper.epochs)?;
        s.get("bptt_window", &mut cfg.hyper.bptt_window)?;
        s.get("grad_clip", &mut cfg.hyper.grad_clip)?;
        s.get("beta1", &mut cfg.hyper.beta1)?;
        s.get("beta2", &mut cfg.hyper.beta2)?;
        s.get("epsilon", &mut cfg.hyper.epsilon)?;
        s.get("seed", &mut cfg.hyper.seed)?;
        s.finish()?;

        let mut s = Section::new(ini, "sweep");
        s.list("densities", &mut cfg.densities)?;
        s.list("speeds", &mut cfg.speeds)?;
        s.get("users_per_speed", &mut cfg.users_per_speed)?;
        s.get("days", &mut cfg.days)?;
        s.list("modes", &mut cfg.modes)?;
        s.list("seeds", &mut cfg.seeds)?;
        s.get("ho_window_min", &mut cfg.ho_window_min)?;
        s.get("match_window_min", &mut cfg.match_window_min)?;
        s.get("ideal_lookahead_min", &mut cfg.ideal_lookahead_min)?;
        s.get("p_fixed_w", &mut cfg.power.p_fixed_w)?;
        s.get("p_tx_w", &mut cfg.power.p_tx_w)?;
        s.get("out_dir", &mut cfg.out_dir)?;
        s.finish()?;

        cfg.validate()?;
        Ok(cfg)
    }

    /// INI text that parses back to `self`.
    pub fn to_ini_string(&self) -> String {
        fn list<T: Display>(v: &[T]) -> String {
            v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
        }
        let mut ini = Ini::new();
        ini.with_section(Some("map"))
            .set("width_m", self.map.width_m.to_string())
            .set("height_m", self.map.height_m.to_string())
            .set("n_hotspots", self.map.n_hotspots.to_string())
            .set("fractal_depth", self.map.fractal_depth.to_string())
            .set("sites_per_user", self.mobility.sites_per_user.to_string())
            .set("latp_exponent", self.mobility.latp_exponent.to_string())
            .set("pause_min_s", self.mobility.pause_min_s.to_string())
            .set("pause_max_s", self.mobility.pause_max_s.to_string())
            .set("pause_exponent", self.mobility.pause_exponent.to_string());
        ini.with_section(Some("radio"))
            .set("bandwidth_hz", self.radio.bandwidth_hz.to_string())
            .set("noise_w", self.radio.noise_w.to_string())
            .set("pathloss_exp", self.radio.pathloss_exp.to_string())
            .set("tx_power_w", self.radio.tx_power_w.to_string())
            .set("d_min_m", self.radio.d_min_m.to_string())
            .set("capacity_per_bs", self.capacity_per_bs.to_string());
        ini.with_section(Some("policy"))
            .set("hysteresis_db", self.policy.hysteresis_db.to_string())
            .set("ttt_min", self.policy.ttt_min.to_string())
            .set("abort_margin_db", self.policy.abort_margin_db.to_string())
            .set("abort_ttt_min", self.policy.abort_ttt_min.to_string());
        ini.with_section(Some("train"))
            .set("hidden_sizes", list(&self.hidden_sizes))
            .set("learning_rate", self.hyper.learning_rate.to_string())
            .set("epochs", self.hyper.epochs.to_string())
            .set("bptt_window", self.hyper.bptt_window.to_string())
            .set("grad_clip", self.hyper.grad_clip.to_string())
            .set("beta1", self.hyper.beta1.to_string())
            .set("beta2", self.hyper.beta2.to_string())
            .set("epsilon", self.hyper.epsilon.to_string())
            .set("seed", self.hyper.seed.to_string());
        ini.with_section(Some("sweep"))
            .set("densities", list(&self.densities))
            .set("speeds", list(&self.speeds))
            .set("users_per_speed", self.users_per_speed.to_string())
            .set("days", self.days.to_string())
            .set("modes", list(&self.modes))
            .set("seeds", list(&self.seeds))
            .set("ho_window_min", self.ho_window_min.to_string())
            .set("match_window_min", self.match_window_min.to_string())
            .set("ideal_lookahead_min", self.ideal_lookahead_min.to_string())
            .set("p_fixed_w", self.power.p_fixed_w.to_string())
            .set("p_tx_w", self.power.p_tx_w.to_string())
            .set("out_dir", self.out_dir.display().to_string());
        let mut buf = Vec::new();
        ini.write_to(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("ini output is UTF-8")
    }
}

/// Reads keys from one INI section, rejecting keys nobody asked for.
struct Section<'a> {
    name: &'static str,
    props: Option<&'a ini::Properties>,
    seen: BTreeSet<&'static str>,
}

impl<'a> Section<'a> {
    fn new(ini: &'a Ini, name: &'static str) -> Self {
        Self {
            name,
            props: ini.section(Some(name)),
            seen: BTreeSet::new(),
        }
    }

    fn raw(&mut self, key: &'static str) -> Option<&'a str> {
        self.seen.insert(key);
        self.props.and_then(|p| p.get(key))
    }

    fn get<T: FromStr>(&mut self, key: &'static str, dst: &mut T) -> Result<()> {
        if let Some(v) = self.raw(key) {
            *dst = v
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("[{}] {key}: cannot parse `{v}`", self.name)))?;
        }
        Ok(())
    }

    fn list<T: FromStr>(&mut self, key: &'static str, dst: &mut Vec<T>) -> Result<()> {
        if let Some(v) = self.raw(key) {
            *dst = v
                .split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(|s| {
                    s.parse()
                        .map_err(|_| Error::Config(format!("[{}] {key}: cannot parse `{s}`", self.name)))
                })
                .collect::<Result<_>>()?;
        }
        Ok(())
    }

    fn finish(self) -> Result<()> {
        if let Some(p) = self.props {
            for (k, _) in p.iter() {
                if !self.seen.contains(k) {
                    return Err(Error::Config(format!("[{}] unknown key `{k}`", self.name)));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ini_round_trip() {
        let mut cfg = SimConfig::desk();
        cfg.densities = vec![2.5, 40.0];
        cfg.modes = vec![Mode::IdealDual, Mode::Single];
        cfg.hidden_sizes = vec![16, 8];
        cfg.hyper.learning_rate = 1.5e-3;
        let back = SimConfig::from_ini_str(&cfg.to_ini_string()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn partial_file_keeps_defaults() {
        let cfg = SimConfig::from_ini_str("[sweep]\ndensities = 5, 10\nseeds = 7\n").unwrap();
        assert_eq!(cfg.densities, vec![5.0, 10.0]);
        assert_eq!(cfg.seeds, vec![7]);
        assert_eq!(cfg.speeds, SimConfig::default().speeds);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(SimConfig::from_ini_str("[sweep]\ndenisties = 5\n").is_err());
        assert!(SimConfig::from_ini_str("[mapp]\nwidth_m = 5\n").is_err());
        assert!(SimConfig::from_ini_str("[sweep]\ndays = 2\n").is_err());
        assert!(SimConfig::from_ini_str("[sweep]\nmodes = dual, quad\n").is_err());
        assert!(SimConfig::from_ini_str("[sweep]\nspeeds =\n").is_err());
        assert!(SimConfig::from_ini_str("[map]\nwidth_m = wide\n").is_err());
    }
}
