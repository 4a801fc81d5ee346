//! Cell deployment, propagation and per-link quality.

use rand::Rng;
use rand_distr::{Distribution, Poisson};

use crate::error::{Error, Result};
use crate::mobility::{MapSpec, Point, Trajectory};
use crate::seed::Stream;

#[derive(Clone, Debug, PartialEq)]
pub struct RadioConfig {
    pub bandwidth_hz: f64,
    pub noise_w: f64,
    pub pathloss_exp: f64,
    pub tx_power_w: f64,
    /// Distances below this are clamped before applying the path-loss law.
    pub d_min_m: f64,
}

impl Default for RadioConfig {
    fn default() -> Self {
        Self {
            bandwidth_hz: 1e7,
            noise_w: 1e-13,
            pathloss_exp: 4.0,
            tx_power_w: 0.25,
            d_min_m: 1.0,
        }
    }
}

impl RadioConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("bandwidth_hz", self.bandwidth_hz),
            ("noise_w", self.noise_w),
            ("tx_power_w", self.tx_power_w),
            ("d_min_m", self.d_min_m),
        ];
        for (name, v) in positive {
            if !(v > 0.0) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.pathloss_exp >= 2.0) {
            return Err(Error::Config(format!(
                "pathloss_exp must be at least 2, got {}",
                self.pathloss_exp
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BaseStation {
    pub id: usize,
    pub pos: Point,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Deployment {
    pub density_per_km2: f64,
    /// Station ids equal their index.
    pub stations: Vec<BaseStation>,
    pub capacity_per_bs: usize,
}

impl Deployment {
    pub fn from_positions(density_per_km2: f64, positions: &[Point], capacity_per_bs: usize) -> Self {
        Self {
            density_per_km2,
            stations: positions
                .iter()
                .enumerate()
                .map(|(id, &pos)| BaseStation { id, pos })
                .collect(),
            capacity_per_bs,
        }
    }

    pub fn len(&self) -> usize {
        self.stations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stations.is_empty()
    }

    pub fn position(&self, bs: usize) -> Point {
        self.stations[bs].pos
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinkStats {
    pub rss_w: f64,
    pub snr: f64,
    pub ber: f64,
    pub rate_bps: f64,
}

/// Homogeneous Poisson point process on the map. A zero count is redrawn.
pub fn deploy_ppp(map: &MapSpec, density_per_km2: f64, capacity_per_bs: usize, rng: &mut Stream) -> Deployment {
    let mean = density_per_km2 * map.area_km2();
    let poisson = Poisson::new(mean).expect("positive Poisson mean");
    let count = loop {
        let n = poisson.sample(rng) as usize;
        if n > 0 {
            break n;
        }
    };
    let positions: Vec<Point> = (0..count)
        .map(|_| {
            Point::new(
                rng.random::<f64>() * map.width_m,
                rng.random::<f64>() * map.height_m,
            )
        })
        .collect();
    Deployment::from_positions(density_per_km2, &positions, capacity_per_bs)
}

/// Received power `P_tx * max(d, d_min)^(-alpha)`.
pub fn rss(cfg: &RadioConfig, bs: Point, ue: Point) -> f64 {
    let d = bs.distance(ue).max(cfg.d_min_m);
    cfg.tx_power_w * d.powf(-cfg.pathloss_exp)
}

pub fn snr(cfg: &RadioConfig, rss_w: f64) -> f64 {
    rss_w / cfg.noise_w
}

/// Gaussian tail probability `Q(x)`.
pub fn q_function(x: f64) -> f64 {
    0.5 * libm::erfc(x / std::f64::consts::SQRT_2)
}

/// Coherent BPSK over AWGN: `Q(sqrt(2 snr))`.
pub fn bpsk_ber(snr: f64) -> f64 {
    q_function((2.0 * snr.max(0.0)).sqrt())
}

/// Shannon rate `B log2(1 + snr)`.
pub fn link_rate(cfg: &RadioConfig, snr: f64) -> f64 {
    cfg.bandwidth_hz * snr.max(0.0).ln_1p() / std::f64::consts::LN_2
}

pub fn link_stats(cfg: &RadioConfig, bs: Point, ue: Point) -> LinkStats {
    stats_from_rss(cfg, rss(cfg, bs, ue))
}

pub fn stats_from_rss(cfg: &RadioConfig, rss_w: f64) -> LinkStats {
    let s = snr(cfg, rss_w);
    LinkStats {
        rss_w,
        snr: s,
        ber: bpsk_ber(s),
        rate_bps: link_rate(cfg, s),
    }
}

/// Strongest station at `ue`; ties go to the lowest id.
pub fn best_bs(deployment: &Deployment, cfg: &RadioConfig, ue: Point) -> usize {
    let mut best = 0;
    let mut best_rss = f64::NEG_INFINITY;
    for bs in &deployment.stations {
        let r = rss(cfg, bs.pos, ue);
        if r > best_rss {
            best = bs.id;
            best_rss = r;
        }
    }
    best
}

/// 10 log10 of `a / b`.
pub fn ratio_db(a: f64, b: f64) -> f64 {
    10.0 * (a / b).log10()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct HoEvent {
    pub minute: usize,
    pub from_bs: usize,
    pub to_bs: usize,
}

/// Ground-truth handovers: every sample whose best station differs from the
/// previous sample's.
pub fn actual_ho_events(trajectory: &Trajectory, deployment: &Deployment, cfg: &RadioConfig) -> Vec<HoEvent> {
    let serving: Vec<usize> = trajectory
        .samples
        .iter()
        .map(|p| best_bs(deployment, cfg, *p))
        .collect();
    serving
        .windows(2)
        .enumerate()
        .filter(|(_, w)| w[0] != w[1])
        .map(|(i, w)| HoEvent {
            minute: i + 1,
            from_bs: w[0],
            to_bs: w[1],
        })
        .collect()
}

/// Both links must fail for a dual-connected bit to be in error.
pub fn dual_ber(ber_serving: f64, ber_target: f64) -> f64 {
    ber_serving * ber_target
}

pub fn dual_rate(rate_serving: f64, rate_target: f64) -> f64 {
    rate_serving + rate_target
}
