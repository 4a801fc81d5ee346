//! Synthetic human-mobility traces.
//!
//! Hotspots are placed on a fractal (recursively subdivided) map, each user
//! owns a bounded set of nearby hotspots, trips between them follow the
//! least-action trip planning rule and pauses are heavy-tailed. The
//! continuous itinerary is sampled once per minute.

use rand::Rng;
use rand_distr::{Distribution, Gamma};

use crate::error::{Error, Result};
use crate::seed::{self, Stream};

/// Samples per simulated day (12 hours at one-minute granularity).
pub const MINUTES_PER_DAY: usize = 720;
/// Seconds between consecutive samples.
pub const SAMPLE_PERIOD_S: f64 = 60.0;

/// Concentration of the symmetric Dirichlet draw used for quadrant weights.
/// Larger values spread hotspot mass more evenly across quadrants.
const QUADRANT_CONCENTRATION: f64 = 5.0;

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn lerp(self, other: Point, t: f64) -> Point {
        Point::new(
            self.x + (other.x - self.x) * t,
            self.y + (other.y - self.y) * t,
        )
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MapSpec {
    pub width_m: f64,
    pub height_m: f64,
    pub n_hotspots: usize,
    pub fractal_depth: u32,
}

impl Default for MapSpec {
    fn default() -> Self {
        Self {
            width_m: 4000.0,
            height_m: 4000.0,
            n_hotspots: 200,
            fractal_depth: 4,
        }
    }
}

impl MapSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.width_m > 0.0 && self.height_m > 0.0) {
            return Err(Error::Config(format!(
                "map extents must be positive, got {}x{}",
                self.width_m, self.height_m
            )));
        }
        if self.n_hotspots == 0 {
            return Err(Error::Config("n_hotspots must be at least 1".into()));
        }
        Ok(())
    }

    pub fn area_km2(&self) -> f64 {
        self.width_m * self.height_m / 1e6
    }

    pub fn contains(&self, p: Point) -> bool {
        (0.0..=self.width_m).contains(&p.x) && (0.0..=self.height_m).contains(&p.y)
    }

    pub fn clamp(&self, p: Point) -> Point {
        Point::new(p.x.clamp(0.0, self.width_m), p.y.clamp(0.0, self.height_m))
    }

    pub fn center(&self) -> Point {
        Point::new(self.width_m / 2.0, self.height_m / 2.0)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct UserProfile {
    pub user_id: u32,
    pub speed_mps: f64,
    /// Hotspot indices owned by the user; the first entry is the anchor.
    pub site_ids: Vec<usize>,
    pub pause_min_s: f64,
    pub pause_max_s: f64,
    pub pause_exponent: f64,
    pub latp_exponent: f64,
}

impl UserProfile {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::Config(format!("user {}: {what}", self.user_id)));
        if !(self.speed_mps > 0.0) {
            return bad("speed must be positive");
        }
        if self.site_ids.len() < 2 {
            return bad("at least two sites required");
        }
        if !(self.pause_min_s > 0.0 && self.pause_min_s < self.pause_max_s) {
            return bad("pause bounds must satisfy 0 < min < max");
        }
        if !(self.pause_exponent > 0.0) {
            return bad("pause exponent must be positive");
        }
        if !(self.latp_exponent > 0.0) {
            return bad("LATP exponent must be positive");
        }
        Ok(())
    }

    pub fn anchor(&self) -> usize {
        self.site_ids[0]
    }
}

/// One user's positions over one day; `samples[m]` is the position at minute `m`.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub user_id: u32,
    pub day: u32,
    pub samples: Vec<Point>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Places `n_hotspots` points by recursive quadrant subdivision.
///
/// Each subdivision level splits every cell into four quadrants whose relative
/// weights come from a symmetric Dirichlet draw; a leaf cell's weight is the
/// product along its path. Hotspots pick a leaf by weight and land uniformly
/// inside it. Depth zero degenerates to uniform placement over the map.
pub fn generate_hotspots(map: &MapSpec, rng: &mut Stream) -> Vec<Point> {
    let side = 1usize << map.fractal_depth;
    let mut weights = vec![1.0f64; 1];
    let gamma = Gamma::new(QUADRANT_CONCENTRATION, 1.0).expect("valid gamma");
    for level in 0..map.fractal_depth {
        let cur = 1usize << level;
        let next = cur * 2;
        let mut refined = vec![0.0; next * next];
        for cy in 0..cur {
            for cx in 0..cur {
                let mut q = [0.0f64; 4];
                for w in q.iter_mut() {
                    // Guard against an all-zero draw from tiny gamma samples.
                    *w = gamma.sample(rng).max(1e-300);
                }
                let total: f64 = q.iter().sum();
                let parent = weights[cy * cur + cx];
                for (k, w) in q.iter().enumerate() {
                    let (dx, dy) = (k % 2, k / 2);
                    refined[(2 * cy + dy) * next + 2 * cx + dx] = parent * w / total;
                }
            }
        }
        weights = refined;
    }

    let cumulative: Vec<f64> = weights
        .iter()
        .scan(0.0, |acc, w| {
            *acc += w;
            Some(*acc)
        })
        .collect();
    let total = *cumulative.last().unwrap();
    let cell_w = map.width_m / side as f64;
    let cell_h = map.height_m / side as f64;

    (0..map.n_hotspots)
        .map(|_| {
            let u = rng.random::<f64>() * total;
            let idx = cumulative.partition_point(|&c| c <= u).min(weights.len() - 1);
            let (cx, cy) = (idx % side, idx / side);
            Point::new(
                (cx as f64 + rng.random::<f64>()) * cell_w,
                (cy as f64 + rng.random::<f64>()) * cell_h,
            )
        })
        .collect()
}

/// Normalized inverse-power weights `d^(-a) / sum d^(-a)`.
///
/// When some candidates sit at zero distance the mass collapses onto the
/// first of them (lowest position in `candidates`).
pub fn inverse_power_weights(origin: Point, candidates: &[Point], exponent: f64) -> Vec<f64> {
    let mut w = vec![0.0; candidates.len()];
    if let Some(zero) = candidates.iter().position(|p| origin.distance(*p) == 0.0) {
        w[zero] = 1.0;
        return w;
    }
    for (wi, p) in w.iter_mut().zip(candidates) {
        *wi = origin.distance(*p).powf(-exponent);
    }
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= total);
    w
}

fn pick_weighted(weights: &[f64], rng: &mut Stream) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return i;
        }
    }
    // Rounding left the draw just above the cumulative total.
    weights.iter().rposition(|&w| w > 0.0).unwrap_or(0)
}

/// Chooses a user's `k` sites: a uniform anchor, then `k - 1` further
/// hotspots drawn without replacement with probability proportional to
/// `distance(anchor, h)^(-latp_exponent)`. The anchor is returned first.
pub fn assign_user_sites(
    hotspots: &[Point],
    k: usize,
    latp_exponent: f64,
    rng: &mut Stream,
) -> Result<Vec<usize>> {
    if k == 0 || k > hotspots.len() {
        return Err(Error::Config(format!(
            "cannot assign {k} sites from {} hotspots",
            hotspots.len()
        )));
    }
    let anchor = rng.random_range(0..hotspots.len());
    let mut chosen = vec![anchor];
    let mut remaining: Vec<usize> = (0..hotspots.len()).filter(|&i| i != anchor).collect();
    while chosen.len() < k {
        let pts: Vec<Point> = remaining.iter().map(|&i| hotspots[i]).collect();
        let w = inverse_power_weights(hotspots[anchor], &pts, latp_exponent);
        let pick = pick_weighted(&w, rng);
        chosen.push(remaining.remove(pick));
    }
    Ok(chosen)
}

/// Least-action trip planning: the next waypoint among `unvisited`
/// (ascending site ids) with probability proportional to `d^(-a)`.
pub fn latp_next_waypoint(
    current: Point,
    unvisited: &[(usize, Point)],
    latp_exponent: f64,
    rng: &mut Stream,
) -> usize {
    assert!(!unvisited.is_empty(), "no waypoint left to visit");
    if unvisited.len() == 1 {
        return unvisited[0].0;
    }
    let pts: Vec<Point> = unvisited.iter().map(|(_, p)| *p).collect();
    let w = inverse_power_weights(current, &pts, latp_exponent);
    unvisited[pick_weighted(&w, rng)].0
}

/// Truncated-Pareto pause duration by inverse CDF.
pub fn sample_pause(profile: &UserProfile, rng: &mut Stream) -> f64 {
    let (lo, hi, a) = (profile.pause_min_s, profile.pause_max_s, profile.pause_exponent);
    let u: f64 = rng.random();
    let tail = (lo / hi).powf(a);
    let x = lo / (1.0 - u * (1.0 - tail)).powf(1.0 / a);
    x.clamp(lo, hi)
}

/// A piece of a day's continuous itinerary.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Leg {
    Pause { at: Point, duration_s: f64 },
    Move { from: Point, to: Point },
}

/// The continuous movement plan for one day, starting at the anchor.
#[derive(Clone, Debug)]
pub struct Itinerary {
    pub speed_mps: f64,
    pub legs: Vec<Leg>,
}

impl Itinerary {
    fn leg_duration(&self, leg: &Leg) -> f64 {
        match *leg {
            Leg::Pause { duration_s, .. } => duration_s,
            Leg::Move { from, to } => from.distance(to) / self.speed_mps,
        }
    }

    /// Position at time `t_s` seconds after the day starts.
    pub fn position_at(&self, t_s: f64) -> Point {
        let mut elapsed = 0.0;
        let mut last = Point::default();
        for leg in &self.legs {
            let d = self.leg_duration(leg);
            match *leg {
                Leg::Pause { at, .. } => {
                    if t_s < elapsed + d {
                        return at;
                    }
                    last = at;
                }
                Leg::Move { from, to } => {
                    if t_s < elapsed + d {
                        return from.lerp(to, (t_s - elapsed) / d);
                    }
                    last = to;
                }
            }
            elapsed += d;
        }
        last
    }

    /// Distance travelled along the itinerary during `[0, t_s]`.
    pub fn path_length_until(&self, t_s: f64) -> f64 {
        let mut elapsed = 0.0;
        let mut length = 0.0;
        for leg in &self.legs {
            if elapsed >= t_s {
                break;
            }
            let d = self.leg_duration(leg);
            if let Leg::Move { from, to } = *leg {
                let frac = ((t_s - elapsed) / d).min(1.0);
                length += from.distance(to) * frac;
            }
            elapsed += d;
        }
        length
    }

    pub fn duration_s(&self) -> f64 {
        self.legs.iter().map(|l| self.leg_duration(l)).sum()
    }
}

/// Plans one day: pause at the anchor, then alternate LATP trips and pauses
/// until the day is covered. Once every site has been visited the unvisited
/// set is refilled with all sites except the current one.
pub fn plan_day(profile: &UserProfile, hotspots: &[Point], rng: &mut Stream) -> Itinerary {
    let horizon = MINUTES_PER_DAY as f64 * SAMPLE_PERIOD_S;
    let mut sites = profile.site_ids.clone();
    sites.sort_unstable();
    let mut current = profile.anchor();
    let mut unvisited: Vec<usize> = sites.iter().copied().filter(|&s| s != current).collect();
    let mut itinerary = Itinerary {
        speed_mps: profile.speed_mps,
        legs: Vec::new(),
    };
    let mut elapsed = 0.0;
    loop {
        let pause = sample_pause(profile, rng);
        itinerary.legs.push(Leg::Pause {
            at: hotspots[current],
            duration_s: pause,
        });
        elapsed += pause;
        if elapsed >= horizon {
            break;
        }
        if unvisited.is_empty() {
            unvisited = sites.iter().copied().filter(|&s| s != current).collect();
        }
        let candidates: Vec<(usize, Point)> = unvisited.iter().map(|&s| (s, hotspots[s])).collect();
        let next = latp_next_waypoint(hotspots[current], &candidates, profile.latp_exponent, rng);
        unvisited.retain(|&s| s != next);
        let (from, to) = (hotspots[current], hotspots[next]);
        itinerary.legs.push(Leg::Move { from, to });
        elapsed += from.distance(to) / profile.speed_mps;
        current = next;
        if elapsed >= horizon {
            break;
        }
    }
    itinerary
}

/// Samples an itinerary on the minute grid.
pub fn sample_itinerary(itinerary: &Itinerary, map: &MapSpec) -> Vec<Point> {
    (0..MINUTES_PER_DAY)
        .map(|m| map.clamp(itinerary.position_at(m as f64 * SAMPLE_PERIOD_S)))
        .collect()
}

/// Generates `days` trajectories for one user. Day `d` draws from the stream
/// keyed by `(master_seed, user_id, d)` so any day can be regenerated alone.
pub fn generate_trajectory(
    profile: &UserProfile,
    map: &MapSpec,
    hotspots: &[Point],
    days: u32,
    master_seed: u64,
) -> Vec<Trajectory> {
    (0..days)
        .map(|day| {
            let mut rng = day_stream(master_seed, profile.user_id, day);
            let itinerary = plan_day(profile, hotspots, &mut rng);
            Trajectory {
                user_id: profile.user_id,
                day,
                samples: sample_itinerary(&itinerary, map),
            }
        })
        .collect()
}

pub fn day_stream(master_seed: u64, user_id: u32, day: u32) -> Stream {
    seed::stream(master_seed, "trace", &[u64::from(user_id), u64::from(day)])
}
