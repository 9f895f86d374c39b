//! Synthetic commute traces with planted ground truth.
//!
//! A simulated day is a [`DayPlan`]: a deterministic function from a local
//! timestamp to what the phone would sense at that second. Sampling the plan
//! on a fixed schedule gives the dataset trace; the duty-cycled sensing
//! runner samples the same plan at its own wake instants, so every sensed
//! record is a record of the full-rate (1 Hz) trace.
//!
//! Day timeline (noon-to-noon slice): away at work until the evening
//! departure, the homeward route (optionally interrupted by a detour just
//! before the home AP comes into range), the night at home, the reversed
//! route the next morning, then away again until the slice ends.

use std::io::Write;

use chrono::NaiveDate;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trace::{midnight, slice_bounds, AccelSample, ApObservation, Bssid, DayTrace, GpsFix, ScanRecord};

/// Scan cadence while moving or at the door.
pub const FAST_SCAN_S: i64 = 5;
/// Scan cadence while stationary away from the route.
pub const SLOW_SCAN_S: i64 = 60;
/// Length of the post-arrival window recorded at the fast cadence.
pub const ARRIVAL_WINDOW_S: i64 = 120;

const RAMP_FRACTION: f64 = 0.25;
const EDGE_DROP_DB: f64 = 20.0;
const HOME_RAMP_BASE_S: f64 = 30.0;
const DETOUR_LEAD_BASE_S: f64 = 20.0;
const GRAVITY: f64 = 9.81;

const DOOR_TRANSIENT_APS: u8 = 3;
const DOOR_DIP_DB: f64 = 8.0;
const DOOR_DIP_HALF_S: i64 = 5;
const DOOR_STILL_HALF_S: i64 = 2;
const SETTLE_S: i64 = 90;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ApPlacement {
    pub bssid: Bssid,
    pub enter_offset_s: f64,
    pub exit_offset_s: f64,
    pub peak_rssi_dbm: i32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransportMode {
    pub name: String,
    pub speed_factor: f64,
}

impl TransportMode {
    pub fn new(name: &str, speed_factor: f64) -> Self {
        TransportMode { name: name.to_string(), speed_factor }
    }

    pub fn walk() -> Self {
        Self::new("walk", 1.0)
    }

    pub fn cycle() -> Self {
        Self::new("cycle", 2.5)
    }
}

/// The homeward route. The home AP is one of `aps`; its exit offset is
/// ignored because its coverage persists once the user is home.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RouteSpec {
    pub aps: Vec<ApPlacement>,
    pub home_bssid: Bssid,
    pub home_fix: GpsFix,
    pub route_duration_s: f64,
    #[serde(default = "default_route_length")]
    pub route_length_m: f64,
}

fn default_route_length() -> f64 {
    1000.0
}

impl RouteSpec {
    /// Evenly staggered route: `n_aps` overlapping coverage intervals ending
    /// before the home AP, which comes into range 40 s before the door.
    pub fn generated(n_aps: u32, route_duration_s: f64, home_bssid: Bssid, home_fix: GpsFix, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let home_enter = route_duration_s - 40.0;
        let coverage = (route_duration_s * 0.135).round();
        let spacing = if n_aps > 1 {
            ((home_enter + 24.0 - coverage) / (n_aps - 1) as f64).floor()
        } else {
            0.0
        };
        let home_octets = home_bssid.octets();
        let mut aps: Vec<ApPlacement> = (0..n_aps)
            .map(|k| {
                let enter = spacing * k as f64;
                ApPlacement {
                    bssid: Bssid::from_octets([0x0a, home_octets[5], 0x52, 0, (k >> 8) as u8, k as u8]),
                    enter_offset_s: enter,
                    exit_offset_s: (enter + coverage).min(route_duration_s),
                    peak_rssi_dbm: rng.random_range(-80..=-45),
                }
            })
            .collect();
        aps.push(ApPlacement {
            bssid: home_bssid,
            enter_offset_s: home_enter,
            exit_offset_s: route_duration_s,
            peak_rssi_dbm: -45,
        });
        RouteSpec { aps, home_bssid, home_fix, route_duration_s, route_length_m: default_route_length() }
    }

    pub fn home_placement(&self) -> Option<&ApPlacement> {
        self.aps.iter().find(|ap| ap.bssid == self.home_bssid)
    }

    pub fn route_aps(&self) -> impl Iterator<Item = &ApPlacement> {
        self.aps.iter().filter(move |ap| ap.bssid != self.home_bssid)
    }

    pub fn validate(&self) -> Result<()> {
        let home = self
            .home_placement()
            .ok_or_else(|| Error::Config(format!("route has no placement for home ap {}", self.home_bssid)))?;
        if !(self.route_duration_s > 0.0) {
            return Err(Error::Config("route duration must be positive".into()));
        }
        if !(home.enter_offset_s > DETOUR_LEAD_BASE_S && home.enter_offset_s < self.route_duration_s) {
            return Err(Error::Config("home ap coverage must begin inside the route".into()));
        }
        self.home_fix.validate()?;
        let mut seen = std::collections::HashSet::new();
        for ap in &self.aps {
            if !seen.insert(ap.bssid) {
                return Err(Error::Config(format!("duplicate placement for {}", ap.bssid)));
            }
            if !(ap.enter_offset_s < ap.exit_offset_s) || ap.enter_offset_s < 0.0 {
                return Err(Error::Config(format!("ap {} needs 0 <= enter < exit", ap.bssid)));
            }
            if !(-90..=-30).contains(&ap.peak_rssi_dbm) {
                return Err(Error::Config(format!("ap {} peak rssi outside [-90, -30]", ap.bssid)));
            }
            if ap.bssid != self.home_bssid && ap.exit_offset_s > self.route_duration_s {
                return Err(Error::Config(format!("ap {} coverage runs past the route end", ap.bssid)));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightedMode {
    #[serde(flatten)]
    pub mode: TransportMode,
    pub weight: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModeSchedule {
    Fixed { mode: TransportMode },
    /// Mode `i % len` on day `i`.
    PerDay { modes: Vec<TransportMode> },
    Mixture { choices: Vec<WeightedMode> },
}

impl ModeSchedule {
    fn validate(&self) -> Result<()> {
        let modes: Vec<&TransportMode> = match self {
            ModeSchedule::Fixed { mode } => vec![mode],
            ModeSchedule::PerDay { modes } => modes.iter().collect(),
            ModeSchedule::Mixture { choices } => {
                if choices.iter().any(|c| !(c.weight >= 0.0)) || choices.iter().map(|c| c.weight).sum::<f64>() <= 0.0 {
                    return Err(Error::Config("mixture weights must be nonnegative with a positive sum".into()));
                }
                choices.iter().map(|c| &c.mode).collect()
            }
        };
        if modes.is_empty() {
            return Err(Error::Config("mode schedule is empty".into()));
        }
        if modes.iter().any(|m| !(m.speed_factor > 0.0)) {
            return Err(Error::Config("speed factors must be positive".into()));
        }
        Ok(())
    }

    fn pick(&self, day_index: u32, rng: &mut impl Rng) -> TransportMode {
        match self {
            ModeSchedule::Fixed { mode } => mode.clone(),
            ModeSchedule::PerDay { modes } => modes[day_index as usize % modes.len()].clone(),
            ModeSchedule::Mixture { choices } => {
                let total: f64 = choices.iter().map(|c| c.weight).sum();
                let mut x = rng.random::<f64>() * total;
                for c in choices {
                    if x < c.weight {
                        return c.mode.clone();
                    }
                    x -= c.weight;
                }
                choices.last().expect("validated nonempty").mode.clone()
            }
        }
    }
}

/// Home-side presence during the night: the home AP plus a few neighbor APs
/// that flicker in and out of range.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NightDwellSpec {
    pub neighbor_count: u8,
    pub neighbor_presence: f64,
    pub neighbor_rssi_dbm: i32,
}

impl Default for NightDwellSpec {
    fn default() -> Self {
        NightDwellSpec { neighbor_count: 3, neighbor_presence: 0.15, neighbor_rssi_dbm: -80 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseSpec {
    pub rssi_sigma_db: f64,
    pub dropout_prob: f64,
    /// Readings at or below this level are never reported.
    pub sensitivity_dbm: f64,
    /// Detection probability rises linearly from 0 at the sensitivity
    /// floor to 1 this many dB above it.
    pub fade_db: f64,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        NoiseSpec { rssi_sigma_db: 4.0, dropout_prob: 0.05, sensitivity_dbm: -95.0, fade_db: 10.0 }
    }
}

impl NoiseSpec {
    fn detect_prob(&self, rssi: f64) -> f64 {
        if self.fade_db <= 0.0 {
            return if rssi > self.sensitivity_dbm { 1.0 } else { 0.0 };
        }
        ((rssi - self.sensitivity_dbm) / self.fade_db).clamp(0.0, 1.0)
    }
}

/// Time-of-day and behavior settings shared by every simulated day.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DaySchedule {
    /// Seconds after midnight of the evening departure.
    pub depart_time_s: i64,
    pub depart_time_jitter_s: i64,
    /// Seconds after the following midnight of the morning departure.
    pub morning_depart_s: i64,
    /// Uniform multiplicative speed jitter, e.g. 0.05 for ±5%.
    pub speed_jitter: f64,
    pub door_delay_s: i64,
    pub connect_delay_s: i64,
    pub gps_available: bool,
    pub work_distance_m: f64,
    pub work_aps: u8,
}

impl Default for DaySchedule {
    fn default() -> Self {
        DaySchedule {
            depart_time_s: 18 * 3600,
            depart_time_jitter_s: 600,
            morning_depart_s: 8 * 3600,
            speed_jitter: 0.05,
            door_delay_s: 40,
            connect_delay_s: 60,
            gps_available: true,
            work_distance_m: 3000.0,
            work_aps: 2,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Relocation {
    /// Zero-based index of the first day spent at the new home.
    pub day: u32,
    pub route: RouteSpec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub start_date: NaiveDate,
    pub n_days: u32,
    pub route: RouteSpec,
    pub modes: ModeSchedule,
    #[serde(default)]
    pub detour_prob: f64,
    #[serde(default = "default_detour_duration")]
    pub detour_duration_s: i64,
    #[serde(default)]
    pub noise: NoiseSpec,
    #[serde(default)]
    pub schedule: DaySchedule,
    #[serde(default)]
    pub night_dwell: NightDwellSpec,
    #[serde(default)]
    pub relocation: Option<Relocation>,
}

fn default_detour_duration() -> i64 {
    300
}

fn prob_ok(p: f64) -> bool {
    (0.0..=1.0).contains(&p)
}

impl ScenarioSpec {
    /// Walk-only commute on a 15-AP, 600 s route.
    pub fn simple_walk(n_days: u32) -> Self {
        let home = Bssid::from_octets([0x5c, 0x63, 0xbf, 0x10, 0x20, 0x01]);
        let home_fix = GpsFix { lat_deg: 39.98, lon_deg: 116.34 };
        ScenarioSpec {
            start_date: NaiveDate::from_ymd_opt(2024, 1, 1).expect("valid date"),
            n_days,
            route: RouteSpec::generated(15, 600.0, home, home_fix, 11),
            modes: ModeSchedule::Fixed { mode: TransportMode::walk() },
            detour_prob: 0.0,
            detour_duration_s: default_detour_duration(),
            noise: NoiseSpec::default(),
            schedule: DaySchedule::default(),
            night_dwell: NightDwellSpec::default(),
            relocation: None,
        }
    }

    /// Walk/cycle 50/50 with a 20% chance of a detour before reaching home.
    pub fn walk_cycle_mixture(n_days: u32) -> Self {
        ScenarioSpec {
            modes: ModeSchedule::Mixture {
                choices: vec![
                    WeightedMode { mode: TransportMode::walk(), weight: 0.5 },
                    WeightedMode { mode: TransportMode::cycle(), weight: 0.5 },
                ],
            },
            detour_prob: 0.2,
            ..Self::simple_walk(n_days)
        }
    }

    /// Moves home on day `day` to a new home AP 2 km away with its own route.
    pub fn with_relocation(mut self, day: u32) -> Self {
        let old = &self.route;
        let mut octets = old.home_bssid.octets();
        octets[5] = octets[5].wrapping_add(0x40);
        let fix = old.home_fix.offset_north(2000.0);
        let route = RouteSpec::generated(15, old.route_duration_s, Bssid::from_octets(octets), fix, 23);
        self.relocation = Some(Relocation { day, route });
        self
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let spec: ScenarioSpec = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_days < 1 {
            return Err(Error::Config("n_days must be at least 1".into()));
        }
        for (name, p) in [
            ("detour_prob", self.detour_prob),
            ("dropout_prob", self.noise.dropout_prob),
            ("neighbor_presence", self.night_dwell.neighbor_presence),
        ] {
            if !prob_ok(p) {
                return Err(Error::Config(format!("{name} must lie in [0, 1]")));
            }
        }
        if self.detour_duration_s < 0 || self.detour_duration_s % FAST_SCAN_S != 0 {
            return Err(Error::Config(format!("detour_duration_s must be a nonnegative multiple of {FAST_SCAN_S}")));
        }
        if !(self.noise.rssi_sigma_db >= 0.0) {
            return Err(Error::Config("rssi_sigma_db must be nonnegative".into()));
        }
        let s = &self.schedule;
        if !(0.0..1.0).contains(&s.speed_jitter) || s.depart_time_jitter_s < 0 {
            return Err(Error::Config("jitter settings out of range".into()));
        }
        if s.depart_time_s < 12 * 3600 + s.depart_time_jitter_s + 3600
            || s.depart_time_s + s.depart_time_jitter_s > 20 * 3600
        {
            return Err(Error::Config("evening departure must fall between 13:00 and 20:00".into()));
        }
        if !(6 * 3600..=11 * 3600).contains(&s.morning_depart_s) {
            return Err(Error::Config("morning departure must fall between 06:00 and 11:00".into()));
        }
        if !(0..=ARRIVAL_WINDOW_S - 10).contains(&s.door_delay_s) || s.connect_delay_s < 0 {
            return Err(Error::Config("door/connection delays out of range".into()));
        }
        self.modes.validate()?;
        self.route.validate()?;
        if let Some(reloc) = &self.relocation {
            reloc.route.validate()?;
            if reloc.route.home_bssid == self.route.home_bssid {
                return Err(Error::Config("relocation must change the home ap".into()));
            }
        }
        Ok(())
    }

    pub fn route_for_day(&self, day_index: u32) -> &RouteSpec {
        match &self.relocation {
            Some(r) if day_index >= r.day => &r.route,
            _ => &self.route,
        }
    }

    /// Resolves the random choices of day `day_index` (seeded with
    /// `master_seed ^ day_index`) into a [`DayPlan`].
    pub fn plan_day(&self, day_index: u32, master_seed: u64) -> Result<DayPlan> {
        let day_seed = master_seed ^ u64::from(day_index);
        let mut rng = ChaCha8Rng::seed_from_u64(day_seed);
        let mode = self.modes.pick(day_index, &mut rng);
        let s = &self.schedule;
        let jitter = if s.speed_jitter > 0.0 { rng.random_range(-s.speed_jitter..=s.speed_jitter) } else { 0.0 };
        let slots = s.depart_time_jitter_s / FAST_SCAN_S;
        let depart_shift = if slots > 0 { rng.random_range(-slots..=slots) * FAST_SCAN_S } else { 0 };
        let morning_shift = if slots > 0 { rng.random_range(-slots..=slots) * FAST_SCAN_S } else { 0 };
        let detour = rng.random::<f64>() < self.detour_prob && self.detour_duration_s > 0;
        let day_id = self.start_date + chrono::Days::new(u64::from(day_index));
        let setup = DaySetup {
            day_id,
            speed_factor: mode.speed_factor * (1.0 + jitter),
            mode,
            depart_ts: midnight(day_id) + s.depart_time_s + depart_shift,
            morning_depart_ts: midnight(day_id) + 86_400 + s.morning_depart_s + morning_shift,
            detour_s: if detour { Some(self.detour_duration_s) } else { None },
        };
        DayPlan::new(self.route_for_day(day_index), &setup, &self.noise, s, &self.night_dwell, day_seed)
    }
}

/// Per-day resolved choices.
#[derive(Clone, Debug, PartialEq)]
pub struct DaySetup {
    pub day_id: NaiveDate,
    pub mode: TransportMode,
    /// Effective speed multiplier (mode factor with jitter applied).
    pub speed_factor: f64,
    pub depart_ts: i64,
    pub morning_depart_ts: i64,
    pub detour_s: Option<i64>,
}

impl DaySetup {
    /// 18:00 departure, 08:00 next-morning departure, no jitter, no detour.
    pub fn standard(day_id: NaiveDate, mode: &TransportMode) -> Self {
        DaySetup {
            day_id,
            mode: mode.clone(),
            speed_factor: mode.speed_factor,
            depart_ts: midnight(day_id) + 18 * 3600,
            morning_depart_ts: midnight(day_id) + 86_400 + 8 * 3600,
            detour_s: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub day_id: NaiveDate,
    pub arrival_ts: i64,
    pub door_ts: i64,
    pub mode: TransportMode,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Whereabouts {
    Away,
    /// On the route, `progress` in base-speed seconds from the route start.
    Route { progress: f64 },
    Detour,
    Home,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum ApRole {
    Route(usize),
    Home,
    Neighbor,
    Transient,
    Work,
    Venue,
}

/// A fully resolved simulated day.
#[derive(Clone, Debug)]
pub struct DayPlan {
    route: RouteSpec,
    pub setup: DaySetup,
    noise: NoiseSpec,
    night: NightDwellSpec,
    gps_available: bool,
    seed: u64,
    slice: (i64, i64),
    home_enter: f64,
    detour_start: i64,
    detour_end: i64,
    arrival_ts: i64,
    route_end_ts: f64,
    door_ts: i64,
    connect_ts: i64,
    morning_leg_end: f64,
    work_fix: GpsFix,
    aps: Vec<(Bssid, ApRole)>,
}

fn mix(seed: u64, salt: u64, ts: i64) -> u64 {
    // splitmix64 finalizer over the combined key
    let mut z = seed ^ salt.rotate_left(32) ^ (ts as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

const SCAN_SALT: u64 = 0x5ca9;
const ACCEL_SALT: u64 = 0xacce1;

impl DayPlan {
    pub fn new(
        route: &RouteSpec,
        setup: &DaySetup,
        noise: &NoiseSpec,
        schedule: &DaySchedule,
        night: &NightDwellSpec,
        seed: u64,
    ) -> Result<Self> {
        route.validate()?;
        if !(setup.speed_factor > 0.0) {
            return Err(Error::Config("speed factor must be positive".into()));
        }
        let home = route.home_placement().expect("validated");
        let speed = setup.speed_factor;
        let detour = setup.detour_s.unwrap_or(0);
        if detour % FAST_SCAN_S != 0 || detour < 0 {
            return Err(Error::Config("detour must be a nonnegative multiple of the scan period".into()));
        }
        let depart = setup.depart_ts;
        let detour_start = depart + ((home.enter_offset_s - DETOUR_LEAD_BASE_S) / speed).ceil() as i64;
        let detour_end = detour_start + detour;
        let home_start = home.enter_offset_s / speed;
        let arrival_ts = {
            let mut t = depart + detour;
            while ((t - depart - detour) as f64) < home_start {
                t += FAST_SCAN_S;
            }
            t
        };
        let route_end_ts = depart as f64 + detour as f64 + route.route_duration_s / speed;
        let morning_leg_end = setup.morning_depart_ts as f64 + route.route_duration_s / speed;
        let slice = slice_bounds(setup.day_id);
        if depart <= slice.0 || morning_leg_end >= slice.1 as f64 || route_end_ts >= setup.morning_depart_ts as f64 {
            return Err(Error::Config("day schedule does not fit inside one noon-to-noon slice".into()));
        }

        let h = route.home_bssid.octets();
        let mut aps: Vec<(Bssid, ApRole)> = Vec::new();
        for (i, ap) in route.aps.iter().enumerate() {
            let role = if ap.bssid == route.home_bssid { ApRole::Home } else { ApRole::Route(i) };
            aps.push((ap.bssid, role));
        }
        for k in 0..night.neighbor_count {
            aps.push((Bssid::from_octets([0x06, 0x4e, h[2], h[3], h[4], k]), ApRole::Neighbor));
        }
        for k in 0..DOOR_TRANSIENT_APS {
            aps.push((Bssid::from_octets([0x0e, 0x7a, h[2], h[3], h[4], k]), ApRole::Transient));
        }
        for k in 0..schedule.work_aps {
            aps.push((Bssid::from_octets([0x12, 0x3b, 0, 0, 0, k]), ApRole::Work));
        }
        for k in 0..2u8 {
            aps.push((Bssid::from_octets([0x16, 0x0d, 0, 0, 0, k]), ApRole::Venue));
        }

        Ok(DayPlan {
            route: route.clone(),
            setup: setup.clone(),
            noise: noise.clone(),
            night: night.clone(),
            gps_available: schedule.gps_available,
            seed,
            slice,
            home_enter: home.enter_offset_s,
            detour_start,
            detour_end,
            arrival_ts,
            route_end_ts,
            door_ts: arrival_ts + schedule.door_delay_s,
            connect_ts: arrival_ts + schedule.connect_delay_s,
            morning_leg_end,
            work_fix: route.home_fix.offset_north(schedule.work_distance_m),
            aps,
        })
    }

    pub fn home_bssid(&self) -> Bssid {
        self.route.home_bssid
    }

    pub fn home_fix(&self) -> GpsFix {
        self.route.home_fix
    }

    pub fn slice(&self) -> (i64, i64) {
        self.slice
    }

    pub fn arrival_ts(&self) -> i64 {
        self.arrival_ts
    }

    pub fn door_ts(&self) -> i64 {
        self.door_ts
    }

    pub fn ground_truth(&self) -> GroundTruth {
        GroundTruth {
            day_id: self.setup.day_id,
            arrival_ts: self.arrival_ts,
            door_ts: self.door_ts,
            mode: self.setup.mode.clone(),
        }
    }

    pub fn whereabouts(&self, ts: i64) -> Whereabouts {
        let t = ts as f64;
        let speed = self.setup.speed_factor;
        let depart = self.setup.depart_ts;
        let morning = self.setup.morning_depart_ts;
        if ts < depart {
            Whereabouts::Away
        } else if t < self.route_end_ts {
            if ts >= self.detour_start && ts < self.detour_end {
                return Whereabouts::Detour;
            }
            let shifted = if ts >= self.detour_end { ts - (self.detour_end - self.detour_start) } else { ts };
            Whereabouts::Route { progress: (shifted - depart) as f64 * speed }
        } else if ts < morning {
            Whereabouts::Home
        } else if t < self.morning_leg_end {
            Whereabouts::Route { progress: self.route.route_duration_s - (ts - morning) as f64 * speed }
        } else {
            Whereabouts::Away
        }
    }

    fn home_visible(&self, ts: i64, at: Whereabouts) -> bool {
        match at {
            Whereabouts::Home => true,
            Whereabouts::Route { progress } => {
                if ts < self.setup.morning_depart_ts {
                    let elapsed = (ts - self.setup.depart_ts - (self.detour_end - self.detour_start)) as f64;
                    ts >= self.arrival_ts || elapsed * self.setup.speed_factor >= self.home_enter
                } else {
                    progress >= self.home_enter
                }
            }
            _ => false,
        }
    }

    pub fn gps_at(&self, ts: i64) -> Option<GpsFix> {
        if !self.gps_available {
            return None;
        }
        match self.whereabouts(ts) {
            Whereabouts::Away => Some(self.work_fix),
            Whereabouts::Detour => Some(self.position_at(self.home_enter - DETOUR_LEAD_BASE_S).offset_north(150.0)),
            // indoors or in the stairwell near home, no fix
            Whereabouts::Route { progress } if progress >= self.home_enter => None,
            Whereabouts::Route { progress } => Some(self.position_at(progress)),
            Whereabouts::Home => None,
        }
    }

    pub fn gps_available(&self, ts: i64) -> bool {
        self.gps_at(ts).is_some()
    }

    fn position_at(&self, progress: f64) -> GpsFix {
        let remaining = (1.0 - progress / self.route.route_duration_s).clamp(0.0, 1.0);
        self.route.home_fix.offset_north(remaining * self.route.route_length_m)
    }

    pub fn connected_at(&self, ts: i64) -> Option<Bssid> {
        (self.whereabouts(ts) == Whereabouts::Home && ts >= self.connect_ts).then_some(self.route.home_bssid)
    }

    fn route_rssi(&self, ap: &ApPlacement, progress: f64) -> Option<f64> {
        if progress < ap.enter_offset_s || progress > ap.exit_offset_s {
            return None;
        }
        let u = (progress - ap.enter_offset_s) / (ap.exit_offset_s - ap.enter_offset_s);
        let shape = (u / RAMP_FRACTION).min((1.0 - u) / RAMP_FRACTION).min(1.0);
        Some(f64::from(ap.peak_rssi_dbm) - EDGE_DROP_DB * (1.0 - shape))
    }

    fn home_rssi(&self, ts: i64, at: Whereabouts) -> f64 {
        let home = self.route.home_placement().expect("validated");
        let ramp = match at {
            Whereabouts::Route { .. } if ts < self.setup.morning_depart_ts => {
                (((ts - self.arrival_ts) as f64 * self.setup.speed_factor) / HOME_RAMP_BASE_S).clamp(0.0, 1.0)
            }
            Whereabouts::Route { progress } => ((progress - self.home_enter) / HOME_RAMP_BASE_S).clamp(0.0, 1.0),
            _ => 1.0,
        };
        let mut rssi = f64::from(home.peak_rssi_dbm) - EDGE_DROP_DB * (1.0 - ramp);
        if (-DOOR_DIP_HALF_S..DOOR_DIP_HALF_S).contains(&(ts - self.door_ts)) {
            rssi -= DOOR_DIP_DB;
        }
        rssi
    }

    /// What a WiFi scan at `ts` returns. Pure in `(plan, ts)`.
    pub fn scan_at(&self, ts: i64) -> ScanRecord {
        let at = self.whereabouts(ts);
        let mut rng = ChaCha8Rng::seed_from_u64(mix(self.seed, SCAN_SALT, ts));
        let connected = self.connected_at(ts);
        let mut aps = Vec::new();
        for &(bssid, role) in &self.aps {
            // draw for every AP so one AP's visibility never shifts another's noise
            let z: f64 = StandardNormal.sample(&mut rng);
            let drop = rng.random::<f64>() < self.noise.dropout_prob;
            let detect: f64 = rng.random();
            let flicker = rng.random::<f64>();
            let clean = match role {
                ApRole::Route(i) => match at {
                    Whereabouts::Route { progress } => self.route_rssi(&self.route.aps[i], progress),
                    _ => None,
                },
                ApRole::Home => self.home_visible(ts, at).then(|| self.home_rssi(ts, at)),
                ApRole::Neighbor => (at == Whereabouts::Home && flicker < self.night.neighbor_presence)
                    .then_some(f64::from(self.night.neighbor_rssi_dbm)),
                ApRole::Transient => ((ts - self.door_ts).abs() <= DOOR_STILL_HALF_S).then_some(-72.0),
                ApRole::Work => (at == Whereabouts::Away).then_some(-55.0),
                ApRole::Venue => (at == Whereabouts::Detour).then_some(-60.0),
            };
            let Some(clean) = clean else { continue };
            let protected = Some(bssid) == connected || (role == ApRole::Home && ts == self.arrival_ts);
            if drop && !protected {
                continue;
            }
            let noisy = clean + self.noise.rssi_sigma_db * z;
            if detect >= self.noise.detect_prob(noisy) && !protected {
                continue;
            }
            let rssi = noisy.round().clamp(-120.0, 0.0) as i32;
            aps.push(ApObservation { bssid, rssi_dbm: rssi });
        }
        ScanRecord { ts, gps: self.gps_at(ts), connected, aps }
    }

    pub fn accel_at(&self, ts: i64) -> AccelSample {
        let mut rng = ChaCha8Rng::seed_from_u64(mix(self.seed, ACCEL_SALT, ts));
        let z: f64 = StandardNormal.sample(&mut rng);
        let sigma = match self.whereabouts(ts) {
            _ if (ts - self.door_ts).abs() <= DOOR_STILL_HALF_S => 0.05,
            Whereabouts::Route { .. } | Whereabouts::Detour => 3.0,
            Whereabouts::Home if ts <= self.door_ts + SETTLE_S => 3.0,
            Whereabouts::Home => 0.05,
            Whereabouts::Away => 0.3,
        };
        AccelSample { ts, magnitude_mps2: (GRAVITY + sigma * z).abs() }
    }

    /// Timestamps at which the dataset trace records a scan.
    pub fn sample_times(&self) -> Vec<i64> {
        let (start, end) = self.slice;
        let depart = self.setup.depart_ts;
        let fast_until = (self.route_end_ts.ceil() as i64).max(self.arrival_ts + ARRIVAL_WINDOW_S);
        let morning = self.setup.morning_depart_ts;
        let morning_end = self.morning_leg_end.ceil() as i64;
        let mut out = Vec::new();
        fn push_range(from: i64, to: i64, step: i64, out: &mut Vec<i64>) {
            out.extend((from..to).step_by(step as usize));
        }
        push_range(start, depart, SLOW_SCAN_S, &mut out);
        push_range(depart, fast_until + 1, FAST_SCAN_S, &mut out);
        let resume = *out.last().expect("nonempty") + SLOW_SCAN_S;
        push_range(resume, morning, SLOW_SCAN_S, &mut out);
        push_range(morning, morning_end + 1, FAST_SCAN_S, &mut out);
        let resume = *out.last().expect("nonempty") + SLOW_SCAN_S;
        push_range(resume, end, SLOW_SCAN_S, &mut out);
        out
    }

    /// The dataset trace: scans on [`sample_times`](Self::sample_times) and
    /// 1 Hz accelerometer samples through the post-arrival window.
    pub fn sample_trace(&self) -> DayTrace {
        let scans = self.sample_times().into_iter().map(|t| self.scan_at(t)).collect();
        let accel = (self.arrival_ts..self.arrival_ts + ARRIVAL_WINDOW_S).map(|t| self.accel_at(t)).collect();
        DayTrace { day_id: self.setup.day_id, scans, accel }
    }
}

/// One day on `route` at `mode`'s speed, with the standard schedule
/// (18:00 departure, no jitter, no detour) on 2024-01-01.
pub fn synth_day(route: &RouteSpec, mode: &TransportMode, noise: &NoiseSpec, seed: u64) -> Result<(DayTrace, GroundTruth)> {
    let day = NaiveDate::from_ymd_opt(2024, 1, 1).expect("valid date");
    let plan = DayPlan::new(
        route,
        &DaySetup::standard(day, mode),
        noise,
        &DaySchedule::default(),
        &NightDwellSpec::default(),
        seed,
    )?;
    Ok((plan.sample_trace(), plan.ground_truth()))
}

pub fn synth_dataset(scenario: &ScenarioSpec, seed: u64) -> Result<(Vec<DayTrace>, Vec<GroundTruth>)> {
    scenario.validate()?;
    let mut traces = Vec::with_capacity(scenario.n_days as usize);
    let mut truth = Vec::with_capacity(scenario.n_days as usize);
    for i in 0..scenario.n_days {
        let plan = scenario.plan_day(i, seed)?;
        traces.push(plan.sample_trace());
        truth.push(plan.ground_truth());
    }
    Ok((traces, truth))
}

pub fn write_ground_truth<'a>(w: impl Write, truth: impl IntoIterator<Item = &'a GroundTruth>) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["day_id", "arrival_ts", "door_ts", "mode"])?;
    for g in truth {
        out.write_record([g.day_id.to_string(), g.arrival_ts.to_string(), g.door_ts.to_string(), g.mode.name.clone()])?;
    }
    out.flush()?;
    Ok(())
}

/// Reads the ground-truth CSV. Speed factors are not part of the file, so
/// modes come back with a factor of 1.
pub fn read_ground_truth(r: impl std::io::Read) -> Result<Vec<GroundTruth>> {
    let mut rdr = csv::Reader::from_reader(r);
    let mut out = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        let row = row?;
        let bad = |m: &str| Error::Parse { line: i + 2, message: m.to_string() };
        if row.len() != 4 {
            return Err(bad("expected 4 columns"));
        }
        out.push(GroundTruth {
            day_id: row[0].parse().map_err(|_| bad("bad day_id"))?,
            arrival_ts: row[1].parse().map_err(|_| bad("bad arrival_ts"))?,
            door_ts: row[2].parse().map_err(|_| bad("bad door_ts"))?,
            mode: TransportMode::new(&row[3], 1.0),
        });
    }
    Ok(out)
}
