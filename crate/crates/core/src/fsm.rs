//! Duty-cycled sensing.
//!
//! Away from home the phone wakes once a minute. Inside the 500 m geofence
//! around home it scans WiFi every five seconds. Once the home AP shows up
//! the accelerometer runs for two minutes; after the connection to the home
//! AP is stable the phone records for five minutes and then sleeps, waking
//! every half hour. Losing the home connection drops back to the idle check.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::simulator::DayPlan;
use crate::trace::{haversine_m, AccelSample, Bssid, DayTrace, GpsFix, ScanRecord};

pub const GEOFENCE_RADIUS_M: f64 = 500.0;
pub const IDLE_PERIOD_S: i64 = 60;
pub const REGION_SCAN_PERIOD_S: i64 = 5;
pub const ARRIVAL_ACCEL_S: i64 = 120;
pub const CONNECTED_RECORD_S: i64 = 300;
pub const CONNECTED_SCAN_PERIOD_S: i64 = 60;
pub const SLEEP_PERIOD_S: i64 = 1800;
/// Consecutive connected scans that make a connection stable.
pub const STABLE_SCANS: u32 = 3;
/// Without a GPS fix to say the user left, region scanning gives up after this.
pub const REGION_TIMEOUT_S: i64 = 1800;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FsmTag {
    IdleCheck,
    GpsRegionScan,
    HomeArrival,
    Connected,
    Sleep,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FsmState {
    pub tag: FsmTag,
    pub entered_at: i64,
    /// Consecutive scans connected to the home AP.
    pub connected_streak: u32,
}

impl FsmState {
    pub fn idle(now: i64) -> Self {
        FsmState { tag: FsmTag::IdleCheck, entered_at: now, connected_streak: 0 }
    }

    fn enter(tag: FsmTag, now: i64) -> Self {
        FsmState { tag, entered_at: now, connected_streak: 0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Action {
    ScanWifi,
    ReadGps,
    /// Sample the accelerometer at 1 Hz until the next wake.
    SampleAccel,
}

/// What the phone knows at a wake-up. `fix` and `scanned` are only filled
/// when the corresponding sensor was read at this wake.
#[derive(Clone, Debug, PartialEq)]
pub struct Env {
    pub gps_available: bool,
    pub fix: Option<GpsFix>,
    pub scanned: Option<BTreeSet<Bssid>>,
    pub connected: Option<Bssid>,
    pub home_bssid: Bssid,
    pub home_fix: GpsFix,
}

impl Env {
    fn sees_home(&self) -> bool {
        self.scanned.as_ref().is_some_and(|s| s.contains(&self.home_bssid))
    }

    fn home_connected(&self) -> bool {
        self.connected == Some(self.home_bssid)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Step {
    pub state: FsmState,
    /// Sensors to run at `next_wake`; [`Action::SampleAccel`] covers the
    /// interval from now until then.
    pub actions: BTreeSet<Action>,
    pub next_wake: i64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SensingStats {
    pub wifi_scans: u64,
    pub gps_reads: u64,
    pub accel_samples: u64,
    pub wakeups: u64,
}

/// Inclusive 500 m geofence.
pub fn in_gps_region(fix: &GpsFix, home_fix: &GpsFix) -> bool {
    haversine_m(fix, home_fix) <= GEOFENCE_RADIUS_M
}

fn actions(list: &[Action], gps: bool) -> BTreeSet<Action> {
    list.iter().copied().filter(|a| gps || *a != Action::ReadGps).collect()
}

pub fn fsm_step(state: FsmState, now: i64, env: &Env) -> Step {
    use Action::*;
    use FsmTag::*;
    let gps = env.gps_available;
    let in_region = env.fix.as_ref().map(|f| in_gps_region(f, &env.home_fix));
    let streak = if env.home_connected() { state.connected_streak + 1 } else { 0 };
    let idle = || Step { state: FsmState::idle(now), actions: actions(&[ScanWifi, ReadGps], gps), next_wake: now + IDLE_PERIOD_S };
    let arrival = || Step {
        state: FsmState { tag: HomeArrival, entered_at: now, connected_streak: streak },
        actions: actions(&[ScanWifi, SampleAccel], gps),
        next_wake: now + REGION_SCAN_PERIOD_S,
    };
    let region = |st: FsmState| Step { state: st, actions: actions(&[ScanWifi, ReadGps], gps), next_wake: now + REGION_SCAN_PERIOD_S };

    match state.tag {
        IdleCheck => {
            if env.sees_home() {
                arrival()
            } else if in_region == Some(true) {
                region(FsmState::enter(GpsRegionScan, now))
            } else {
                Step { state, actions: actions(&[ScanWifi, ReadGps], gps), next_wake: now + IDLE_PERIOD_S }
            }
        }
        GpsRegionScan => {
            if env.sees_home() {
                arrival()
            } else if in_region == Some(false) || now - state.entered_at >= REGION_TIMEOUT_S {
                idle()
            } else {
                region(state)
            }
        }
        HomeArrival => {
            let elapsed = now - state.entered_at;
            if elapsed >= ARRIVAL_ACCEL_S {
                if streak >= STABLE_SCANS {
                    return Step {
                        state: FsmState { tag: Connected, entered_at: now, connected_streak: streak },
                        actions: actions(&[ScanWifi], gps),
                        next_wake: now + CONNECTED_SCAN_PERIOD_S,
                    };
                }
                if !env.sees_home() {
                    return idle();
                }
            }
            let mut acts = actions(&[ScanWifi], gps);
            if elapsed + REGION_SCAN_PERIOD_S <= ARRIVAL_ACCEL_S {
                acts.insert(SampleAccel);
            }
            Step { state: FsmState { connected_streak: streak, ..state }, actions: acts, next_wake: now + REGION_SCAN_PERIOD_S }
        }
        Connected => {
            if !env.home_connected() {
                idle()
            } else if now - state.entered_at >= CONNECTED_RECORD_S {
                Step { state: FsmState::enter(Sleep, now), actions: actions(&[ScanWifi], gps), next_wake: now + SLEEP_PERIOD_S }
            } else {
                Step { state, actions: actions(&[ScanWifi], gps), next_wake: now + CONNECTED_SCAN_PERIOD_S }
            }
        }
        Sleep => {
            if env.home_connected() {
                Step { state, actions: actions(&[ScanWifi], gps), next_wake: now + SLEEP_PERIOD_S }
            } else {
                idle()
            }
        }
    }
}

/// Anything that can answer sensor queries at any second of a day.
pub trait SensorOracle {
    fn span(&self) -> (i64, i64);
    fn home_bssid(&self) -> Bssid;
    fn home_fix(&self) -> GpsFix;
    fn gps_available(&self, ts: i64) -> bool;
    fn scan(&self, ts: i64) -> ScanRecord;
    fn accel(&self, ts: i64) -> AccelSample;
    fn connected(&self, ts: i64) -> Option<Bssid>;
}

impl SensorOracle for DayPlan {
    fn span(&self) -> (i64, i64) {
        self.slice()
    }
    fn home_bssid(&self) -> Bssid {
        DayPlan::home_bssid(self)
    }
    fn home_fix(&self) -> GpsFix {
        DayPlan::home_fix(self)
    }
    fn gps_available(&self, ts: i64) -> bool {
        DayPlan::gps_available(self, ts)
    }
    fn scan(&self, ts: i64) -> ScanRecord {
        self.scan_at(ts)
    }
    fn accel(&self, ts: i64) -> AccelSample {
        self.accel_at(ts)
    }
    fn connected(&self, ts: i64) -> Option<Bssid> {
        self.connected_at(ts)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FsmRun {
    pub trace: DayTrace,
    pub stats: SensingStats,
    /// `(state, entered_at)` for every state change, in order.
    pub transitions: Vec<(FsmTag, i64)>,
}

/// Drives [`fsm_step`] across the oracle's span. `seed` sets the phase of the
/// first wake within the idle period.
pub fn run_fsm_day(oracle: &impl SensorOracle, seed: u64) -> FsmRun {
    let (start, end) = oracle.span();
    let home_bssid = oracle.home_bssid();
    let home_fix = oracle.home_fix();
    let mut now = start + (seed % IDLE_PERIOD_S as u64) as i64;
    let mut state = FsmState::idle(now);
    let mut pending = actions(&[Action::ScanWifi, Action::ReadGps], oracle.gps_available(now));
    let mut stats = SensingStats::default();
    let mut scans = Vec::new();
    let mut accel = Vec::new();
    let mut transitions = vec![(state.tag, now)];

    while now < end {
        stats.wakeups += 1;
        let gps_available = oracle.gps_available(now);
        let mut record = None;
        if pending.contains(&Action::ScanWifi) {
            stats.wifi_scans += 1;
            record = Some(oracle.scan(now));
        }
        let fix = if pending.contains(&Action::ReadGps) && gps_available {
            stats.gps_reads += 1;
            record.as_ref().and_then(|r| r.gps).or_else(|| oracle.scan(now).gps)
        } else {
            None
        };
        let env = Env {
            gps_available,
            fix,
            scanned: record.as_ref().map(|r| r.aps.iter().map(|a| a.bssid).collect()),
            connected: oracle.connected(now),
            home_bssid,
            home_fix,
        };
        if let Some(mut r) = record {
            if fix.is_none() {
                r.gps = None;
            }
            scans.push(r);
        }
        let step = fsm_step(state, now, &env);
        debug_assert!(step.next_wake > now);
        if step.actions.contains(&Action::SampleAccel) {
            for t in now..step.next_wake.min(end) {
                accel.push(oracle.accel(t));
                stats.accel_samples += 1;
            }
        }
        if step.state.tag != state.tag {
            transitions.push((step.state.tag, now));
        }
        state = step.state;
        pending = step.actions;
        now = step.next_wake;
    }
    let day_id = crate::trace::day_of(start);
    FsmRun { trace: DayTrace { day_id, scans, accel }, stats, transitions }
}

/// WiFi scans a fixed-cadence sampler would take over the same span.
pub fn fixed_cadence_scans(oracle: &impl SensorOracle, period_s: i64) -> u64 {
    let (start, end) = oracle.span();
    ((end - start + period_s - 1) / period_s) as u64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulator::ScenarioSpec;

    fn home() -> Bssid {
        Bssid::from_octets([2, 0, 0, 0, 0, 1])
    }

    fn home_fix() -> GpsFix {
        GpsFix { lat_deg: 0.0, lon_deg: 0.0 }
    }

    fn env(fix: Option<GpsFix>, scanned: &[Bssid], connected: bool) -> Env {
        Env {
            gps_available: fix.is_some(),
            fix,
            scanned: Some(scanned.iter().copied().collect()),
            connected: connected.then_some(home()),
            home_bssid: home(),
            home_fix: home_fix(),
        }
    }

    #[test]
    fn geofence_is_inclusive() {
        assert!(in_gps_region(&home_fix(), &home_fix()));
        assert!(!in_gps_region(&GpsFix { lat_deg: 0.01, lon_deg: 0.0 }, &home_fix()));
        let edge = home_fix().offset_north(GEOFENCE_RADIUS_M);
        let d = haversine_m(&edge, &home_fix());
        assert!((d - GEOFENCE_RADIUS_M).abs() < 1e-6);
        // step to the representable point on or just inside the circle
        let on = if d <= GEOFENCE_RADIUS_M { edge } else { GpsFix { lat_deg: edge.lat_deg - 1e-12, ..edge } };
        assert!(in_gps_region(&on, &home_fix()));
    }

    #[test]
    fn idle_outside_region_waits_a_minute() {
        let far = GpsFix { lat_deg: 0.05, lon_deg: 0.0 };
        let s = fsm_step(FsmState::idle(0), 100, &env(Some(far), &[], false));
        assert_eq!(s.state.tag, FsmTag::IdleCheck);
        assert_eq!(s.next_wake, 160);
        assert!(s.actions.contains(&Action::ReadGps));
    }

    #[test]
    fn idle_entering_region_scans_every_five_seconds() {
        let near = GpsFix { lat_deg: 0.003, lon_deg: 0.0 };
        let s = fsm_step(FsmState::idle(0), 100, &env(Some(near), &[], false));
        assert_eq!(s.state.tag, FsmTag::GpsRegionScan);
        assert_eq!(s.next_wake, 105);
    }

    #[test]
    fn arrival_then_stable_connection() {
        let mut st = fsm_step(FsmState::idle(0), 0, &env(None, &[home()], false)).state;
        assert_eq!(st.tag, FsmTag::HomeArrival);
        let mut now = 0;
        while now < 120 {
            now += 5;
            let s = fsm_step(st, now, &env(None, &[home()], now >= 60));
            assert!(now >= 120 || s.actions.contains(&Action::SampleAccel) || now + 5 > 120);
            st = s.state;
        }
        assert_eq!(st.tag, FsmTag::Connected);
        let s = fsm_step(st, now + 300, &env(None, &[home()], true));
        assert_eq!(s.state.tag, FsmTag::Sleep);
        assert_eq!(s.next_wake, now + 300 + SLEEP_PERIOD_S);
        let s = fsm_step(s.state, s.next_wake, &env(None, &[], false));
        assert_eq!(s.state.tag, FsmTag::IdleCheck);
    }

    #[test]
    fn unavailable_gps_is_never_read() {
        let s = fsm_step(FsmState::idle(0), 0, &env(None, &[], false));
        assert!(!s.actions.contains(&Action::ReadGps));
    }

    fn plan(gps: bool) -> DayPlan {
        let mut s = ScenarioSpec::simple_walk(1);
        s.schedule.gps_available = gps;
        s.plan_day(0, 3).unwrap()
    }

    #[test]
    fn commute_day_reaches_home_and_sleeps() {
        let p = plan(true);
        let run = run_fsm_day(&p, 7);
        let tags: Vec<FsmTag> = run.transitions.iter().map(|t| t.0).collect();
        for tag in [FsmTag::GpsRegionScan, FsmTag::HomeArrival, FsmTag::Connected, FsmTag::Sleep] {
            assert!(tags.contains(&tag), "{tag:?} missing from {tags:?}");
        }
        assert!(run.stats.wifi_scans as f64 <= 0.6 * fixed_cadence_scans(&p, 5) as f64);
        // sensed records are exactly the oracle's records at those instants
        for r in &run.trace.scans {
            let full = p.scan_at(r.ts);
            assert_eq!(r.aps, full.aps);
            assert!(r.gps.is_none() || r.gps == full.gps);
        }
        assert!(run.trace.scans.windows(2).all(|w| w[0].ts < w[1].ts));
    }

    #[test]
    fn gps_off_still_detects_home() {
        let run = run_fsm_day(&plan(false), 1);
        assert_eq!(run.stats.gps_reads, 0);
        assert!(run.transitions.iter().any(|t| t.0 == FsmTag::HomeArrival));
    }

    #[test]
    fn accel_only_in_arrival_windows() {
        let p = plan(true);
        let run = run_fsm_day(&p, 2);
        assert!(run.stats.accel_samples > 0);
        let arrivals: Vec<i64> = run.transitions.iter().filter(|t| t.0 == FsmTag::HomeArrival).map(|t| t.1).collect();
        for a in &run.trace.accel {
            assert!(arrivals.iter().any(|s| a.ts >= *s && a.ts < s + ARRIVAL_ACCEL_S));
        }
    }

    #[test]
    fn staying_home_sleeps_half_hourly() {
        // a day that starts connected at home: run from arrival onward
        let p = plan(true);
        let run = run_fsm_day(&p, 0);
        let sleep_at = run.transitions.iter().find(|t| t.0 == FsmTag::Sleep).unwrap().1;
        let morning = p.setup.morning_depart_ts;
        let scans_asleep = run.trace.scans.iter().filter(|r| r.ts > sleep_at && r.ts < morning).count();
        let hours = (morning - sleep_at) as f64 / 3600.0;
        assert!(scans_asleep as f64 <= 2.0 * hours + 1.0);
        assert!(scans_asleep as f64 <= 48.0);
    }
}
