//! The two-level time map.
//!
//! The lower level is one [`DayMap`] per day: BSSID → ([`ApLabel`]) with the
//! time left until home once the AP is lost (TL) and how long the AP was in
//! range (TDR). The upper level picks, for a queried BSSID, the window day
//! whose TDR for that BSSID is closest to the TDR just measured, which is
//! the day travelled at the most similar speed. [`UserProfile`] keeps the
//! newest `window_days` day maps plus a fallback map of older labels.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::home::vote_home_ap;
use crate::trace::{Bssid, DayTrace, ScanRecord};

pub const DEFAULT_WINDOW_DAYS: usize = 7;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApLabel {
    pub tl_seconds: i64,
    pub tdr_seconds: i64,
}

/// How the homeward leg is cut out of a day trace.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LegOptions {
    /// Nominal in-region scan period; an AP counts as lost one period after
    /// its last sighting.
    pub scan_period_s: i64,
    /// How far before the arrival the leg may reach.
    pub horizon_s: i64,
    /// Minimum home-AP absence before a sighting counts as an arrival.
    pub min_absence_s: i64,
    /// Observations weaker than this are ignored. Never applied to the home AP.
    pub rssi_threshold_dbm: Option<i32>,
}

impl Default for LegOptions {
    fn default() -> Self {
        LegOptions { scan_period_s: 5, horizon_s: 3600, min_absence_s: 600, rssi_threshold_dbm: None }
    }
}

impl LegOptions {
    pub fn with_threshold(threshold: Option<i32>) -> Self {
        LegOptions { rssi_threshold_dbm: threshold, ..Self::default() }
    }

    pub fn keeps(&self, rssi: i32) -> bool {
        self.rssi_threshold_dbm.is_none_or(|t| rssi >= t)
    }
}

/// One route AP's sighting interval on the homeward leg.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LegAp {
    pub bssid: Bssid,
    pub detect_ts: i64,
    pub lost_ts: i64,
}

impl LegAp {
    pub fn label(&self, arrival_ts: i64) -> ApLabel {
        ApLabel { tl_seconds: arrival_ts - self.lost_ts, tdr_seconds: self.lost_ts - self.detect_ts }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct HomewardLeg {
    pub arrival_ts: i64,
    pub start_ts: i64,
    /// Sorted by loss time, then BSSID.
    pub aps: Vec<LegAp>,
}

impl HomewardLeg {
    pub fn scans<'a>(&self, trace: &'a DayTrace) -> impl Iterator<Item = &'a ScanRecord> + use<'a> {
        let (from, to) = (self.start_ts, self.arrival_ts);
        trace.scans.iter().filter(move |s| s.ts >= from && s.ts <= to)
    }
}

/// The day's final home arrival: the last home sighting that follows at
/// least `min_absence_s` of scans without the home AP.
pub fn find_arrival(trace: &DayTrace, home: &Bssid, opts: &LegOptions) -> Option<(i64, Option<i64>)> {
    let mut absent_since: Option<i64> = None;
    let mut last_seen: Option<i64> = None;
    let mut arrival = None;
    for scan in &trace.scans {
        if scan.contains(home) {
            if let Some(a) = absent_since {
                if scan.ts - a >= opts.min_absence_s {
                    arrival = Some((scan.ts, last_seen));
                }
            }
            absent_since = None;
            last_seen = Some(scan.ts);
        } else if absent_since.is_none() {
            absent_since = Some(scan.ts);
        }
    }
    arrival
}

/// Extracts the homeward leg. APs already in range at the start of the leg
/// are dropped because their detection time is unknown.
pub fn homeward_leg(trace: &DayTrace, home: &Bssid, opts: &LegOptions) -> Result<HomewardLeg> {
    let (arrival_ts, prev_home) = find_arrival(trace, home, opts).ok_or(Error::NoArrival(trace.day_id))?;
    let mut start_ts = arrival_ts - opts.horizon_s;
    if let Some(p) = prev_home {
        start_ts = start_ts.max(p + 1);
    }
    let leg: Vec<&ScanRecord> = trace.scans.iter().filter(|s| s.ts >= start_ts && s.ts <= arrival_ts).collect();
    let aps = leg_aps(&leg, Some(home), arrival_ts, opts);
    Ok(HomewardLeg { arrival_ts, start_ts, aps })
}

/// Sighting intervals of the APs in `leg` (time-ordered scans ending at
/// `arrival_ts`), excluding `skip` and APs already visible in the first scan.
/// Loss is one scan period after the last sighting, capped at arrival.
pub fn leg_aps(leg: &[&ScanRecord], skip: Option<&Bssid>, arrival_ts: i64, opts: &LegOptions) -> Vec<LegAp> {
    let first_ts = leg.first().map(|s| s.ts);
    let mut spans: HashMap<Bssid, (i64, i64)> = HashMap::new();
    for scan in leg {
        for ap in &scan.aps {
            if Some(&ap.bssid) == skip || !opts.keeps(ap.rssi_dbm) {
                continue;
            }
            spans.entry(ap.bssid).and_modify(|s| s.1 = scan.ts).or_insert((scan.ts, scan.ts));
        }
    }
    let mut aps: Vec<LegAp> = spans
        .into_iter()
        .filter(|(_, (detect, _))| Some(*detect) != first_ts)
        .map(|(bssid, (detect, last))| LegAp {
            bssid,
            detect_ts: detect,
            lost_ts: (last + opts.scan_period_s).min(arrival_ts),
        })
        .collect();
    aps.sort_by_key(|a| (a.lost_ts, a.bssid));
    aps
}

mod sorted_map {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(map: &HashMap<Bssid, ApLabel>, s: S) -> std::result::Result<S::Ok, S::Error> {
        map.iter().collect::<BTreeMap<_, _>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<HashMap<Bssid, ApLabel>, D::Error> {
        BTreeMap::<Bssid, ApLabel>::deserialize(d).map(|m| m.into_iter().collect())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DayMap {
    pub day_id: NaiveDate,
    #[serde(with = "sorted_map")]
    pub entries: HashMap<Bssid, ApLabel>,
    /// Median TDR over the route APs (entries with TL > 0).
    pub signature_s: f64,
    /// `None` for a day without a homeward arrival; such a day has no entries.
    pub arrival_ts: Option<i64>,
}

impl DayMap {
    pub fn empty(day_id: NaiveDate) -> Self {
        DayMap { day_id, entries: HashMap::new(), signature_s: 0.0, arrival_ts: None }
    }
}

pub fn build_day_map(trace: &DayTrace, home: &Bssid) -> Result<DayMap> {
    build_day_map_with(trace, home, &LegOptions::default())
}

pub fn build_day_map_with(trace: &DayTrace, home: &Bssid, opts: &LegOptions) -> Result<DayMap> {
    let leg = homeward_leg(trace, home, opts)?;
    let mut entries: HashMap<Bssid, ApLabel> =
        leg.aps.iter().map(|ap| (ap.bssid, ap.label(leg.arrival_ts))).collect();
    entries.insert(*home, ApLabel { tl_seconds: 0, tdr_seconds: 0 });
    let mut route_tdrs: Vec<i64> = entries.values().filter(|l| l.tl_seconds > 0).map(|l| l.tdr_seconds).collect();
    route_tdrs.sort_unstable();
    Ok(DayMap { day_id: trace.day_id, entries, signature_s: median_i64(&route_tdrs), arrival_ts: Some(leg.arrival_ts) })
}

fn median_i64(sorted: &[i64]) -> f64 {
    match sorted.len() {
        0 => 0.0,
        n if n % 2 == 1 => sorted[n / 2] as f64,
        n => (sorted[n / 2 - 1] + sorted[n / 2]) as f64 / 2.0,
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PredictionSource {
    Window(NaiveDate),
    Fallback,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prediction {
    pub tl_seconds: i64,
    pub source: PredictionSource,
    pub matched_bssid: Bssid,
    /// Map probes performed to answer the query.
    pub lookups: u64,
}

/// Day selection rule for the upper level.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatchPolicy {
    /// Days whose TDR distance is within this many seconds of the best are
    /// treated as equally similar. Both ends of a TDR are quantized to the
    /// scan period, so two periods is the measurement resolution.
    pub tdr_tolerance_s: i64,
}

impl Default for MatchPolicy {
    fn default() -> Self {
        MatchPolicy { tdr_tolerance_s: 10 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct Candidate {
    slot: usize,
    tdr: i64,
    tl: i64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct ProfileDoc {
    home_bssid: Bssid,
    window: Vec<DayMap>,
    fallback: BTreeMap<Bssid, ApLabel>,
    built_at: NaiveDate,
    history_start: NaiveDate,
    window_days: usize,
    #[serde(default)]
    match_policy: MatchPolicy,
}

/// A user's windowed time map.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "ProfileDoc", into = "ProfileDoc")]
pub struct UserProfile {
    pub home_bssid: Bssid,
    /// Oldest first; strictly increasing day ids.
    pub window: Vec<DayMap>,
    pub fallback: HashMap<Bssid, ApLabel>,
    pub built_at: NaiveDate,
    /// First day ever folded into this profile.
    pub history_start: NaiveDate,
    pub window_days: usize,
    pub match_policy: MatchPolicy,
    index: HashMap<Bssid, Vec<Candidate>>,
}

impl From<ProfileDoc> for UserProfile {
    fn from(d: ProfileDoc) -> Self {
        let mut p = UserProfile {
            home_bssid: d.home_bssid,
            window: d.window,
            fallback: d.fallback.into_iter().collect(),
            built_at: d.built_at,
            history_start: d.history_start,
            window_days: d.window_days,
            match_policy: d.match_policy,
            index: HashMap::new(),
        };
        p.reindex();
        p
    }
}

impl From<UserProfile> for ProfileDoc {
    fn from(p: UserProfile) -> Self {
        ProfileDoc {
            home_bssid: p.home_bssid,
            window: p.window,
            fallback: p.fallback.into_iter().collect(),
            built_at: p.built_at,
            history_start: p.history_start,
            window_days: p.window_days,
            match_policy: p.match_policy,
        }
    }
}

impl UserProfile {
    /// Builds a profile from day maps in any order: the newest `window_days`
    /// form the window, older days are folded into the fallback oldest first.
    pub fn from_day_maps(home: Bssid, mut maps: Vec<DayMap>, window_days: usize) -> Result<Self> {
        if window_days == 0 {
            return Err(Error::Config("window_days must be at least 1".into()));
        }
        maps.sort_by_key(|m| m.day_id);
        if let Some(w) = maps.windows(2).find(|w| w[0].day_id == w[1].day_id) {
            return Err(Error::DayOrder { newest: w[0].day_id, new: w[1].day_id });
        }
        let (Some(first), Some(last)) = (maps.first(), maps.last()) else {
            return Err(Error::InsufficientData("no day maps".into()));
        };
        let (history_start, built_at) = (first.day_id, last.day_id);
        let split = maps.len().saturating_sub(window_days);
        let window = maps.split_off(split);
        let mut fallback = HashMap::new();
        for old in maps {
            fallback.extend(old.entries);
        }
        let mut p = UserProfile {
            home_bssid: home,
            window,
            fallback,
            built_at,
            history_start,
            window_days,
            match_policy: MatchPolicy::default(),
            index: HashMap::new(),
        };
        p.reindex();
        Ok(p)
    }

    pub fn with_match_policy(mut self, policy: MatchPolicy) -> Self {
        self.match_policy = policy;
        self
    }

    fn reindex(&mut self) {
        self.index.clear();
        for (slot, day) in self.window.iter().enumerate() {
            for (b, l) in &day.entries {
                self.index.entry(*b).or_default().push(Candidate { slot, tdr: l.tdr_seconds, tl: l.tl_seconds });
            }
        }
    }

    /// Calendar days from the first ingested day through the newest.
    pub fn history_days(&self) -> i64 {
        (self.built_at - self.history_start).num_days() + 1
    }

    pub fn update(&self, new_day: DayMap, window_traces: &[DayTrace], opts: &LegOptions) -> Result<Self> {
        update_profile(self, new_day, window_traces, opts)
    }

    pub fn predict(&self, bssid: &Bssid, observed_tdr: i64) -> Result<Prediction> {
        predict_tl(self, bssid, observed_tdr)
    }
}

/// Appends `new_day`, evicts into the fallback past `window_days`, then
/// re-votes the home AP over `window_traces` (the traces of the window days,
/// new day included). If the home AP changed, every window day map is
/// rebuilt against the new home and the fallback, keyed to the old home, is
/// dropped.
pub fn update_profile(
    profile: &UserProfile,
    new_day: DayMap,
    window_traces: &[DayTrace],
    opts: &LegOptions,
) -> Result<UserProfile> {
    if let Some(newest) = profile.window.last() {
        if new_day.day_id <= newest.day_id {
            return Err(Error::DayOrder { newest: newest.day_id, new: new_day.day_id });
        }
    }
    let mut next = profile.clone();
    next.built_at = new_day.day_id;
    next.window.push(new_day);
    while next.window.len() > next.window_days {
        let evicted = next.window.remove(0);
        next.fallback.extend(evicted.entries);
    }

    let in_window: Vec<DayTrace> = window_traces
        .iter()
        .filter(|t| next.window.iter().any(|d| d.day_id == t.day_id))
        .cloned()
        .collect();
    if let Ok(vote) = vote_home_ap(&in_window) {
        if vote.winner != next.home_bssid {
            next.home_bssid = vote.winner;
            next.fallback.clear();
            for day in &mut next.window {
                *day = match in_window.iter().find(|t| t.day_id == day.day_id) {
                    Some(t) => build_day_map_with(t, &vote.winner, opts).unwrap_or_else(|_| DayMap::empty(t.day_id)),
                    None => DayMap::empty(day.day_id),
                };
            }
        }
    }
    next.reindex();
    Ok(next)
}

/// Two probes: the BSSID index picks the most similar window day, then that
/// day's map yields the label. Among days within the TDR tolerance of the
/// best match, the smallest TL wins, then the most recent day.
pub fn predict_tl(profile: &UserProfile, bssid: &Bssid, observed_tdr: i64) -> Result<Prediction> {
    let required = profile.window_days as i64;
    if profile.history_days() < required {
        return Err(Error::ColdStart { days: profile.history_days(), required });
    }
    let observed_tdr = observed_tdr.max(0);
    if let Some(cands) = profile.index.get(bssid).filter(|c| !c.is_empty()) {
        let dist = |c: &Candidate| (c.tdr - observed_tdr).abs();
        let best = cands.iter().map(dist).min().expect("nonempty");
        let chosen = cands
            .iter()
            .filter(|c| dist(c) <= best + profile.match_policy.tdr_tolerance_s)
            .min_by_key(|c| (c.tl, std::cmp::Reverse(c.slot)))
            .expect("best candidate is within tolerance");
        let day = &profile.window[chosen.slot];
        let label = day.entries.get(bssid).expect("index mirrors window");
        return Ok(Prediction {
            tl_seconds: label.tl_seconds,
            source: PredictionSource::Window(day.day_id),
            matched_bssid: *bssid,
            lookups: 2,
        });
    }
    match profile.fallback.get(bssid) {
        Some(label) => Ok(Prediction {
            tl_seconds: label.tl_seconds,
            source: PredictionSource::Fallback,
            matched_bssid: *bssid,
            lookups: 2,
        }),
        None => Err(Error::UnknownBssid(*bssid)),
    }
}

/// Folds day traces into a profile one day at a time, the way the nightly
/// update does: the home AP is first voted over the initial days, then every
/// later day goes through [`update_profile`].
#[derive(Clone, Debug)]
pub struct ProfileBuilder {
    opts: LegOptions,
    window_days: usize,
    policy: MatchPolicy,
    traces: Vec<DayTrace>,
    profile: Option<UserProfile>,
}

impl ProfileBuilder {
    pub fn new(opts: LegOptions, window_days: usize) -> Self {
        ProfileBuilder { opts, window_days, policy: MatchPolicy::default(), traces: Vec::new(), profile: None }
    }

    pub fn with_match_policy(mut self, policy: MatchPolicy) -> Self {
        self.policy = policy;
        self
    }

    pub fn profile(&self) -> Option<&UserProfile> {
        self.profile.as_ref()
    }

    pub fn into_profile(self) -> Option<UserProfile> {
        self.profile
    }

    pub fn window_traces(&self) -> &[DayTrace] {
        &self.traces
    }

    pub fn push(&mut self, trace: DayTrace) -> Result<()> {
        if let Some(last) = self.traces.last() {
            if trace.day_id <= last.day_id {
                return Err(Error::DayOrder { newest: last.day_id, new: trace.day_id });
            }
        }
        self.traces.push(trace);
        if self.traces.len() > self.window_days {
            self.traces.remove(0);
        }
        let trace = self.traces.last().expect("just pushed");
        self.profile = match self.profile.take() {
            Some(p) => {
                let map = build_day_map_with(trace, &p.home_bssid, &self.opts).unwrap_or_else(|_| DayMap::empty(trace.day_id));
                Some(update_profile(&p, map, &self.traces, &self.opts)?)
            }
            None => match vote_home_ap(&self.traces) {
                Ok(vote) => {
                    let maps = self
                        .traces
                        .iter()
                        .map(|t| build_day_map_with(t, &vote.winner, &self.opts).unwrap_or_else(|_| DayMap::empty(t.day_id)))
                        .collect();
                    let mut p = UserProfile::from_day_maps(vote.winner, maps, self.window_days)?.with_match_policy(self.policy);
                    p.history_start = self.traces[0].day_id;
                    Some(p)
                }
                Err(Error::NoNightData) => None,
                Err(e) => return Err(e),
            },
        };
        Ok(())
    }
}

/// Directory of `{device_id}.profile.json` documents.
#[derive(Clone, Debug)]
pub struct ProfileStore {
    dir: PathBuf,
}

impl ProfileStore {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        ProfileStore { dir: dir.into() }
    }

    pub fn path_for(&self, device_id: &str) -> Result<PathBuf> {
        if device_id.is_empty() || device_id.contains(['/', '\\']) || device_id.starts_with('.') {
            return Err(Error::Validation(format!("unusable device id {device_id:?}")));
        }
        Ok(self.dir.join(format!("{device_id}.profile.json")))
    }

    pub fn save(&self, device_id: &str, profile: &UserProfile) -> Result<PathBuf> {
        let path = self.path_for(device_id)?;
        fs::create_dir_all(&self.dir)?;
        let mut text = serde_json::to_string_pretty(profile)?;
        text.push('\n');
        fs::write(&path, text)?;
        Ok(path)
    }

    pub fn load(&self, device_id: &str) -> Result<UserProfile> {
        let path = self.path_for(device_id)?;
        let text = fs::read_to_string(&path)?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace::{midnight, ApObservation};

    fn b(i: u8) -> Bssid {
        Bssid::from_octets([0x0a, 0, 0, 0, 0, i])
    }

    const HOME: u8 = 99;

    fn day(i: u64) -> NaiveDate {
        NaiveDate::from_ymd_opt(2024, 2, 1).unwrap() + chrono::Days::new(i)
    }

    /// Scans every 5 s from `t0` to `t1` inclusive; `spans` gives each AP's
    /// visible [from, to] range.
    fn leg_trace(day_id: NaiveDate, t0: i64, t1: i64, spans: &[(u8, i64, i64)]) -> DayTrace {
        let scans = (t0..=t1)
            .step_by(5)
            .map(|ts| ScanRecord {
                ts,
                gps: None,
                connected: None,
                aps: spans
                    .iter()
                    .filter(|(_, a, z)| ts >= *a && ts <= *z)
                    .map(|(i, _, _)| ApObservation { bssid: b(*i), rssi_dbm: -60 })
                    .collect(),
            })
            .collect();
        DayTrace { day_id, scans, accel: vec![] }
    }

    fn base(d: NaiveDate) -> i64 {
        midnight(d) + 18 * 3600
    }

    fn map_with(d: NaiveDate, labels: &[(u8, i64, i64)]) -> DayMap {
        let mut entries: HashMap<Bssid, ApLabel> =
            labels.iter().map(|(i, tl, tdr)| (b(*i), ApLabel { tl_seconds: *tl, tdr_seconds: *tdr })).collect();
        entries.insert(b(HOME), ApLabel { tl_seconds: 0, tdr_seconds: 0 });
        DayMap { day_id: d, entries, signature_s: 0.0, arrival_ts: None }
    }

    fn week(maps: Vec<DayMap>) -> UserProfile {
        let first = maps.iter().map(|m| m.day_id).min().unwrap();
        let mut p = UserProfile::from_day_maps(b(HOME), maps, 7).unwrap();
        p.history_start = first.min(p.built_at - chrono::Days::new(6));
        p
    }

    #[test]
    fn labels_follow_loss_and_detection() {
        let d = day(0);
        let t = base(d);
        // AP 1 seen from +200 to +295 (lost at +300), home from +1000
        let trace = leg_trace(d, t, t + 1100, &[(1, t + 200, t + 295), (2, t + 900, t + 1100), (HOME, t + 1000, t + 1100)]);
        let m = build_day_map(&trace, &b(HOME)).unwrap();
        assert_eq!(m.entries[&b(1)], ApLabel { tdr_seconds: 100, tl_seconds: 700 });
        assert_eq!(m.entries[&b(HOME)].tl_seconds, 0);
        // still visible at home detection: clamped
        assert_eq!(m.entries[&b(2)], ApLabel { tdr_seconds: 100, tl_seconds: 0 });
        assert_eq!(m.arrival_ts, Some(t + 1000));
        assert_eq!(m.signature_s, 100.0);
    }

    #[test]
    fn no_home_no_arrival() {
        let d = day(0);
        let t = base(d);
        let trace = leg_trace(d, t, t + 600, &[(1, t, t + 100)]);
        assert!(matches!(build_day_map(&trace, &b(HOME)), Err(Error::NoArrival(_))));
    }

    #[test]
    fn morning_sightings_and_left_censored_aps_are_excluded() {
        let d = day(0);
        let t = base(d);
        // AP 3 is already visible at the first leg scan; AP 4 only appears
        // after the home AP was last seen in the morning leg.
        let mut trace = leg_trace(d, t, t + 1000, &[(3, t, t + 400), (1, t + 200, t + 295), (HOME, t + 900, t + 1000)]);
        let morning = leg_trace(d, t + 50_000, t + 50_300, &[(HOME, t + 50_000, t + 50_100), (4, t + 50_150, t + 50_250)]);
        trace.scans.extend(morning.scans);
        let m = build_day_map(&trace, &b(HOME)).unwrap();
        assert!(!m.entries.contains_key(&b(3)));
        assert!(!m.entries.contains_key(&b(4)));
        assert!(m.entries.contains_key(&b(1)));
        assert_eq!(m.arrival_ts, Some(t + 900));
    }

    #[test]
    fn threshold_drops_weak_observations() {
        let d = day(0);
        let t = base(d);
        let mut trace = leg_trace(d, t, t + 800, &[(1, t + 100, t + 200), (HOME, t + 700, t + 800)]);
        for s in &mut trace.scans {
            for ap in &mut s.aps {
                ap.rssi_dbm = if ap.bssid == b(HOME) { -95 } else { -75 };
            }
        }
        let m = build_day_map_with(&trace, &b(HOME), &LegOptions::with_threshold(Some(-70))).unwrap();
        assert!(!m.entries.contains_key(&b(1)));
        // the home AP is never filtered
        assert_eq!(m.arrival_ts, Some(t + 700));
    }

    #[test]
    fn single_day_walkthrough_prediction() {
        let p = week(vec![map_with(day(6), &[(1, 340, 60)])]);
        let pred = predict_tl(&p, &b(1), 55).unwrap();
        assert_eq!(pred.tl_seconds, 340);
        assert_eq!(pred.lookups, 2);
        assert_eq!(pred.source, PredictionSource::Window(day(6)));
    }

    #[test]
    fn nearest_tdr_day_wins() {
        let p = week(vec![map_with(day(5), &[(1, 300, 100)]), map_with(day(6), &[(1, 150, 200)])]);
        assert_eq!(predict_tl(&p, &b(1), 110).unwrap().source, PredictionSource::Window(day(5)));
        assert_eq!(predict_tl(&p, &b(1), 110).unwrap().tl_seconds, 300);
        assert_eq!(predict_tl(&p, &b(1), 190).unwrap().tl_seconds, 150);
    }

    #[test]
    fn similar_days_resolve_to_nearest_time_then_recency() {
        let p = week(vec![
            map_with(day(4), &[(1, 320, 100)]),
            map_with(day(5), &[(1, 300, 104)]),
            map_with(day(6), &[(1, 300, 98)]),
        ]);
        let pred = predict_tl(&p, &b(1), 100).unwrap();
        assert_eq!(pred.tl_seconds, 300);
        assert_eq!(pred.source, PredictionSource::Window(day(6)));
        let strict = p.clone().with_match_policy(MatchPolicy { tdr_tolerance_s: 0 });
        assert_eq!(predict_tl(&strict, &b(1), 100).unwrap().tl_seconds, 320);
    }

    #[test]
    fn fallback_and_unknown() {
        let mut p = week(vec![map_with(day(6), &[(1, 340, 60)])]);
        p.fallback.insert(b(2), ApLabel { tl_seconds: 222, tdr_seconds: 30 });
        let pred = predict_tl(&p, &b(2), 30).unwrap();
        assert_eq!(pred.source, PredictionSource::Fallback);
        assert_eq!(pred.tl_seconds, 222);
        assert!(matches!(predict_tl(&p, &b(3), 30), Err(Error::UnknownBssid(_))));
    }

    #[test]
    fn cold_start_under_a_week() {
        let p = UserProfile::from_day_maps(b(HOME), (0..6).map(|i| map_with(day(i), &[(1, 300, 100)])).collect(), 7).unwrap();
        assert!(matches!(predict_tl(&p, &b(1), 100), Err(Error::ColdStart { days: 6, required: 7 })));
        let p = UserProfile::from_day_maps(b(HOME), (0..7).map(|i| map_with(day(i), &[(1, 300, 100)])).collect(), 7).unwrap();
        assert!(predict_tl(&p, &b(1), 100).is_ok());
    }

    #[test]
    fn eviction_feeds_fallback_with_newest_label() {
        let mut maps: Vec<DayMap> = (0..7).map(|i| map_with(day(i), &[(1, 300, 100)])).collect();
        maps[0] = map_with(day(0), &[(1, 300, 100), (5, 111, 10)]);
        let mut p = UserProfile::from_day_maps(b(HOME), maps, 7).unwrap();
        p.fallback.insert(b(5), ApLabel { tl_seconds: 999, tdr_seconds: 1 });
        let next = update_profile(&p, map_with(day(7), &[(1, 290, 100)]), &[], &LegOptions::default()).unwrap();
        assert_eq!(next.window.len(), 7);
        assert_eq!(next.window[0].day_id, day(1));
        assert_eq!(next.fallback[&b(5)], ApLabel { tl_seconds: 111, tdr_seconds: 10 });
        assert_eq!(predict_tl(&next, &b(5), 10).unwrap().source, PredictionSource::Fallback);
    }

    #[test]
    fn out_of_order_update_is_rejected() {
        let p = UserProfile::from_day_maps(b(HOME), vec![map_with(day(3), &[])], 7).unwrap();
        let err = update_profile(&p, map_with(day(3), &[]), &[], &LegOptions::default()).unwrap_err();
        assert!(matches!(err, Error::DayOrder { .. }));
    }

    #[test]
    fn insertion_order_does_not_matter() {
        let maps: Vec<DayMap> = (0..9).map(|i| map_with(day(i), &[(i as u8, 10 * i as i64, 5)])).collect();
        let a = UserProfile::from_day_maps(b(HOME), maps.clone(), 7).unwrap();
        let mut shuffled = maps.clone();
        shuffled.reverse();
        shuffled.swap(2, 5);
        assert_eq!(a, UserProfile::from_day_maps(b(HOME), shuffled, 7).unwrap());
        // dropping the oldest day then adding it back restores the profile
        let without = UserProfile::from_day_maps(b(HOME), maps[1..].to_vec(), 7).unwrap();
        assert_ne!(a, without);
        let mut again: Vec<DayMap> = without.window.clone();
        again.extend(maps[..2].iter().cloned());
        assert_eq!(a, UserProfile::from_day_maps(b(HOME), again, 7).unwrap());
    }

    #[test]
    fn profile_json_round_trip_keeps_index() {
        let p = week(vec![map_with(day(5), &[(1, 300, 100)]), map_with(day(6), &[(1, 150, 200)])]);
        let text = serde_json::to_string(&p).unwrap();
        let back: UserProfile = serde_json::from_str(&text).unwrap();
        assert_eq!(back, p);
        assert_eq!(predict_tl(&back, &b(1), 190).unwrap().tl_seconds, 150);
        // deterministic bytes
        assert_eq!(serde_json::to_string(&back).unwrap(), text);
    }

    #[test]
    fn store_round_trip_and_rejects_bad_ids() {
        let dir = tempfile::tempdir().unwrap();
        let store = ProfileStore::new(dir.path());
        let p = week(vec![map_with(day(6), &[(1, 340, 60)])]);
        let path = store.save("phone-1", &p).unwrap();
        assert!(path.ends_with("phone-1.profile.json"));
        assert_eq!(store.load("phone-1").unwrap(), p);
        assert!(store.save("../x", &p).is_err());
    }
}
