//! Scan-trace data model, the JSONL trace formats, day slicing and
//! great-circle distance.
//!
//! Timestamps are integer seconds on the device's local wall clock, counted
//! from the Unix epoch. A "day" is the noon-to-noon slice labelled by the
//! date of its first noon, so an evening arrival and the following night
//! always land in the same [`DayTrace`].

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use chrono::{DateTime, NaiveDate};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

pub const SECONDS_PER_DAY: i64 = 86_400;
const NOON: i64 = 12 * 3600;

pub const EARTH_RADIUS_M: f64 = 6_371_000.0;

pub const MIN_RSSI_DBM: i32 = -120;
pub const MAX_RSSI_DBM: i32 = 0;

/// 48-bit access point identifier. Displays as lowercase colon-separated hex.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Bssid([u8; 6]);

impl Bssid {
    pub const fn from_octets(octets: [u8; 6]) -> Self {
        Bssid(octets)
    }

    pub fn octets(&self) -> [u8; 6] {
        self.0
    }

    /// Builds a locally administered address from a namespace byte and a
    /// 32-bit index. Used by the simulator to mint distinct identifiers.
    pub fn synthetic(namespace: u8, index: u32) -> Self {
        let i = index.to_be_bytes();
        Bssid([0x02, namespace, i[0], i[1], i[2], i[3]])
    }
}

impl fmt::Display for Bssid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let o = self.0;
        write!(
            f,
            "{:02x}:{:02x}:{:02x}:{:02x}:{:02x}:{:02x}",
            o[0], o[1], o[2], o[3], o[4], o[5]
        )
    }
}

impl fmt::Debug for Bssid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Bssid({self})")
    }
}

impl FromStr for Bssid {
    type Err = Error;

    /// Accepts six hex octets separated by `:` or `-`, in either case.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Validation(format!("malformed bssid {s:?}"));
        let sep = if s.contains('-') { '-' } else { ':' };
        let mut octets = [0u8; 6];
        let mut n = 0;
        for part in s.split(sep) {
            if n == 6 || part.len() != 2 {
                return Err(bad());
            }
            octets[n] = u8::from_str_radix(part, 16).map_err(|_| bad())?;
            n += 1;
        }
        if n != 6 {
            return Err(bad());
        }
        Ok(Bssid(octets))
    }
}

impl Serialize for Bssid {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Bssid {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApObservation {
    pub bssid: Bssid,
    #[serde(rename = "rssi")]
    pub rssi_dbm: i32,
}

impl ApObservation {
    pub fn new(bssid: Bssid, rssi_dbm: i32) -> Result<Self> {
        if !(MIN_RSSI_DBM..=MAX_RSSI_DBM).contains(&rssi_dbm) {
            return Err(Error::Validation(format!(
                "rssi {rssi_dbm} dBm outside [{MIN_RSSI_DBM}, {MAX_RSSI_DBM}]"
            )));
        }
        Ok(ApObservation { bssid, rssi_dbm })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GpsFix {
    #[serde(rename = "lat")]
    pub lat_deg: f64,
    #[serde(rename = "lon")]
    pub lon_deg: f64,
}

impl GpsFix {
    pub fn new(lat_deg: f64, lon_deg: f64) -> Result<Self> {
        let fix = GpsFix { lat_deg, lon_deg };
        fix.validate()?;
        Ok(fix)
    }

    pub fn validate(&self) -> Result<()> {
        if !(-90.0..=90.0).contains(&self.lat_deg) || !(-180.0..=180.0).contains(&self.lon_deg) {
            return Err(Error::Validation(format!(
                "gps fix ({}, {}) out of range",
                self.lat_deg, self.lon_deg
            )));
        }
        Ok(())
    }

    /// Point `meters` due north of `self` (negative goes south).
    pub fn offset_north(&self, meters: f64) -> GpsFix {
        let dlat = (meters / EARTH_RADIUS_M).to_degrees();
        GpsFix { lat_deg: (self.lat_deg + dlat).clamp(-90.0, 90.0), lon_deg: self.lon_deg }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AccelSample {
    pub ts: i64,
    #[serde(rename = "mag")]
    pub magnitude_mps2: f64,
}

impl AccelSample {
    pub fn validate(&self) -> Result<()> {
        if !(self.magnitude_mps2 >= 0.0) {
            return Err(Error::Validation(format!(
                "negative accelerometer magnitude {}",
                self.magnitude_mps2
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanRecord {
    pub ts: i64,
    pub gps: Option<GpsFix>,
    #[serde(rename = "conn")]
    pub connected: Option<Bssid>,
    pub aps: Vec<ApObservation>,
}

impl ScanRecord {
    pub fn validate(&self) -> Result<()> {
        if let Some(fix) = &self.gps {
            fix.validate()?;
        }
        let mut seen = HashSet::with_capacity(self.aps.len());
        for ap in &self.aps {
            if !(MIN_RSSI_DBM..=MAX_RSSI_DBM).contains(&ap.rssi_dbm) {
                return Err(Error::Validation(format!(
                    "rssi {} dBm for {} outside [{MIN_RSSI_DBM}, {MAX_RSSI_DBM}]",
                    ap.rssi_dbm, ap.bssid
                )));
            }
            if !seen.insert(ap.bssid) {
                return Err(Error::Validation(format!("duplicate bssid {} in one scan", ap.bssid)));
            }
        }
        if let Some(conn) = &self.connected {
            if !seen.contains(conn) {
                return Err(Error::Validation(format!(
                    "connected bssid {conn} missing from scan results"
                )));
            }
        }
        Ok(())
    }

    pub fn rssi_of(&self, bssid: &Bssid) -> Option<i32> {
        self.aps.iter().find(|ap| ap.bssid == *bssid).map(|ap| ap.rssi_dbm)
    }

    pub fn contains(&self, bssid: &Bssid) -> bool {
        self.aps.iter().any(|ap| ap.bssid == *bssid)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DayTrace {
    pub day_id: NaiveDate,
    pub scans: Vec<ScanRecord>,
    pub accel: Vec<AccelSample>,
}

impl DayTrace {
    /// `[start, end)` of this day's noon-to-noon slice.
    pub fn bounds(&self) -> (i64, i64) {
        slice_bounds(self.day_id)
    }
}

/// Midnight at the start of `day`, in local epoch seconds.
pub fn midnight(day: NaiveDate) -> i64 {
    day.and_hms_opt(0, 0, 0).expect("midnight exists").and_utc().timestamp()
}

/// The noon-to-noon slice a timestamp belongs to.
pub fn day_of(ts: i64) -> NaiveDate {
    DateTime::from_timestamp(ts - NOON, 0)
        .expect("timestamp in chrono range")
        .date_naive()
}

pub fn slice_bounds(day: NaiveDate) -> (i64, i64) {
    let start = midnight(day) + NOON;
    (start, start + SECONDS_PER_DAY)
}

/// Partitions time-ordered scans and accelerometer samples into noon-to-noon
/// day slices, oldest first.
pub fn slice_into_days(records: Vec<ScanRecord>, accel: Vec<AccelSample>) -> Result<Vec<DayTrace>> {
    check_sorted(records.iter().map(|r| r.ts))?;
    check_sorted(accel.iter().map(|a| a.ts))?;

    let mut days: BTreeMap<NaiveDate, DayTrace> = BTreeMap::new();
    fn entry(days: &mut BTreeMap<NaiveDate, DayTrace>, day: NaiveDate) -> &mut DayTrace {
        days.entry(day).or_insert_with(|| DayTrace { day_id: day, scans: Vec::new(), accel: Vec::new() })
    }
    for r in records {
        entry(&mut days, day_of(r.ts)).scans.push(r);
    }
    for a in accel {
        entry(&mut days, day_of(a.ts)).accel.push(a);
    }
    Ok(days.into_values().collect())
}

fn check_sorted(ts: impl Iterator<Item = i64>) -> Result<()> {
    let mut prev = i64::MIN;
    for t in ts {
        if t < prev {
            return Err(Error::Ordering { prev, next: t });
        }
        prev = t;
    }
    Ok(())
}

pub fn haversine_m(a: &GpsFix, b: &GpsFix) -> f64 {
    let lat1 = a.lat_deg.to_radians();
    let lat2 = b.lat_deg.to_radians();
    let dlat = (b.lat_deg - a.lat_deg).to_radians();
    let dlon = (b.lon_deg - a.lon_deg).to_radians();
    let h = (dlat / 2.0).sin().powi(2) + lat1.cos() * lat2.cos() * (dlon / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_M * h.sqrt().min(1.0).asin()
}

fn parse_lines<T, F>(reader: impl BufRead, mut check: F) -> Result<Vec<T>>
where
    T: for<'de> Deserialize<'de>,
    F: FnMut(&T) -> Result<()>,
{
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let item: T = serde_json::from_str(&line)
            .map_err(|e| Error::Parse { line: line_no, message: e.to_string() })?;
        check(&item).map_err(|e| Error::Parse { line: line_no, message: e.to_string() })?;
        out.push(item);
    }
    Ok(out)
}

/// Reads the JSONL scan format, one [`ScanRecord`] per line. Blank lines are
/// skipped; any malformed or invalid line fails with its 1-based number.
pub fn parse_trace_file(reader: impl BufRead) -> Result<Vec<ScanRecord>> {
    parse_lines(reader, ScanRecord::validate)
}

pub fn parse_accel_file(reader: impl BufRead) -> Result<Vec<AccelSample>> {
    parse_lines(reader, AccelSample::validate)
}

pub fn write_trace_file<'a>(mut w: impl Write, records: impl IntoIterator<Item = &'a ScanRecord>) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn write_accel_file<'a>(mut w: impl Write, samples: impl IntoIterator<Item = &'a AccelSample>) -> Result<()> {
    for s in samples {
        serde_json::to_writer(&mut w, s)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}
