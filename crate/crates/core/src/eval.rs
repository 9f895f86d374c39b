//! Evaluation harness: replays a dataset day by day, asks a predictor for
//! the time left at every route-AP loss on the way home, and summarizes the
//! signed errors against ground-truth arrival.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::io::Write;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{filter_env, history_from_traces, nn_predict, HistoryPoint, ALL_APS_DBM};
use crate::simulator::GroundTruth;
use crate::time_map::{leg_aps, LegOptions, MatchPolicy, ProfileBuilder};
use crate::trace::{Bssid, DayTrace, ScanRecord};

/// Calendar days reserved for profile building before any query.
pub const COLD_START_DAYS: usize = 7;
pub const WITHIN_S: f64 = 100.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RssiLevel {
    All,
    Dbm(i32),
}

impl RssiLevel {
    pub fn threshold(self) -> Option<i32> {
        match self {
            RssiLevel::All => None,
            RssiLevel::Dbm(t) => Some(t),
        }
    }

    pub fn floor_dbm(self) -> i32 {
        self.threshold().unwrap_or(ALL_APS_DBM)
    }
}

impl fmt::Display for RssiLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RssiLevel::All => f.write_str("all"),
            RssiLevel::Dbm(t) => write!(f, "{t}"),
        }
    }
}

impl std::str::FromStr for RssiLevel {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("all") {
            return Ok(RssiLevel::All);
        }
        s.trim()
            .parse()
            .map(RssiLevel::Dbm)
            .map_err(|_| Error::Validation(format!("rssi level {s:?} is neither \"all\" nor an integer")))
    }
}

/// Traces and ground truth, matched by day.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Dataset {
    pub traces: Vec<DayTrace>,
    pub truth: Vec<GroundTruth>,
}

impl Dataset {
    pub fn new(traces: Vec<DayTrace>, truth: Vec<GroundTruth>) -> Self {
        Dataset { traces, truth }
    }

    /// Days present in both traces and truth, oldest first.
    fn days(&self) -> Vec<(&DayTrace, &GroundTruth)> {
        let truth: HashMap<NaiveDate, &GroundTruth> = self.truth.iter().map(|g| (g.day_id, g)).collect();
        let mut days: Vec<_> = self.traces.iter().filter_map(|t| truth.get(&t.day_id).map(|g| (t, *g))).collect();
        days.sort_by_key(|(t, _)| t.day_id);
        days
    }
}

/// A prediction request at the instant `bssid` drops out of range.
#[derive(Clone, Debug, PartialEq)]
pub struct Query {
    pub day_id: NaiveDate,
    pub ts: i64,
    pub bssid: Bssid,
    pub observed_tdr: i64,
    pub actual_tl: i64,
    /// Most recent scan at or before `ts`.
    pub scan: ScanRecord,
}

/// One query per route-AP loss before the true arrival. The leg is the
/// horizon before arrival; APs visible in its first scan are left out.
pub fn extract_queries(trace: &DayTrace, truth: &GroundTruth, opts: &LegOptions) -> Vec<Query> {
    let arrival = truth.arrival_ts;
    let leg: Vec<&ScanRecord> =
        trace.scans.iter().filter(|s| s.ts >= arrival - opts.horizon_s && s.ts <= arrival).collect();
    leg_aps(&leg, None, arrival, opts)
        .into_iter()
        .filter(|ap| ap.lost_ts < arrival)
        .filter_map(|ap| {
            let scan = leg.iter().rev().find(|s| s.ts <= ap.lost_ts)?;
            Some(Query {
                day_id: trace.day_id,
                ts: ap.lost_ts,
                bssid: ap.bssid,
                observed_tdr: ap.lost_ts - ap.detect_ts,
                actual_tl: arrival - ap.lost_ts,
                scan: (*scan).clone(),
            })
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Answer {
    pub tl_seconds: i64,
    pub probes: u64,
}

/// A method under evaluation. Days are fed in order: queries of a day are
/// answered from the days observed before it, then the day is observed.
pub trait Predictor {
    fn name(&self) -> String;
    fn observe(&mut self, trace: &DayTrace, truth: &GroundTruth) -> Result<()>;
    fn predict(&self, query: &Query) -> Result<Answer>;
}

#[derive(Clone, Debug)]
pub struct TlsPredictor {
    builder: ProfileBuilder,
}

impl TlsPredictor {
    pub fn new(level: RssiLevel, window_days: usize) -> Self {
        TlsPredictor { builder: ProfileBuilder::new(LegOptions::with_threshold(level.threshold()), window_days) }
    }

    pub fn with_match_policy(self, policy: MatchPolicy) -> Self {
        TlsPredictor { builder: self.builder.with_match_policy(policy) }
    }

    pub fn builder(&self) -> &ProfileBuilder {
        &self.builder
    }
}

impl Predictor for TlsPredictor {
    fn name(&self) -> String {
        "TLS".into()
    }

    fn observe(&mut self, trace: &DayTrace, _truth: &GroundTruth) -> Result<()> {
        self.builder.push(trace.clone())
    }

    fn predict(&self, q: &Query) -> Result<Answer> {
        let profile = self.builder.profile().ok_or(Error::ColdStart { days: 0, required: COLD_START_DAYS as i64 })?;
        let p = profile.predict(&q.bssid, q.observed_tdr)?;
        Ok(Answer { tl_seconds: p.tl_seconds, probes: p.lookups })
    }
}

/// Fingerprint history from the homeward legs of the most recent
/// `window_days` observed days, labeled with ground-truth time left.
#[derive(Clone, Debug)]
pub struct NnPredictor {
    level: RssiLevel,
    window_days: usize,
    seed: u64,
    days: Vec<Vec<HistoryPoint>>,
    history: Vec<HistoryPoint>,
}

impl NnPredictor {
    pub fn new(level: RssiLevel, window_days: usize, seed: u64) -> Self {
        NnPredictor { level, window_days, seed, days: Vec::new(), history: Vec::new() }
    }

    pub fn history(&self) -> &[HistoryPoint] {
        &self.history
    }
}

impl Predictor for NnPredictor {
    fn name(&self) -> String {
        "NN".into()
    }

    fn observe(&mut self, trace: &DayTrace, truth: &GroundTruth) -> Result<()> {
        let floor = self.level.floor_dbm();
        let points = trace
            .scans
            .iter()
            .filter(|s| s.ts >= truth.arrival_ts - LegOptions::default().horizon_s && s.ts <= truth.arrival_ts)
            .map(|s| HistoryPoint { fingerprint: filter_env(s, floor), tl_seconds: truth.arrival_ts - s.ts })
            .filter(|h| !h.fingerprint.bssids.is_empty())
            .collect();
        self.days.push(points);
        if self.days.len() > self.window_days {
            self.days.remove(0);
        }
        self.history = self.days.concat();
        Ok(())
    }

    fn predict(&self, q: &Query) -> Result<Answer> {
        let fp = filter_env(&q.scan, self.level.floor_dbm());
        let seed = self.seed ^ (q.ts as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ u64::from(q.bssid.octets()[5]);
        let p = nn_predict(&self.history, &fp, seed)?;
        Ok(Answer { tl_seconds: p.tl_seconds, probes: p.comparisons })
    }
}

/// History points of a set of traces when the home AP is known rather
/// than taken from ground truth.
pub fn nn_history(traces: &[DayTrace], home: &Bssid, level: RssiLevel) -> Vec<HistoryPoint> {
    history_from_traces(traces, home, level.floor_dbm())
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorSample {
    pub day_id: NaiveDate,
    pub query_ts: i64,
    pub signed_error_s: i64,
    pub method: String,
    pub probes: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub method: String,
    pub level: String,
    pub n: usize,
    pub median_abs_s: f64,
    pub pct_within_100s: f64,
    pub early_fraction: f64,
    pub max_abs_s: f64,
    pub cdf: Vec<(f64, f64)>,
    pub probe_cost: f64,
    /// Queries the method could not answer.
    pub unanswered: usize,
    pub samples: Vec<ErrorSample>,
}

/// Right-continuous empirical CDF at each distinct value.
pub fn cdf(values: &[f64]) -> Result<Vec<(f64, f64)>> {
    if values.is_empty() {
        return Err(Error::InsufficientData("cdf of no samples".into()));
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    let mut out: Vec<(f64, f64)> = Vec::new();
    for (i, x) in v.iter().enumerate() {
        let frac = (i + 1) as f64 / n;
        match out.last_mut() {
            Some(last) if last.0 == *x => last.1 = frac,
            _ => out.push((*x, frac)),
        }
    }
    Ok(out)
}

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    }
}

/// Summarizes samples, sorted first by day and query time.
pub fn summarize(method: &str, level: RssiLevel, mut samples: Vec<ErrorSample>, unanswered: usize) -> Result<EvalReport> {
    samples.sort_by_key(|s| (s.day_id, s.query_ts));
    let mut abs: Vec<f64> = samples.iter().map(|s| s.signed_error_s.unsigned_abs() as f64).collect();
    let points = cdf(&abs)?;
    abs.sort_by(f64::total_cmp);
    let n = samples.len();
    let frac = |pred: &dyn Fn(&ErrorSample) -> bool| samples.iter().filter(|s| pred(s)).count() as f64 / n as f64;
    Ok(EvalReport {
        method: method.to_string(),
        level: level.to_string(),
        n,
        median_abs_s: median(&abs),
        pct_within_100s: frac(&|s| s.signed_error_s.unsigned_abs() as f64 <= WITHIN_S),
        early_fraction: frac(&|s| s.signed_error_s <= 0),
        max_abs_s: *abs.last().expect("nonempty"),
        cdf: points,
        probe_cost: samples.iter().map(|s| s.probes as f64).sum::<f64>() / n as f64,
        unanswered,
        samples,
    })
}

/// Replays `dataset` through `predictor`. The first [`COLD_START_DAYS`]
/// calendar days only feed the predictor.
pub fn evaluate(predictor: &mut dyn Predictor, dataset: &Dataset, level: RssiLevel) -> Result<EvalReport> {
    let days = dataset.days();
    let span = match (days.first(), days.last()) {
        (Some(a), Some(b)) => (b.0.day_id - a.0.day_id).num_days() as usize + 1,
        _ => 0,
    };
    if span <= COLD_START_DAYS {
        return Err(Error::InsufficientHistory { days: span, required: COLD_START_DAYS });
    }
    let first = days[0].0.day_id;
    let opts = LegOptions::with_threshold(level.threshold());
    let name = predictor.name();
    let mut samples = Vec::new();
    let mut unanswered = 0;
    for (trace, truth) in days {
        if (trace.day_id - first).num_days() as usize >= COLD_START_DAYS {
            for q in extract_queries(trace, truth, &opts) {
                match predictor.predict(&q) {
                    Ok(a) => samples.push(ErrorSample {
                        day_id: q.day_id,
                        query_ts: q.ts,
                        signed_error_s: a.tl_seconds - q.actual_tl,
                        method: name.clone(),
                        probes: a.probes,
                    }),
                    Err(Error::UnknownBssid(_) | Error::NoHistory) => unanswered += 1,
                    Err(e) => return Err(e),
                }
            }
        }
        predictor.observe(trace, truth)?;
    }
    summarize(&name, level, samples, unanswered)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub level: RssiLevel,
    pub tls: EvalReport,
    pub nn: EvalReport,
}

/// Full TLS and NN evaluations at each RSSI level.
pub fn sweep_rssi_filter(dataset: &Dataset, levels: &[RssiLevel], window_days: usize, seed: u64) -> Result<Vec<SweepRow>> {
    if levels.len() < 2 {
        return Err(Error::Validation(format!("a sweep needs at least 2 levels, got {}", levels.len())));
    }
    levels
        .iter()
        .map(|&level| {
            let tls = evaluate(&mut TlsPredictor::new(level, window_days), dataset, level)?;
            let nn = evaluate(&mut NnPredictor::new(level, window_days, seed), dataset, level)?;
            Ok(SweepRow { level, tls, nn })
        })
        .collect()
}

pub fn write_report_csv<'a>(w: impl Write, reports: impl IntoIterator<Item = &'a EvalReport>) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["method", "level", "n", "median_abs_s", "pct_within_100s", "early_fraction", "max_abs_s", "probe_cost"])?;
    for r in reports {
        out.write_record([
            r.method.clone(),
            r.level.clone(),
            r.n.to_string(),
            format!("{:.1}", r.median_abs_s),
            format!("{:.4}", r.pct_within_100s),
            format!("{:.4}", r.early_fraction),
            format!("{:.1}", r.max_abs_s),
            format!("{:.2}", r.probe_cost),
        ])?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_cdf_csv(w: impl Write, report: &EvalReport) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["error_s", "cum_frac"])?;
    for (x, f) in &report.cdf {
        out.write_record([format!("{x}"), format!("{f:.6}")])?;
    }
    out.flush()?;
    Ok(())
}

/// Signed-error histogram in `bin_s`-second bins, keyed by bin lower edge.
pub fn error_histogram(report: &EvalReport, bin_s: i64) -> BTreeMap<i64, usize> {
    let mut h = BTreeMap::new();
    for s in &report.samples {
        *h.entry(s.signed_error_s.div_euclid(bin_s) * bin_s).or_default() += 1;
    }
    h
}
