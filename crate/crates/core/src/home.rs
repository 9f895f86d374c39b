//! Home-AP mining by nightly-dwell voting.
//!
//! Each day credits every BSSID with the time it was in range between 21:00
//! and 06:00; the day votes for its largest dwell, and the most-voted BSSID
//! is the home AP.

use std::collections::BTreeMap;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trace::{midnight, Bssid, DayTrace};

pub const NIGHT_START_S: i64 = 21 * 3600;
pub const NIGHT_END_S: i64 = 30 * 3600;
pub const NIGHT_LENGTH_S: i64 = NIGHT_END_S - NIGHT_START_S;
/// Longest scan gap credited as presence. The sleeping sensor wakes every
/// 30 minutes, so a longer gap is missing data.
pub const MAX_CREDITED_GAP_S: i64 = 1800;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NightlyDwell {
    pub day_id: NaiveDate,
    pub dwell: BTreeMap<Bssid, i64>,
}

impl NightlyDwell {
    /// Largest dwell, ties resolved to the smallest BSSID. The flag reports
    /// whether a tie occurred.
    pub fn argmax(&self) -> Option<(Bssid, bool)> {
        let best = *self.dwell.values().max()?;
        let mut winners = self.dwell.iter().filter(|(_, v)| **v == best).map(|(b, _)| *b);
        let first = winners.next()?;
        Some((first, winners.next().is_some()))
    }
}

pub fn night_window(day: NaiveDate) -> (i64, i64) {
    let m = midnight(day);
    (m + NIGHT_START_S, m + NIGHT_END_S)
}

/// Sums, per BSSID, the gaps `t[i+1] - t[i]` (each capped at
/// [`MAX_CREDITED_GAP_S`]) of consecutive scan pairs lying inside the night
/// window where the BSSID appears in the earlier scan.
pub fn nightly_dwell(trace: &DayTrace) -> NightlyDwell {
    let (start, end) = night_window(trace.day_id);
    let mut dwell: BTreeMap<Bssid, i64> = BTreeMap::new();
    let night: Vec<_> = trace.scans.iter().filter(|s| s.ts >= start && s.ts <= end).collect();
    for pair in night.windows(2) {
        let gap = (pair[1].ts - pair[0].ts).min(MAX_CREDITED_GAP_S);
        for ap in &pair[0].aps {
            *dwell.entry(ap.bssid).or_default() += gap;
        }
    }
    NightlyDwell { day_id: trace.day_id, dwell }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HomeVote {
    pub winner: Bssid,
    pub tally: BTreeMap<Bssid, u32>,
    pub confidence: f64,
    /// Days whose own vote was a tie, resolved lexicographically.
    pub tied_days: Vec<NaiveDate>,
    /// True when the overall tally itself was tied.
    pub tally_tied: bool,
}

impl HomeVote {
    pub fn voting_days(&self) -> u32 {
        self.tally.values().sum()
    }
}

pub fn vote_home_ap(traces: &[DayTrace]) -> Result<HomeVote> {
    vote_from_dwells(traces.iter().map(nightly_dwell))
}

pub fn vote_from_dwells(dwells: impl IntoIterator<Item = NightlyDwell>) -> Result<HomeVote> {
    let mut tally: BTreeMap<Bssid, u32> = BTreeMap::new();
    let mut tied_days = Vec::new();
    for d in dwells {
        if let Some((winner, tied)) = d.argmax() {
            *tally.entry(winner).or_default() += 1;
            if tied {
                tied_days.push(d.day_id);
            }
        }
    }
    tied_days.sort();
    let total: u32 = tally.values().sum();
    let best = *tally.values().max().ok_or(Error::NoNightData)?;
    let mut leaders = tally.iter().filter(|(_, v)| **v == best).map(|(b, _)| *b);
    let winner = leaders.next().expect("nonempty tally");
    let tally_tied = leaders.next().is_some();
    Ok(HomeVote { winner, confidence: f64::from(best) / f64::from(total), tally, tied_days, tally_tied })
}

/// Per-BSSID dwell summed over all days, the max-form reading of the vote.
pub fn total_dwell(traces: &[DayTrace]) -> BTreeMap<Bssid, i64> {
    let mut total = BTreeMap::new();
    for t in traces {
        for (b, v) in nightly_dwell(t).dwell {
            *total.entry(b).or_default() += v;
        }
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace::{ApObservation, ScanRecord};

    fn b(i: u8) -> Bssid {
        Bssid::from_octets([0, 0, 0, 0, 0, i])
    }

    fn day() -> NaiveDate {
        "2024-05-01".parse().unwrap()
    }

    fn at(h: i64, m: i64) -> i64 {
        midnight(day()) + h * 3600 + m * 60
    }

    fn scan(ts: i64, aps: &[u8]) -> ScanRecord {
        ScanRecord {
            ts,
            gps: None,
            connected: None,
            aps: aps.iter().map(|&i| ApObservation { bssid: b(i), rssi_dbm: -50 }).collect(),
        }
    }

    fn trace(scans: Vec<ScanRecord>) -> DayTrace {
        DayTrace { day_id: day(), scans, accel: vec![] }
    }

    fn trace_on(day_id: NaiveDate, winners: &[(u8, i64)]) -> DayTrace {
        // one scan per 10 minutes from 21:00; bssid w present for its first n scans
        let m = midnight(day_id);
        let scans = (0..=54)
            .map(|k| {
                let aps: Vec<u8> = winners.iter().filter(|(_, n)| k < *n).map(|(w, _)| *w).collect();
                scan(m + NIGHT_START_S + k * 600, &aps)
            })
            .collect();
        DayTrace { day_id, scans, accel: vec![] }
    }

    #[test]
    fn full_night_every_minute() {
        // 21:00 .. 05:59, 540 scans, 539 gaps
        let scans = (0..540).map(|k| scan(at(21, 0) + 60 * k, &[1])).collect();
        let d = nightly_dwell(&trace(scans));
        assert_eq!(d.dwell[&b(1)], 32_340);
    }

    #[test]
    fn evening_only_presence_is_absent() {
        let scans = (0..=30).map(|k| scan(at(20, 0) + 60 * k, &[1])).chain([scan(at(22, 0), &[2]), scan(at(22, 1), &[])]).collect();
        let d = nightly_dwell(&trace(scans));
        assert!(!d.dwell.contains_key(&b(1)));
        assert_eq!(d.dwell[&b(2)], 60);
    }

    #[test]
    fn long_gaps_are_capped() {
        // gaps credited from scans 1, 2 and 4: 60 + min(3540, 1800) + min(3540, 1800)
        let scans = vec![
            scan(at(21, 0), &[1]),
            scan(at(21, 1), &[1]),
            scan(at(22, 0), &[]),
            scan(at(22, 1), &[1]),
            scan(at(23, 0), &[]),
        ];
        assert_eq!(nightly_dwell(&trace(scans)).dwell[&b(1)], 3660);
    }

    #[test]
    fn empty_night_is_empty_map() {
        assert!(nightly_dwell(&trace(vec![])).dwell.is_empty());
        assert!(matches!(vote_home_ap(&[trace(vec![])]), Err(Error::NoNightData)));
    }

    #[test]
    fn unanimous_and_majority_votes() {
        let days: Vec<NaiveDate> = (0..3).map(|i| day() + chrono::Days::new(i)).collect();
        let unanimous: Vec<_> = days.iter().map(|d| trace_on(*d, &[(7, 50), (3, 10)])).collect();
        let v = vote_home_ap(&unanimous).unwrap();
        assert_eq!(v.winner, b(7));
        assert_eq!(v.confidence, 1.0);

        let split = vec![trace_on(days[0], &[(7, 50)]), trace_on(days[1], &[(7, 40), (5, 20)]), trace_on(days[2], &[(5, 45), (7, 5)])];
        let v = vote_home_ap(&split).unwrap();
        assert_eq!(v.winner, b(7));
        assert!((v.confidence - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(v.voting_days(), 3);
    }

    #[test]
    fn ties_go_to_smallest_bssid_and_are_flagged() {
        let d0 = day();
        let d1 = day() + chrono::Days::new(1);
        let v = vote_home_ap(&[trace_on(d0, &[(9, 30), (4, 30)]), trace_on(d1, &[(9, 30)])]).unwrap();
        assert_eq!(v.tied_days, vec![d0]);
        // day 0 votes 4, day 1 votes 9: overall tie, smallest wins
        assert!(v.tally_tied);
        assert_eq!(v.winner, b(4));
        assert_eq!(v.confidence, 0.5);
    }

    #[test]
    fn winner_ignores_day_order() {
        let days: Vec<_> = (0..5).map(|i| trace_on(day() + chrono::Days::new(i), &[(1 + (i as u8 % 2), 30), (3, 20)])).collect();
        let mut rev = days.clone();
        rev.reverse();
        assert_eq!(vote_home_ap(&days).unwrap(), vote_home_ap(&rev).unwrap());
    }
}
