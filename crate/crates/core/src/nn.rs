//! Nearest-neighbor fingerprint baseline. Every historical scan on the way
//! home is a fingerprint labeled with its time left to arrival; a query
//! fingerprint takes the label of the most similar one.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trace::{Bssid, DayTrace, ScanRecord, MIN_RSSI_DBM};
use crate::time_map::{homeward_leg, LegOptions};

/// Threshold that keeps every observation.
pub const ALL_APS_DBM: i32 = MIN_RSSI_DBM;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fingerprint {
    pub bssids: BTreeSet<Bssid>,
    pub ts: i64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HistoryPoint {
    pub fingerprint: Fingerprint,
    pub tl_seconds: i64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NnPrediction {
    pub tl_seconds: i64,
    /// Index into the history of the chosen point.
    pub index: usize,
    pub comparisons: u64,
}

/// BSSIDs with RSSI at or above `threshold_dbm`.
pub fn filter_env(scan: &ScanRecord, threshold_dbm: i32) -> Fingerprint {
    Fingerprint {
        bssids: scan.aps.iter().filter(|a| a.rssi_dbm >= threshold_dbm).map(|a| a.bssid).collect(),
        ts: scan.ts,
    }
}

/// Jaccard index; two empty sets score 0.
pub fn env_similarity(a: &Fingerprint, b: &Fingerprint) -> f64 {
    let inter = a.bssids.intersection(&b.bssids).count();
    let union = a.bssids.len() + b.bssids.len() - inter;
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

/// Linear scan of the whole history. Exact similarity ties are broken
/// uniformly at random with a generator seeded by `seed`.
pub fn nn_predict(history: &[HistoryPoint], query: &Fingerprint, seed: u64) -> Result<NnPrediction> {
    if history.is_empty() {
        return Err(Error::NoHistory);
    }
    let mut best = f64::NEG_INFINITY;
    let mut tied: Vec<usize> = Vec::new();
    let mut comparisons = 0u64;
    for (i, h) in history.iter().enumerate() {
        comparisons += 1;
        let s = env_similarity(&h.fingerprint, query);
        if s > best {
            best = s;
            tied.clear();
            tied.push(i);
        } else if s == best {
            tied.push(i);
        }
    }
    let index = if tied.len() == 1 {
        tied[0]
    } else {
        tied[ChaCha8Rng::seed_from_u64(seed).random_range(0..tied.len())]
    };
    Ok(NnPrediction { tl_seconds: history[index].tl_seconds, index, comparisons })
}

/// History points from the homeward leg of each trace. Days without an
/// arrival contribute nothing; empty fingerprints are skipped.
pub fn history_from_traces(traces: &[DayTrace], home: &Bssid, threshold_dbm: i32) -> Vec<HistoryPoint> {
    let opts = LegOptions::default();
    let mut out = Vec::new();
    for t in traces {
        let Ok(leg) = homeward_leg(t, home, &opts) else { continue };
        for scan in leg.scans(t) {
            let fingerprint = filter_env(scan, threshold_dbm);
            if !fingerprint.bssids.is_empty() {
                out.push(HistoryPoint { fingerprint, tl_seconds: leg.arrival_ts - scan.ts });
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace::ApObservation;

    fn b(i: u8) -> Bssid {
        Bssid::from_octets([0xa, 0, 0, 0, 0, i])
    }

    fn fp(ids: &[u8]) -> Fingerprint {
        Fingerprint { bssids: ids.iter().map(|&i| b(i)).collect(), ts: 0 }
    }

    fn point(ids: &[u8], tl: i64) -> HistoryPoint {
        HistoryPoint { fingerprint: fp(ids), tl_seconds: tl }
    }

    fn scan(obs: &[(u8, i32)]) -> ScanRecord {
        ScanRecord {
            ts: 10,
            gps: None,
            connected: None,
            aps: obs.iter().map(|&(i, r)| ApObservation { bssid: b(i), rssi_dbm: r }).collect(),
        }
    }

    #[test]
    fn filter_examples() {
        let s = scan(&[(1, -60), (2, -75), (3, -70)]);
        assert_eq!(filter_env(&s, -70).bssids, fp(&[1, 3]).bssids);
        assert_eq!(filter_env(&s, ALL_APS_DBM).bssids.len(), 3);
        assert!(filter_env(&s, -50).bssids.is_empty());
    }

    #[test]
    fn similarity_examples() {
        assert_eq!(env_similarity(&fp(&[1, 2]), &fp(&[1, 2])), 1.0);
        assert_eq!(env_similarity(&fp(&[1]), &fp(&[2])), 0.0);
        assert!((env_similarity(&fp(&[1, 2]), &fp(&[2, 3])) - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(env_similarity(&fp(&[]), &fp(&[])), 0.0);
    }

    #[test]
    fn predict_examples() {
        let p = nn_predict(&[point(&[1], 42)], &fp(&[9]), 0).unwrap();
        assert_eq!((p.tl_seconds, p.comparisons), (42, 1));

        let h = vec![point(&[1, 2, 3, 4, 5, 6, 7, 8, 9, 10], 100), point(&[1, 2, 3], 200)];
        let q = fp(&[1, 2, 3, 4, 5, 6, 7, 8, 9]);
        assert_eq!(nn_predict(&h, &q, 0).unwrap().tl_seconds, 100);

        assert!(matches!(nn_predict(&[], &q, 0), Err(Error::NoHistory)));
    }

    #[test]
    fn ties_are_random_but_seeded() {
        let h: Vec<_> = (0..16).map(|i| point(&[1, 2], i)).collect();
        let q = fp(&[2, 3, 4]);
        let picks: BTreeSet<i64> = (0..64).map(|s| nn_predict(&h, &q, s).unwrap().tl_seconds).collect();
        assert!(picks.len() > 1);
        for s in 0..8 {
            assert_eq!(nn_predict(&h, &q, s).unwrap(), nn_predict(&h, &q, s).unwrap());
        }
    }

    #[test]
    fn comparisons_equal_history_size() {
        for n in [10usize, 100, 1000] {
            let h: Vec<_> = (0..n).map(|i| point(&[(i % 200) as u8], i as i64)).collect();
            assert_eq!(nn_predict(&h, &fp(&[3]), 1).unwrap().comparisons, n as u64);
        }
    }
}
