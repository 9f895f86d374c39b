//! Door-opening detection from three joint signals: the home AP is in the
//! scan, the home-AP RSSI fluctuates while the accelerometer reports the
//! user standing still, and the number of visible APs peaks.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trace::{AccelSample, Bssid, DayTrace};

/// Candidate events closer than this are one door crossing.
pub const MERGE_WINDOW_S: i64 = 30;
/// Nominal in-region scan period.
pub const SCAN_PERIOD_S: i64 = 5;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DoorParams {
    pub rssi_window_scans: usize,
    pub rssi_var_threshold_db2: f64,
    pub accel_window_s: i64,
    pub accel_var_threshold: f64,
    pub count_peak_delta: f64,
    pub count_neighborhood_scans: usize,
}

impl Default for DoorParams {
    fn default() -> Self {
        DoorParams {
            rssi_window_scans: 5,
            rssi_var_threshold_db2: 9.0,
            accel_window_s: 3,
            accel_var_threshold: 0.5,
            count_peak_delta: 2.0,
            count_neighborhood_scans: 4,
        }
    }
}

impl DoorParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.rssi_window_scans > 0
            && self.rssi_var_threshold_db2 > 0.0
            && self.accel_window_s > 0
            && self.accel_var_threshold > 0.0
            && self.count_peak_delta > 0.0
            && self.count_neighborhood_scans > 0;
        if ok {
            Ok(())
        } else {
            Err(Error::Config("door parameters must all be positive".into()))
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DoorConditions {
    pub home_visible: bool,
    pub fluctuating_while_standing: bool,
    pub count_peak: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DoorEvent {
    pub ts: i64,
    pub conditions_met: DoorConditions,
}

fn sample_variance(xs: impl ExactSizeIterator<Item = f64> + Clone) -> f64 {
    let n = xs.len() as f64;
    let mean = xs.clone().sum::<f64>() / n;
    xs.map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
}

/// Sample variance (n − 1) of one BSSID's RSSI readings, in dB².
pub fn rssi_fluctuation_score(window: &[i32]) -> Result<f64> {
    if window.len() < 2 {
        return Err(Error::InsufficientData(format!("rssi window of {} reading(s)", window.len())));
    }
    Ok(sample_variance(window.iter().map(|&r| f64::from(r))))
}

/// True iff the magnitude variance over the window is below the threshold.
pub fn is_standing(window: &[AccelSample], params: &DoorParams) -> Result<bool> {
    if window.len() < 3 {
        return Err(Error::InsufficientData(format!("accelerometer window of {} sample(s)", window.len())));
    }
    Ok(sample_variance(window.iter().map(|s| s.magnitude_mps2)) < params.accel_var_threshold)
}

/// Timestamps whose AP count exceeds the mean of the neighboring points on
/// each side (separately) by at least `count_peak_delta`. Points without a
/// full neighborhood on both sides are never peaks.
pub fn ap_count_peak(counts: &[(i64, usize)], params: &DoorParams) -> Result<Vec<i64>> {
    let n = params.count_neighborhood_scans;
    if counts.len() < 2 * n + 1 {
        return Err(Error::InsufficientData(format!("{} count point(s), need {}", counts.len(), 2 * n + 1)));
    }
    let mean = |s: &[(i64, usize)]| s.iter().map(|(_, c)| *c as f64).sum::<f64>() / s.len() as f64;
    Ok((n..counts.len() - n)
        .filter(|&i| {
            let c = counts[i].1 as f64;
            c - mean(&counts[i - n..i]) >= params.count_peak_delta
                && c - mean(&counts[i + 1..=i + n]) >= params.count_peak_delta
        })
        .map(|i| counts[i].0)
        .collect())
}

/// Evaluates the three conditions at every scan and keeps the scans where
/// all hold; candidates within [`MERGE_WINDOW_S`] of an emitted event are
/// folded into it.
pub fn detect_door_events(trace: &DayTrace, home: &Bssid, params: &DoorParams) -> Result<Vec<DoorEvent>> {
    params.validate()?;
    let scans = &trace.scans;
    let counts: Vec<(i64, usize)> = scans.iter().map(|s| (s.ts, s.aps.len())).collect();
    let peaks = match ap_count_peak(&counts, params) {
        Ok(p) => p,
        Err(Error::InsufficientData(_)) => return Ok(Vec::new()),
        Err(e) => return Err(e),
    };
    if peaks.is_empty() {
        return Ok(Vec::new());
    }
    let home_idx: Vec<usize> = (0..scans.len()).filter(|&i| scans[i].contains(home)).collect();
    let half_rssi = params.rssi_window_scans / 2;
    let peak_reach = 2 * SCAN_PERIOD_S;

    let mut events: Vec<DoorEvent> = Vec::new();
    for (pos, &i) in home_idx.iter().enumerate() {
        let ts = scans[i].ts;
        if events.last().is_some_and(|e| ts - e.ts < MERGE_WINDOW_S) {
            continue;
        }
        let near_peak = peaks.iter().any(|p| (p - ts).abs() <= peak_reach);
        if !near_peak {
            continue;
        }
        // home-AP readings from the surrounding scans that saw it
        let lo = pos.saturating_sub(half_rssi);
        let hi = (pos + (params.rssi_window_scans - half_rssi)).min(home_idx.len());
        let readings: Vec<i32> = home_idx[lo..hi].iter().filter_map(|&j| scans[j].rssi_of(home)).collect();
        let fluctuating = rssi_fluctuation_score(&readings).is_ok_and(|v| v >= params.rssi_var_threshold_db2);
        if !fluctuating {
            continue;
        }
        let half = params.accel_window_s as f64 / 2.0;
        let window: Vec<AccelSample> = trace
            .accel
            .iter()
            .filter(|a| ((a.ts - ts) as f64).abs() <= half)
            .copied()
            .collect();
        if !is_standing(&window, params).unwrap_or(false) {
            continue;
        }
        events.push(DoorEvent {
            ts,
            conditions_met: DoorConditions { home_visible: true, fluctuating_while_standing: true, count_peak: true },
        });
    }
    Ok(events)
}
