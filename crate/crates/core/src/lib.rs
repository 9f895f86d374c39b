//! Arrival-time prediction from WiFi scan traces.
//!
//! A phone that scans WiFi on the way home sees the route's access points
//! appear and disappear in a fixed order. [`home`] finds the home AP from
//! nightly dwell, [`time_map`] labels every route AP with the time left to
//! arrival, and [`time_map::predict_tl`] answers "how long until I get home"
//! from a single lost AP. [`door`] detects the moment the front door opens,
//! [`fsm`] keeps the sensors duty-cycled, [`nn`] is the fingerprinting
//! baseline and [`eval`] compares the two on [`simulator`] datasets.

// `!(x > 0.0)` also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod door;
pub mod error;
pub mod eval;
pub mod fsm;
pub mod home;
pub mod nn;
pub mod simulator;
pub mod time_map;
pub mod trace;

pub use error::{Error, Result};
pub use trace::{AccelSample, ApObservation, Bssid, DayTrace, GpsFix, ScanRecord};
