//! Builds a week-long profile, then replays the next evening's walk home and
//! predicts the time left each time a route AP drops out of range.
//!
//! cargo run --example predict_arrival -- [seed]

use timeloc::eval::extract_queries;
use timeloc::simulator::{synth_dataset, ScenarioSpec};
use timeloc::time_map::{LegOptions, ProfileBuilder};

fn main() -> timeloc::Result<()> {
    let seed: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(7);
    let (traces, truth) = synth_dataset(&ScenarioSpec::walk_cycle_mixture(8), seed)?;
    let opts = LegOptions::with_threshold(Some(-70));
    let mut builder = ProfileBuilder::new(opts, 7);
    for t in &traces[..7] {
        builder.push(t.clone())?;
    }
    let profile = builder.profile().expect("home voted after a week");
    println!("home {}; window {} .. {}", profile.home_bssid, profile.window[0].day_id, profile.built_at);
    for day in &profile.window {
        println!("  {} {} APs, signature {:.0}s", day.day_id, day.entries.len(), day.signature_s);
    }
    let (today, gt) = (&traces[7], &truth[7]);
    println!("{} by {}:", today.day_id, gt.mode.name);
    println!("  {:>17}  {:>5}  {:>9}  {:>6}  {:>5}", "lost bssid", "tdr", "predicted", "actual", "error");
    for q in extract_queries(today, gt, &opts) {
        match profile.predict(&q.bssid, q.observed_tdr) {
            Ok(p) => println!(
                "  {}  {:>5}  {:>9}  {:>6}  {:>+5}",
                q.bssid, q.observed_tdr, p.tl_seconds, q.actual_tl, p.tl_seconds - q.actual_tl
            ),
            Err(e) => println!("  {}  {e}", q.bssid),
        }
    }
    Ok(())
}
