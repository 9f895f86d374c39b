//! Votes the home AP from two weeks of nights and prints each night's dwell
//! leader.
//!
//! cargo run --example mine_home -- [seed]

use timeloc::home::{nightly_dwell, vote_home_ap};
use timeloc::simulator::{synth_dataset, ScenarioSpec};

fn main() -> timeloc::Result<()> {
    let seed: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(7);
    let scenario = ScenarioSpec::simple_walk(14);
    let (traces, _) = synth_dataset(&scenario, seed)?;
    for t in &traces {
        let d = nightly_dwell(t);
        let mut ranked: Vec<_> = d.dwell.iter().collect();
        ranked.sort_by(|a, b| b.1.cmp(a.1).then(a.0.cmp(b.0)));
        let top: Vec<String> = ranked.iter().take(3).map(|(b, s)| format!("{b} {:.1}h", **s as f64 / 3600.0)).collect();
        println!("{}  {}", t.day_id, top.join(", "));
    }
    let vote = vote_home_ap(&traces)?;
    println!("home {} with {:.0}% of the votes (planted {})", vote.winner, 100.0 * vote.confidence, scenario.route.home_bssid);
    Ok(())
}
