//! Mean travel time under the central closure as CAV penetration grows.
//! Demand is shared across points; only vehicle classes change.

use cav_nrc::config::{ClosureEdges, ClosureSpec, ScenarioConfig};
use cav_nrc::engine::run;
use cav_nrc::metrics::summarize;

fn main() {
    let mut cfg = ScenarioConfig::default();
    cfg.closure = Some(ClosureSpec { edges: ClosureEdges::Central(1), start: 1200.0, end: 2400.0 });

    println!("CAV %  travel time (s)  fuel (l)  TTC events");
    for pct in [0, 25, 50, 75, 100] {
        cfg.demand.penetration = pct as f64 / 100.0;
        let out = run(cfg.build().expect("valid config")).expect("run completes");
        let row = summarize(&out);
        println!(
            "{pct:5}  {:15.2}  {:8.2}  {:10}",
            row.mean_travel_time.unwrap_or(f64::NAN),
            row.fuel,
            row.ttc_count
        );
    }
}
