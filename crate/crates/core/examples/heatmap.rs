//! Per-edge mean speeds of a closure run compared with the open network,
//! printed in the same layout the heatmap CSV uses.

use cav_nrc::config::{ClosureEdges, ClosureSpec, ScenarioConfig};
use cav_nrc::engine::run;
use cav_nrc::report::{edge_speeds_csv, heatmap_csv, parse_edge_speeds};

fn main() {
    let org = ScenarioConfig::default();
    let mut nrc = org.clone();
    nrc.closure = Some(ClosureSpec { edges: ClosureEdges::Central(1), start: 1200.0, end: 2400.0 });

    let mut maps = Vec::new();
    for cfg in [&org, &nrc] {
        let scenario = cfg.build().unwrap();
        let net = scenario.network.clone();
        let out = run(scenario).unwrap();
        maps.push(parse_edge_speeds(&edge_speeds_csv(&net, &out)).unwrap());
    }

    println!("edge  midpoint        ORG m/s  NRC m/s");
    for (a, b) in maps[0].iter().zip(&maps[1]) {
        let mid = ((a.from.0 + a.to.0) / 2.0, (a.from.1 + a.to.1) / 2.0);
        let show = |v: Option<f64>| v.map_or("   NA".to_string(), |s| format!("{s:7.2}"));
        println!("{:4}  ({:5.0},{:5.0})  {}  {}", a.edge, mid.0, mid.1, show(a.mean_speed), show(b.mean_speed));
    }
    println!("\n{}", heatmap_csv(&maps[1]).lines().take(3).collect::<Vec<_>>().join("\n"));
}
