//! Surrogate safety measures: edge-triggered TTC episodes on a hand-made
//! series, PET from a junction log, and the event log of a closure run.

use cav_nrc::config::{ClosureEdges, ClosureSpec, ScenarioConfig};
use cav_nrc::demand::VehicleClass;
use cav_nrc::engine::{run, SafetyKind};
use cav_nrc::metrics::{count_ttc_events, pet_record, ttc, JunctionPassage};

fn main() {
    println!("ttc(gap 15 m, closing 10 m/s) = {:?}", ttc(15.0, 10.0));
    let series = [Some(2.0), Some(1.4), Some(1.2), None, Some(1.4), Some(0.7)];
    println!(
        "episodes in {series:?}: HDV {}, CAV {}",
        count_ttc_events(VehicleClass::Hdv, &series),
        count_ttc_events(VehicleClass::Cav, &series)
    );

    let log = [
        JunctionPassage { vehicle: 1, edge: 5, approach: 2, entry_time: 10.0, exit_time: 10.5 },
        JunctionPassage { vehicle: 2, edge: 5, approach: 7, entry_time: 11.0, exit_time: 11.5 },
        JunctionPassage { vehicle: 3, edge: 5, approach: 2, entry_time: 14.0, exit_time: 14.5 },
    ];
    println!("PET events: {:?}", pet_record(&log, 1.0));

    let mut cfg = ScenarioConfig::default();
    cfg.closure = Some(ClosureSpec { edges: ClosureEdges::Central(1), start: 1200.0, end: 2400.0 });
    for pct in [0.0, 1.0] {
        cfg.demand.penetration = pct;
        let out = run(cfg.build().unwrap()).unwrap();
        let ttc_log = out.safety_log.iter().filter(|e| e.kind == SafetyKind::Ttc).count();
        println!(
            "closure run, {:3}% CAV: TTC {} (HDV {}, CAV {}), PET {}, logged TTC rows {ttc_log}",
            pct * 100.0,
            out.safety.ttc_events,
            out.safety.ttc_hdv,
            out.safety.ttc_cav,
            out.safety.pet_events
        );
    }
}
