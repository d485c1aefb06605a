//! The four headline cases: no closure vs. central closure, all-HDV vs.
//! all-CAV, reported as a results table.

use cav_nrc::demand::{generate_trips, DemandConfig};
use cav_nrc::engine::{run, Scenario};
use cav_nrc::events::ClosureEvent;
use cav_nrc::metrics::summarize;
use cav_nrc::network::{build_grid, central_edges};
use cav_nrc::report::{table_csv, CaseTable};

fn case(closure: bool, penetration: f64) -> cav_nrc::metrics::SummaryRow {
    let net = build_grid(3, 4, 100.0, 13.89, 1).unwrap();
    let demand = DemandConfig { penetration, ..Default::default() };
    let trips = generate_trips(&net, &demand).unwrap();
    let mut scenario = Scenario::new(net.clone(), trips);
    if closure {
        scenario.events.push(ClosureEvent::new(central_edges(&net, 1).unwrap(), 1200.0, 2400.0));
    }
    summarize(&run(scenario).expect("run completes"))
}

fn main() {
    let table = CaseTable {
        org: case(false, 0.0),
        nrc: case(true, 0.0),
        org_cav: case(false, 1.0),
        nrc_cav: case(true, 1.0),
    };
    print!("{}", table_csv(&table));
    for (label, row) in CaseTable::LABELS.iter().zip([table.org, table.nrc, table.org_cav, table.nrc_cav]) {
        println!("{label:9} mean travel time {:7.2} s, unfinished {}", row.mean_travel_time.unwrap_or(f64::NAN), row.unfinished);
    }
}
