//! Seeded trip generation: exact CAV counts, nested CAV sets across
//! penetration rates, and the text trip format.

use cav_nrc::demand::{generate_trips, load_trips, save_trips, DemandConfig, VehicleClass};
use cav_nrc::network::build_grid;

fn main() {
    let net = build_grid(3, 4, 100.0, 13.89, 1).unwrap();
    let base = DemandConfig { total_vehicles: 600, ..Default::default() };

    let mut previous: Option<Vec<u32>> = None;
    for pct in [0, 25, 50, 75, 100] {
        let cfg = DemandConfig { penetration: pct as f64 / 100.0, ..base };
        let trips = generate_trips(&net, &cfg).unwrap();
        let cav: Vec<u32> = trips.iter().filter(|t| t.class == VehicleClass::Cav).map(|t| t.vehicle_id).collect();
        let nested = previous.as_ref().is_none_or(|prev| prev.iter().all(|id| cav.contains(id)));
        println!("{pct:3}% CAV: {} CAV of {}, contains previous CAV set: {nested}", cav.len(), trips.len());
        previous = Some(cav);
    }

    let trips = generate_trips(&net, &DemandConfig { total_vehicles: 5, penetration: 0.4, ..base }).unwrap();
    let text = save_trips(&trips);
    print!("\n{text}");
    assert_eq!(load_trips(&text).unwrap(), trips);
}
