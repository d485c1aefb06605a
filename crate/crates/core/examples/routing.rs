//! Shortest paths on the grid, a detour around a closed link, and the two
//! rerouting policies.

use cav_nrc::demand::VehicleClass;
use cav_nrc::network::{build_grid, central_edges};
use cav_nrc::routing::{plan_reroute, shortest_path, RerouteDecision, ReroutePolicy, RouteProgress};

fn main() {
    let mut net = build_grid(3, 4, 100.0, 13.89, 1).unwrap();
    let (from, to) = (18, 10);
    let open = shortest_path(&net, from, to).unwrap().expect("reachable");
    println!("edge {from} -> edge {to}: {:?}, {} m", open.edges, open.cost);

    for id in central_edges(&net, 1).unwrap() {
        net.set_closed(id, true);
    }
    let detour = shortest_path(&net, from, to).unwrap().expect("still reachable");
    println!("with the central link closed: {:?}, {} m", detour.edges, detour.cost);

    // A vehicle two edges before the closure on its original route.
    let policy = ReroutePolicy::default();
    let closed_at = open.edges.iter().position(|e| net.is_closed(*e));
    if let Some(k) = closed_at {
        for index in [k.saturating_sub(2), k - 1] {
            for class in [VehicleClass::Hdv, VehicleClass::Cav] {
                let progress = RouteProgress { class, route: &open.edges, route_index: index };
                let decision = plan_reroute(progress, &net, policy).unwrap();
                let what = match decision {
                    RerouteDecision::NoChange => "keeps its route".to_string(),
                    RerouteDecision::Reroute(r) => format!("reroutes via {:?}", r.edges),
                    RerouteDecision::Unreachable => "cannot reach its destination".to_string(),
                };
                println!("{class} on route edge #{index}: {what}");
            }
        }
    } else {
        println!("original route avoids the closure");
    }
}
