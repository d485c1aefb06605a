//! Microscopic traffic simulation of mixed human-driven and connected
//! autonomous fleets under timed road closures.
//!
//! Human-driven vehicles (HDV) follow the Krauss model and learn about a
//! closure only at the junction before it; connected autonomous vehicles
//! (CAV) follow the Intelligent Driver Model and reroute the moment a
//! closure starts. Runs are deterministic given their seed.
//!
//! ```
//! use cav_nrc::{demand, engine, network};
//!
//! let net = network::build_grid(3, 4, 100.0, 13.89, 1).unwrap();
//! let cfg = demand::DemandConfig { total_vehicles: 20, penetration: 0.5, ..Default::default() };
//! let trips = demand::generate_trips(&net, &cfg).unwrap();
//! let out = engine::run(engine::Scenario::new(net, trips)).unwrap();
//! assert_eq!(out.trips.len(), 20);
//! ```

pub mod cli;
pub mod config;
pub mod demand;
pub mod dynamics;
pub mod engine;
pub mod events;
pub mod metrics;
pub mod network;
pub mod report;
pub mod routing;

pub use demand::{DemandConfig, TripSpec, VehicleClass};
pub use engine::{run, EngineConfig, Scenario, SimulationOutput};
pub use network::{build_grid, central_edges, Network};
