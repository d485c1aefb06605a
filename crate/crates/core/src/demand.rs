//! Seeded random trip generation with an exact CAV share.

use std::fmt;
use std::fmt::Write as _;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::network::{EdgeId, Network};

// Independent streams so the O/D draw does not depend on the penetration rate.
const TRIP_STREAM: u64 = 1;
const CLASS_STREAM: u64 = 2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DemandError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum VehicleClass {
    Hdv,
    Cav,
}

impl fmt::Display for VehicleClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            VehicleClass::Hdv => "HDV",
            VehicleClass::Cav => "CAV",
        })
    }
}

impl FromStr for VehicleClass {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "HDV" => Ok(VehicleClass::Hdv),
            "CAV" => Ok(VehicleClass::Cav),
            other => Err(format!("unknown vehicle class `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TripSpec {
    pub vehicle_id: u32,
    pub depart_time: f64,
    pub origin: EdgeId,
    pub destination: EdgeId,
    pub class: VehicleClass,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DemandConfig {
    pub total_vehicles: u32,
    /// Departure window `[0, horizon)` in seconds.
    pub horizon: f64,
    /// Share of CAV in `[0, 1]`.
    pub penetration: f64,
    pub seed: u64,
}

impl Default for DemandConfig {
    fn default() -> Self {
        DemandConfig { total_vehicles: 600, horizon: 3600.0, penetration: 0.0, seed: 7 }
    }
}

impl DemandConfig {
    pub fn validate(&self) -> Result<(), DemandError> {
        if !(0.0..=1.0).contains(&self.penetration) {
            return Err(DemandError::InvalidArgument(format!(
                "penetration {} outside [0, 1]",
                self.penetration
            )));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(DemandError::InvalidArgument(format!("horizon {} must be > 0", self.horizon)));
        }
        Ok(())
    }

    /// Number of CAV in the fleet, `round(penetration · total)`.
    pub fn cav_count(&self) -> usize {
        (self.penetration * self.total_vehicles as f64).round() as usize
    }
}

/// Draws `total_vehicles` trips. Departures are uniform on `[0, horizon)`,
/// origin and destination uniform over distinct open edges, and exactly
/// [`DemandConfig::cav_count`] vehicles picked by a seeded shuffle are CAV.
///
/// Trips are sorted by departure and renumbered `0..n` in that order. The
/// class shuffle uses its own stream, so for a fixed seed only the class
/// column changes with the penetration rate, and the CAV set at a lower rate
/// is a subset of the set at any higher rate.
pub fn generate_trips(network: &Network, config: &DemandConfig) -> Result<Vec<TripSpec>, DemandError> {
    config.validate()?;
    let open: Vec<EdgeId> = network.edges().iter().filter(|e| !e.closed).map(|e| e.id).collect();
    if open.len() < 2 {
        return Err(DemandError::InvalidArgument(format!(
            "demand needs at least 2 open edges, network has {}",
            open.len()
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(TRIP_STREAM);
    let n = config.total_vehicles as usize;
    let mut draws: Vec<(f64, EdgeId, EdgeId)> = (0..n)
        .map(|_| {
            let depart = rng.random::<f64>() * config.horizon;
            let origin = open[rng.random_range(0..open.len())];
            let destination = loop {
                let d = open[rng.random_range(0..open.len())];
                if d != origin {
                    break d;
                }
            };
            // Guard against rounding up to the horizon itself.
            let depart = if depart < config.horizon { depart } else { config.horizon.next_down() };
            (depart, origin, destination)
        })
        .collect();
    draws.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut order: Vec<usize> = (0..n).collect();
    let mut class_rng = ChaCha8Rng::seed_from_u64(config.seed);
    class_rng.set_stream(CLASS_STREAM);
    order.shuffle(&mut class_rng);
    let mut classes = vec![VehicleClass::Hdv; n];
    for &i in order.iter().take(config.cav_count()) {
        classes[i] = VehicleClass::Cav;
    }

    Ok(draws
        .into_iter()
        .zip(classes)
        .enumerate()
        .map(|(i, ((depart_time, origin, destination), class))| TripSpec {
            vehicle_id: i as u32,
            depart_time,
            origin,
            destination,
            class,
        })
        .collect())
}

/// `trip <id> <depart> <origin_edge> <dest_edge> <HDV|CAV>` per line.
pub fn save_trips(trips: &[TripSpec]) -> String {
    let mut out = String::new();
    for t in trips {
        let _ = writeln!(out, "trip {} {} {} {} {}", t.vehicle_id, t.depart_time, t.origin, t.destination, t.class);
    }
    out
}

pub fn load_trips(text: &str) -> Result<Vec<TripSpec>, DemandError> {
    let mut trips = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let f: Vec<&str> = body.split_whitespace().collect();
        let err = |message: String| DemandError::Parse { line, message };
        if f.len() != 6 || f[0] != "trip" {
            return Err(err(format!("expected `trip <id> <depart> <origin> <dest> <HDV|CAV>`, got `{body}`")));
        }
        let num = |s: &str, what: &str| s.parse::<f64>().map_err(|_| err(format!("invalid {what} `{s}`")));
        let id = |s: &str, what: &str| s.parse::<u32>().map_err(|_| err(format!("invalid {what} `{s}`")));
        let trip = TripSpec {
            vehicle_id: id(f[1], "vehicle id")?,
            depart_time: num(f[2], "depart time")?,
            origin: id(f[3], "origin edge")?,
            destination: id(f[4], "destination edge")?,
            class: f[5].parse().map_err(err)?,
        };
        if trip.origin == trip.destination {
            return Err(err(format!("trip {} has identical origin and destination", trip.vehicle_id)));
        }
        trips.push(trip);
    }
    Ok(trips)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::build_grid;
    use proptest::prelude::*;

    fn grid() -> Network {
        build_grid(3, 4, 100.0, 13.89, 1).unwrap()
    }

    fn cfg(n: u32, p: f64, seed: u64) -> DemandConfig {
        DemandConfig { total_vehicles: n, horizon: 3600.0, penetration: p, seed }
    }

    fn cav(trips: &[TripSpec]) -> usize {
        trips.iter().filter(|t| t.class == VehicleClass::Cav).count()
    }

    #[test]
    fn penetration_boundaries() {
        let net = grid();
        assert_eq!(cav(&generate_trips(&net, &cfg(100, 0.0, 1)).unwrap()), 0);
        assert_eq!(cav(&generate_trips(&net, &cfg(100, 1.0, 1)).unwrap()), 100);
    }

    #[test]
    fn quarter_penetration_is_exact_and_repeatable() {
        let net = grid();
        let a = generate_trips(&net, &cfg(1000, 0.25, 9)).unwrap();
        let b = generate_trips(&net, &cfg(1000, 0.25, 9)).unwrap();
        assert_eq!(cav(&a), 250);
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_invalid_inputs() {
        let net = grid();
        assert!(generate_trips(&net, &cfg(10, 1.5, 1)).is_err());
        assert!(generate_trips(&net, &DemandConfig { horizon: 0.0, ..cfg(10, 0.5, 1) }).is_err());
        let tiny = crate::network::load_network("node 0 0 0\nnode 1 1 0\nedge 0 0 1 1 1 1\n").unwrap();
        assert!(generate_trips(&tiny, &cfg(10, 0.5, 1)).is_err());
    }

    #[test]
    fn only_class_varies_with_penetration() {
        let net = grid();
        let low = generate_trips(&net, &cfg(300, 0.25, 5)).unwrap();
        let high = generate_trips(&net, &cfg(300, 0.75, 5)).unwrap();
        for (a, b) in low.iter().zip(&high) {
            assert_eq!((a.vehicle_id, a.depart_time, a.origin, a.destination), (b.vehicle_id, b.depart_time, b.origin, b.destination));
            if a.class == VehicleClass::Cav {
                assert_eq!(b.class, VehicleClass::Cav);
            }
        }
    }

    #[test]
    fn trips_file_round_trip() {
        let trips = generate_trips(&grid(), &cfg(20, 0.5, 3)).unwrap();
        assert_eq!(load_trips(&save_trips(&trips)).unwrap(), trips);
        assert!(matches!(load_trips("trip 1 0.0 3 3 HDV\n"), Err(DemandError::Parse { line: 1, .. })));
        assert!(matches!(load_trips("\ntrip 1 0.0 3 4 BUS\n"), Err(DemandError::Parse { line: 2, .. })));
    }

    proptest! {
        #[test]
        fn exact_cav_count_and_ordering(n in 0u32..400, p in 0.0f64..=1.0, seed in any::<u64>()) {
            let net = grid();
            let c = cfg(n, p, seed);
            let trips = generate_trips(&net, &c).unwrap();
            prop_assert_eq!(trips.len(), n as usize);
            prop_assert_eq!(cav(&trips), (p * n as f64).round() as usize);
            for w in trips.windows(2) {
                prop_assert!(w[0].depart_time <= w[1].depart_time);
                prop_assert!(w[0].vehicle_id < w[1].vehicle_id);
            }
            for t in &trips {
                prop_assert!(t.depart_time >= 0.0 && t.depart_time < c.horizon);
                prop_assert_ne!(t.origin, t.destination);
            }
        }
    }
}
