//! Efficiency, emission and surrogate-safety measures.

use crate::demand::VehicleClass;
use crate::engine::SimulationOutput;
use crate::network::EdgeId;

/// kg of CO2 per liter of fuel burned.
pub const CO2_PER_LITER: f64 = 2.326;
pub const TTC_THRESHOLD_HDV: f64 = 1.5;
pub const TTC_THRESHOLD_CAV: f64 = 0.75;
pub const DEFAULT_PET_THRESHOLD: f64 = 1.0;

/// Time-to-collision for a closing follower; `None` when not closing in.
pub fn ttc(gap: f64, delta_v: f64) -> Option<f64> {
    (delta_v > 0.0).then(|| gap / delta_v)
}

pub fn ttc_threshold(class: VehicleClass) -> f64 {
    match class {
        VehicleClass::Hdv => TTC_THRESHOLD_HDV,
        VehicleClass::Cav => TTC_THRESHOLD_CAV,
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SafetyCounters {
    pub ttc_events: u64,
    pub pet_events: u64,
    pub ttc_hdv: u64,
    pub ttc_cav: u64,
}

impl SafetyCounters {
    pub fn merge(&mut self, other: &SafetyCounters) {
        self.ttc_events += other.ttc_events;
        self.pet_events += other.pet_events;
        self.ttc_hdv += other.ttc_hdv;
        self.ttc_cav += other.ttc_cav;
    }
}

/// Edge-triggered TTC counting for one follower: an episode starts when the
/// TTC drops to the class threshold or below while the previous observation
/// of the same leader was not critical.
#[derive(Debug, Clone, Copy, Default)]
pub struct TtcEpisode {
    last: Option<(u32, bool)>,
}

impl TtcEpisode {
    /// Feeds one step's observation; returns true when a new episode starts.
    pub fn observe(
        &mut self,
        class: VehicleClass,
        leader: Option<u32>,
        ttc_value: Option<f64>,
        counters: &mut SafetyCounters,
    ) -> bool {
        let Some(leader) = leader else {
            self.last = None;
            return false;
        };
        let critical = ttc_value.is_some_and(|t| t <= ttc_threshold(class));
        let was_critical = matches!(self.last, Some((l, true)) if l == leader);
        self.last = Some((leader, critical));
        let starts = critical && !was_critical;
        if starts {
            count_ttc_event(class, counters);
        }
        starts
    }
}

fn count_ttc_event(class: VehicleClass, counters: &mut SafetyCounters) {
    counters.ttc_events += 1;
    match class {
        VehicleClass::Hdv => counters.ttc_hdv += 1,
        VehicleClass::Cav => counters.ttc_cav += 1,
    }
}

/// Episodes in a single follower/leader TTC series.
pub fn count_ttc_events(class: VehicleClass, series: &[Option<f64>]) -> u64 {
    let mut episode = TtcEpisode::default();
    let mut counters = SafetyCounters::default();
    for &v in series {
        episode.observe(class, Some(0), v, &mut counters);
    }
    counters.ttc_events
}

/// One vehicle crossing a node onto `edge` from `approach`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JunctionPassage {
    pub vehicle: u32,
    pub edge: EdgeId,
    pub approach: EdgeId,
    /// Front bumper crosses the node.
    pub entry_time: f64,
    /// Rear bumper clears the node.
    pub exit_time: f64,
}

/// A PET below threshold between consecutive entrants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PetEvent {
    pub edge: EdgeId,
    pub first: u32,
    pub second: u32,
    pub pet: f64,
    pub time: f64,
}

/// Post-encroachment events: for consecutive entrants into the same edge from
/// different approaches, PET is the second's entry minus the first's exit,
/// counted when `0 < PET <= threshold`.
pub fn pet_record(log: &[JunctionPassage], threshold: f64) -> Vec<PetEvent> {
    let mut by_edge: std::collections::BTreeMap<EdgeId, Vec<&JunctionPassage>> = Default::default();
    for p in log {
        by_edge.entry(p.edge).or_default().push(p);
    }
    let mut events = Vec::new();
    for (edge, mut passes) in by_edge {
        passes.sort_by(|a, b| a.entry_time.total_cmp(&b.entry_time).then(a.vehicle.cmp(&b.vehicle)));
        for w in passes.windows(2) {
            let (first, second) = (w[0], w[1]);
            if first.approach == second.approach {
                continue;
            }
            let pet = second.entry_time - first.exit_time;
            if pet > 0.0 && pet <= threshold {
                events.push(PetEvent { edge, first: first.vehicle, second: second.vehicle, pet, time: second.entry_time });
            }
        }
    }
    events.sort_by(|a, b| a.time.total_cmp(&b.time).then(a.second.cmp(&b.second)));
    events
}

/// Polynomial fuel-rate coefficients, liters per second.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FuelCoefficients {
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub c4: f64,
    pub c5: f64,
}

impl Default for FuelCoefficients {
    fn default() -> Self {
        FuelCoefficients { c0: 1.6e-4, c1: 1.3e-5, c2: 0.0, c3: 2.5e-7, c4: 6.0e-5, c5: 0.0 }
    }
}

/// Instantaneous fuel use in l/s. A negative polynomial value (hard braking)
/// falls back to the idle rate `c0`.
pub fn fuel_rate(v: f64, a: f64, c: &FuelCoefficients) -> f64 {
    let rate = c.c0 + c.c1 * v + c.c2 * v * v + c.c3 * v * v * v + c.c4 * v * a + c.c5 * v * a * a;
    if rate < 0.0 {
        c.c0
    } else {
        rate
    }
}

pub fn co2_from_fuel(fuel_liters: f64) -> f64 {
    CO2_PER_LITER * fuel_liters
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct EmissionTotals {
    pub fuel: f64,
    pub co2: f64,
}

impl EmissionTotals {
    pub fn from_fuel(fuel: f64) -> Self {
        EmissionTotals { fuel, co2: co2_from_fuel(fuel) }
    }
}

/// Per-edge running sum of sampled speeds.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EdgeSpeedAccumulator {
    sum: Vec<f64>,
    count: Vec<u64>,
}

impl EdgeSpeedAccumulator {
    pub fn new(edges: usize) -> Self {
        EdgeSpeedAccumulator { sum: vec![0.0; edges], count: vec![0; edges] }
    }

    pub fn record(&mut self, slot: usize, speed: f64) {
        self.sum[slot] += speed;
        self.count[slot] += 1;
    }

    pub fn samples(&self, slot: usize) -> u64 {
        self.count[slot]
    }

    /// `None` for edges never sampled.
    pub fn mean(&self, slot: usize) -> Option<f64> {
        (self.count[slot] > 0).then(|| self.sum[slot] / self.count[slot] as f64)
    }

    pub fn len(&self) -> usize {
        self.sum.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sum.is_empty()
    }
}

/// One row of the results table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SummaryRow {
    /// Over finished trips; `None` when nothing finished.
    pub mean_travel_time: Option<f64>,
    pub fuel: f64,
    pub co2: f64,
    pub ttc_count: u64,
    pub pet_count: u64,
    pub finished: u64,
    pub unfinished: u64,
}

/// Percentage change of each column; `None` marks an undefined ratio.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PercentRow {
    pub mean_travel_time: Option<f64>,
    pub fuel: Option<f64>,
    pub co2: Option<f64>,
    pub ttc_count: Option<f64>,
}

/// Table row for one run. Mean travel time covers finished trips only;
/// unfinished trips are counted separately.
pub fn summarize(output: &SimulationOutput) -> SummaryRow {
    let times: Vec<f64> = output.trips.iter().filter_map(|t| t.travel_time()).collect();
    let mean_travel_time = (!times.is_empty()).then(|| times.iter().sum::<f64>() / times.len() as f64);
    SummaryRow {
        mean_travel_time,
        fuel: output.emissions.fuel,
        co2: output.emissions.co2,
        ttc_count: output.safety.ttc_events,
        pet_count: output.safety.pet_events,
        finished: times.len() as u64,
        unfinished: (output.trips.len() - times.len()) as u64,
    }
}

pub fn percent(case: f64, baseline: f64) -> Option<f64> {
    (baseline != 0.0 && baseline.is_finite() && case.is_finite()).then(|| (case - baseline) / baseline * 100.0)
}

pub fn percent_change(case: &SummaryRow, baseline: &SummaryRow) -> PercentRow {
    let tt = match (case.mean_travel_time, baseline.mean_travel_time) {
        (Some(c), Some(b)) => percent(c, b),
        _ => None,
    };
    PercentRow {
        mean_travel_time: tt,
        fuel: percent(case.fuel, baseline.fuel),
        co2: percent(case.co2, baseline.co2),
        ttc_count: percent(case.ttc_count as f64, baseline.ttc_count as f64),
    }
}

/// Two-decimal display form; `NA` for undefined values.
pub fn display_percent(value: Option<f64>) -> String {
    match value {
        Some(v) => {
            let s = format!("{v:.2}");
            if s == "-0.00" {
                "0.00".to_string()
            } else {
                s
            }
        }
        None => "NA".to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Independent oracle: count maximal runs of critical values.
    fn run_length_oracle(threshold: f64, series: &[Option<f64>]) -> u64 {
        let flags: Vec<bool> = series.iter().map(|v| matches!(v, Some(t) if *t <= threshold)).collect();
        let mut runs = 0;
        let mut i = 0;
        while i < flags.len() {
            if flags[i] {
                runs += 1;
                while i < flags.len() && flags[i] {
                    i += 1;
                }
            } else {
                i += 1;
            }
        }
        runs
    }

    #[test]
    fn ttc_examples() {
        assert_eq!(ttc(15.0, 10.0), Some(1.5));
        assert_eq!(ttc(15.0, 0.0), None);
        assert_eq!(ttc(15.0, -2.0), None);
        assert_eq!(ttc(3.0, 4.0), Some(0.75));
    }

    #[test]
    fn edge_triggered_examples() {
        let s: Vec<Option<f64>> = [2.0, 1.4, 1.2, 2.0].into_iter().map(Some).collect();
        assert_eq!(count_ttc_events(VehicleClass::Hdv, &s), 1);
        assert_eq!(count_ttc_events(VehicleClass::Cav, &s), 0);
        let s: Vec<Option<f64>> = [1.4, 2.0, 1.4].into_iter().map(Some).collect();
        assert_eq!(count_ttc_events(VehicleClass::Hdv, &s), 2);
        for s in [&[Some(1.4), Some(2.0), Some(1.4)][..], &[Some(0.5), None, Some(0.5)]] {
            assert_eq!(count_ttc_events(VehicleClass::Hdv, s), run_length_oracle(1.5, s));
        }
    }

    #[test]
    fn leader_change_starts_new_episode() {
        let mut ep = TtcEpisode::default();
        let mut c = SafetyCounters::default();
        assert!(ep.observe(VehicleClass::Hdv, Some(1), Some(1.0), &mut c));
        assert!(!ep.observe(VehicleClass::Hdv, Some(1), Some(0.9), &mut c));
        assert!(ep.observe(VehicleClass::Hdv, Some(2), Some(0.9), &mut c));
        assert_eq!(c.ttc_events, 2);
        assert_eq!(c.ttc_hdv, 2);
    }

    fn pass(vehicle: u32, approach: EdgeId, entry: f64, exit: f64) -> JunctionPassage {
        JunctionPassage { vehicle, edge: 9, approach, entry_time: entry, exit_time: exit }
    }

    #[test]
    fn pet_examples() {
        assert!(pet_record(&[pass(1, 3, 10.0, 10.5)], 1.0).is_empty());
        let log = [pass(1, 3, 10.0, 10.5), pass(2, 4, 11.0, 11.4)];
        let ev = pet_record(&log, 1.0);
        assert_eq!(ev.len(), 1);
        assert!((ev[0].pet - 0.5).abs() < 1e-12);
        let log = [pass(1, 3, 10.0, 10.5), pass(2, 4, 12.5, 13.0)];
        assert!(pet_record(&log, 1.0).is_empty());
        // Same approach is not a conflict.
        let log = [pass(1, 3, 10.0, 10.5), pass(2, 3, 11.0, 11.4)];
        assert!(pet_record(&log, 1.0).is_empty());
    }

    #[test]
    fn fuel_examples() {
        let c = FuelCoefficients::default();
        assert_eq!(fuel_rate(0.0, 0.0, &c), c.c0);
        assert!((fuel_rate(10.0, 0.0, &c) - 5.4e-4).abs() < 1e-15);
        let braking = fuel_rate(10.0, -3.0, &c);
        assert!(braking >= 0.0);
        assert_eq!(braking, c.c0);
    }

    #[test]
    fn co2_examples() {
        assert_eq!(co2_from_fuel(0.0), 0.0);
        assert!((co2_from_fuel(573.84) - 1334.9).abs() < 0.2);
        let ratio: f64 = 11834.20 / 5087.02;
        assert!((ratio - 2.3264).abs() < 1e-4);
        let co2 = co2_from_fuel(5087.02);
        assert!((co2 - 11834.20).abs() / 11834.20 < 3e-4);
        let t = EmissionTotals::from_fuel(123.456);
        assert!(((t.co2 - CO2_PER_LITER * t.fuel) / t.co2).abs() < 1e-12);
    }

    fn row(tt: f64) -> SummaryRow {
        SummaryRow { mean_travel_time: Some(tt), fuel: 10.0, co2: 23.26, ttc_count: 5, pet_count: 0, finished: 1, unfinished: 0 }
    }

    #[test]
    fn percent_examples() {
        let p = percent_change(&row(325.03), &row(127.74));
        assert_eq!(display_percent(p.mean_travel_time), "154.45");
        let same = percent_change(&row(127.74), &row(127.74));
        assert_eq!(display_percent(same.mean_travel_time), "0.00");
        assert_eq!(display_percent(same.ttc_count), "0.00");
        let p = percent_change(&row(527.0), &row(556.93));
        assert_eq!(display_percent(p.mean_travel_time), "-5.37");
        let zero = SummaryRow { ttc_count: 0, fuel: 0.0, ..row(1.0) };
        let p = percent_change(&row(2.0), &zero);
        assert_eq!(display_percent(p.ttc_count), "NA");
        assert_eq!(display_percent(p.fuel), "NA");
    }

    #[test]
    fn accumulator_reports_no_data() {
        let mut acc = EdgeSpeedAccumulator::new(3);
        acc.record(1, 10.0);
        acc.record(1, 12.0);
        assert_eq!(acc.mean(0), None);
        assert_eq!(acc.mean(1), Some(11.0));
        assert_eq!(acc.samples(1), 2);
    }

    proptest::proptest! {
        #[test]
        fn edge_trigger_matches_oracle(raw in proptest::collection::vec(proptest::option::of(0.0f64..4.0), 0..60)) {
            for class in [VehicleClass::Hdv, VehicleClass::Cav] {
                proptest::prop_assert_eq!(count_ttc_events(class, &raw), run_length_oracle(ttc_threshold(class), &raw));
            }
        }
    }
}
